// SPDX-License-Identifier: Apache-2.0
#include "horrr/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

#include "horrr/error.hpp"
#include "horrr/manifold.hpp"
#include "horrr/rng.hpp"
#include "horrr/tensor_io.hpp"

namespace horrr {

void SyntheticSpec::validate() const {
  if (k < 1 || m < 1 || n < 1 || d < 1 || r < 1) throw ShapeError("synthetic spec: sizes must be positive");
  if (r > m) throw ShapeError("synthetic spec: r must not exceed m");
  if (!(noise >= 0) || !std::isfinite(noise)) throw ShapeError("synthetic spec: noise must be >= 0");
  if (noise > 0) {
    const double bytes = 8.0 * static_cast<double>(k) * std::pow(static_cast<double>(m), d);
    if (bytes > memory_cap_bytes)
      throw ShapeError("synthetic spec: dense noise tensor needs " + std::to_string(bytes) +
                       " bytes, above the cap of " + std::to_string(memory_cap_bytes));
  }
}

nlohmann::json SyntheticSpec::to_json() const {
  return {{"k", k}, {"m", m}, {"n", n}, {"d", d}, {"r", r}, {"noise", noise}, {"seed", seed},
          {"memory_cap_bytes", memory_cap_bytes}, {"rng", NormalRng::kAlgorithm}};
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.k = j.value("k", s.k);
  s.m = j.value("m", s.m);
  s.n = j.value("n", s.n);
  s.d = j.value("d", s.d);
  s.r = j.value("r", s.r);
  s.noise = j.value("noise", s.noise);
  s.seed = j.value("seed", s.seed);
  s.memory_cap_bytes = j.value("memory_cap_bytes", s.memory_cap_bytes);
  return s;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  // Stream order is fixed (X, truth seed, noise) so that runs differing only
  // in the noise level share X and W_true.
  NormalRng rng(spec.seed);
  SyntheticData out;
  out.problem.x = rng.normal_matrix(spec.m, spec.n);
  out.w_true = random_point(spec.k, spec.m, spec.r, spec.d, rng.next_u64());
  out.problem.y = apply_tucker(out.w_true.core(), out.w_true.factors(), out.problem.x);
  if (spec.noise > 0) {
    std::vector<Index> dims(spec.d + 1, spec.m);
    dims[0] = spec.k;
    const DenseTensor xi = rng.normal_tensor(dims);
    out.problem.y += spec.noise * apply_dense(xi, out.problem.x);
  }
  out.problem.lambda = 0.0;
  out.problem.degree = spec.d;
  out.problem.rank = spec.r;
  out.problem.validate();
  return out;
}

double rre(const TuckerPoint& w, const TuckerPoint& w_true, const Matrix& x) {
  if (w.ambient_dims() != w_true.ambient_dims()) throw ShapeError("rre: shape mismatch");
  const Matrix truth = apply_tucker(w_true.core(), w_true.factors(), x);
  const double denom = truth.norm();
  if (!(denom > 0)) throw NumericalError("rre: W_true X is zero");
  return (apply_tucker(w.core(), w.factors(), x) - truth).norm() / denom;
}

KernelBaseline::KernelBaseline(Matrix x_train, const Matrix& y_train, int d, double lambda)
    : x_(std::move(x_train)), d_(d) {
  if (d < 1) throw ShapeError("kernel baseline: degree must be positive");
  if (y_train.cols() != x_.cols()) throw ShapeError("kernel baseline: X and Y column mismatch");
  if (!(lambda >= 0)) throw ShapeError("kernel baseline: lambda must be non-negative");
  Matrix kmat = (x_.transpose() * x_).array().pow(d).matrix();
  kmat.diagonal().array() += lambda;
  Eigen::LDLT<Matrix> ldlt(kmat);
  if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14))
    throw NumericalError("kernel baseline: K + lambda I is singular");
  alpha_ = ldlt.solve(y_train.transpose());
  if (!alpha_.allFinite()) throw NumericalError("kernel baseline: non-finite solution");
}

Matrix KernelBaseline::predict(const Matrix& x) const {
  if (x.rows() != x_.rows()) throw ShapeError("kernel baseline: feature dimension mismatch");
  const Matrix kx = (x.transpose() * x_).array().pow(d_).matrix();  // n' x n
  return (kx * alpha_).transpose();
}

Matrix KernelBaseline::dense_unfolding() const { return (kr_power(x_, d_) * alpha_).transpose(); }

void ClassificationDataset::validate() const {
  const Index n = x.cols();
  if (static_cast<Index>(labels.size()) != n || y.cols() != n || y.rows() != classes)
    throw ShapeError("dataset: inconsistent sizes");
  for (Index t = 0; t < n; ++t) {
    if (labels[t] < 0 || labels[t] >= classes) throw ShapeError("dataset: label out of range");
    if (y.col(t).sum() != 1.0 || y(labels[t], t) != 1.0) throw ShapeError("dataset: bad one-hot column");
  }
  std::vector<int> seen(n, 0);
  for (Index i : train) ++seen.at(i);
  for (Index i : test) ++seen.at(i);
  for (int c : seen)
    if (c != 1) throw ShapeError("dataset: split is not a partition");
}

Matrix ClassificationDataset::columns(const Matrix& a, const std::vector<Index>& idx) const {
  Matrix out(a.rows(), static_cast<Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(j) = a.col(idx[j]);
  return out;
}

std::vector<int> ClassificationDataset::labels_of(const std::vector<Index>& idx) const {
  std::vector<int> out;
  out.reserve(idx.size());
  for (Index i : idx) out.push_back(labels.at(i));
  return out;
}

ClassificationDataset make_dataset(const Matrix& features, std::vector<int> labels, int classes,
                                   const DatasetOptions& opt) {
  if (!(opt.test_fraction >= 0 && opt.test_fraction < 1))
    throw ShapeError("dataset: test fraction must be in [0, 1)");
  ClassificationDataset ds;
  const Index n = features.cols();
  ds.x.resize(features.rows() + (opt.bias_feature ? 1 : 0), n);
  ds.x.topRows(features.rows()) = opt.feature_scale * features;
  if (opt.bias_feature) ds.x.bottomRows(1).setOnes();
  ds.labels = std::move(labels);
  ds.classes = classes;
  ds.y = Matrix::Zero(classes, n);
  for (Index t = 0; t < n && t < static_cast<Index>(ds.labels.size()); ++t) {
    if (ds.labels[t] < 0 || ds.labels[t] >= classes) throw ShapeError("dataset: label out of range");
    ds.y(ds.labels[t], t) = 1.0;
  }
  // Fisher-Yates with the library RNG so the split does not depend on the
  // standard library's shuffle.
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  NormalRng rng(opt.seed);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[i], perm[j]);
  }
  const auto n_test = static_cast<Index>(std::llround(opt.test_fraction * static_cast<double>(n)));
  ds.test.assign(perm.begin(), perm.begin() + n_test);
  ds.train.assign(perm.begin() + n_test, perm.end());
  std::sort(ds.test.begin(), ds.test.end());
  std::sort(ds.train.begin(), ds.train.end());
  ds.validate();
  return ds;
}

ClassificationDataset load_labeled_csv(const std::filesystem::path& path, const DatasetOptions& opt) {
  const Matrix raw = read_csv_matrix(path);  // n x (1 + m)
  if (raw.cols() < 2 || raw.rows() < 1) throw IoError("labeled csv needs a label and features: " + path.string());
  std::vector<int> labels(raw.rows());
  int classes = 0;
  for (Index t = 0; t < raw.rows(); ++t) {
    const double v = raw(t, 0);
    if (v < 0 || v != std::floor(v)) throw IoError("labeled csv: bad label in row " + std::to_string(t));
    labels[t] = static_cast<int>(v);
    classes = std::max(classes, labels[t] + 1);
  }
  const Matrix features = raw.rightCols(raw.cols() - 1).transpose();
  return make_dataset(features, std::move(labels), classes, opt);
}

std::vector<int> argmax_labels(const Matrix& scores) {
  std::vector<int> out(scores.cols());
  for (Index t = 0; t < scores.cols(); ++t) {
    int best = 0;
    for (Index i = 1; i < scores.rows(); ++i)
      if (scores(i, t) > scores(best, t)) best = static_cast<int>(i);
    out[t] = best;
  }
  return out;
}

double error_rate(const Matrix& scores, const std::vector<int>& labels) {
  if (scores.cols() == 0) throw ShapeError("error_rate: empty set");
  if (static_cast<Index>(labels.size()) != scores.cols()) throw ShapeError("error_rate: size mismatch");
  const auto pred = argmax_labels(scores);
  Index wrong = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) wrong += pred[t] != labels[t];
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

double classify_eval(const TuckerPoint& w, const ClassificationDataset& data) {
  if (data.test.empty()) throw ShapeError("classify_eval: empty test set");
  if (w.ambient_dims()[0] != data.classes) throw ShapeError("classify_eval: class count mismatch");
  const Matrix xt = data.columns(data.x, data.test);
  return error_rate(apply_tucker(w.core(), w.factors(), xt), data.labels_of(data.test));
}

MultiStartResult minimize_multistart(const HorrrProblem& prob, const OptimizerConfig& cfg, int starts,
                                     const OptimizerHooks& hooks) {
  if (starts < 1) throw ShapeError("multistart: need at least one start");
  MultiStartResult out;
  for (int i = 0; i < starts; ++i) {
    OptimizerConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(i);
    const TuckerPoint init = c.semi_symmetric ? semi_symmetric_init(prob.k(), prob.m(), prob.rank, prob.degree, c.seed)
                                              : random_point(prob.k(), prob.m(), prob.rank, prob.degree, c.seed);
    OptimizeResult res = minimize(prob, init, c, hooks);
    const double f = res.trace.records.empty() ? res.trace.initial.cost : res.trace.records.back().cost;
    out.final_costs.push_back(f);
    out.iterations.push_back(static_cast<int>(res.trace.records.size()));
    if (i == 0 || f < out.final_costs[out.best_start]) {
      out.best_start = static_cast<std::size_t>(i);
      out.best = std::move(res);
    }
  }
  return out;
}

std::vector<AggregateRow> aggregate_series(const std::vector<std::vector<double>>& series) {
  std::size_t len = 0;
  for (const auto& s : series) len = std::max(len, s.size());
  std::vector<AggregateRow> rows;
  for (std::size_t i = 0; i < len; ++i) {
    AggregateRow row;
    row.iter = static_cast<int>(i);
    row.min = std::numeric_limits<double>::infinity();
    row.max = -std::numeric_limits<double>::infinity();
    double sum = 0;
    for (const auto& s : series) {
      if (i >= s.size()) continue;
      sum += s[i];
      row.min = std::min(row.min, s[i]);
      row.max = std::max(row.max, s[i]);
      ++row.count;
    }
    row.mean = sum / row.count;
    rows.push_back(row);
  }
  return rows;
}

void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "iter,mean,min,max,count\n";
  for (const auto& r : rows) out << r.iter << ',' << r.mean << ',' << r.min << ',' << r.max << ',' << r.count << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::optional<int> iterations_to_threshold(const std::vector<double>& series, double threshold) {
  for (std::size_t i = 0; i < series.size(); ++i)
    if (series[i] <= threshold) return static_cast<int>(i);
  return std::nullopt;
}

double median(std::vector<double> v) {
  if (v.empty()) throw ShapeError("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace horrr

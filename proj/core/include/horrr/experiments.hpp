// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "horrr/optimizer.hpp"
#include "horrr/problem.hpp"
#include "horrr/tensor.hpp"
#include "horrr/tucker_point.hpp"

namespace horrr {

inline constexpr double kDefaultNoiseMemoryCap = 2.0 * 1024 * 1024 * 1024;  // bytes

struct SyntheticSpec {
  Index k = 10;
  Index m = 12;
  Index n = 2000;
  int d = 2;
  Index r = 3;
  double noise = 0.0;  // a
  std::uint64_t seed = 0;
  double memory_cap_bytes = kDefaultNoiseMemoryCap;

  // Throws ShapeError on bad sizes, r > m, a < 0, or a dense noise tensor
  // above the memory cap.
  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

struct SyntheticData {
  HorrrProblem problem;  // lambda = 0, rank = r
  TuckerPoint w_true;
};

// X i.i.d. N(0,1); W_true = random_point; Y = (W_true + a xi) X with xi a
// dense i.i.d. normal tensor used only here.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// ||W X - W_true X||_F / ||W_true X||_F.
double rre(const TuckerPoint& w, const TuckerPoint& w_true, const Matrix& x);

// Polynomial-kernel ridge regression: alpha = (K + lambda I)^-1 Y^T with
// K_ij = (x_i^T x_j)^d, f(x) = ((x^T X)^d) alpha.
class KernelBaseline {
 public:
  KernelBaseline(Matrix x_train, const Matrix& y_train, int d, double lambda);
  Matrix predict(const Matrix& x) const;  // k x n'
  const Matrix& alpha() const { return alpha_; }  // n x k
  // Dense coefficient tensor unfolding W_(0) = [X^{kr d} alpha]^T (k x m^d).
  Matrix dense_unfolding() const;

 private:
  Matrix x_;
  Matrix alpha_;
  int d_;
};

struct ClassificationDataset {
  Matrix x;                 // m x n features
  std::vector<int> labels;  // in [0, classes)
  int classes = 0;
  Matrix y;                 // one-hot, classes x n
  std::vector<Index> train;
  std::vector<Index> test;

  void validate() const;
  Matrix columns(const Matrix& a, const std::vector<Index>& idx) const;
  std::vector<int> labels_of(const std::vector<Index>& idx) const;
};

struct DatasetOptions {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  double feature_scale = 1.0 / 16.0;
  bool bias_feature = true;  // append a constant 1 feature
};

// Builds one-hot targets and a seeded shuffled split.
ClassificationDataset make_dataset(const Matrix& features, std::vector<int> labels, int classes,
                                   const DatasetOptions& opt);
// CSV rows: label, then features. Classes = max label + 1.
ClassificationDataset load_labeled_csv(const std::filesystem::path& path, const DatasetOptions& opt);

// Column-wise argmax; ties go to the lowest index.
std::vector<int> argmax_labels(const Matrix& scores);
double error_rate(const Matrix& scores, const std::vector<int>& labels);
// Test-set error of argmax(W X). Throws ShapeError on an empty test set.
double classify_eval(const TuckerPoint& w, const ClassificationDataset& data);

// Runs `minimize` from `starts` random initial points (seeds cfg.seed,
// cfg.seed + 1, ...; semi-symmetric ones when cfg.semi_symmetric) and keeps
// the run with the lowest final cost. Ties go to the earliest start.
struct MultiStartResult {
  OptimizeResult best;
  std::size_t best_start = 0;
  std::vector<double> final_costs;
  std::vector<int> iterations;
};
MultiStartResult minimize_multistart(const HorrrProblem& prob, const OptimizerConfig& cfg, int starts,
                                     const OptimizerHooks& hooks = {});

// Per-iteration aggregation of series across seeds (shorter series stop
// contributing once they end).
struct AggregateRow {
  int iter = 0;
  double mean = 0;
  double min = 0;
  double max = 0;
  int count = 0;
};
std::vector<AggregateRow> aggregate_series(const std::vector<std::vector<double>>& series);
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<AggregateRow>& rows);

// First index with value <= threshold, or nullopt.
std::optional<int> iterations_to_threshold(const std::vector<double>& series, double threshold);
double median(std::vector<double> v);

}  // namespace horrr

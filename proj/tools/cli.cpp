// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "horrr/checkpoint.hpp"
#include "horrr/error.hpp"
#include "horrr/experiments.hpp"
#include "horrr/manifold.hpp"
#include "horrr/optimizer.hpp"
#include "horrr/problem.hpp"
#include "horrr/rng.hpp"
#include "horrr/stationary.hpp"

namespace horrr {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c) {
  c.seed_opt = sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--out", c.out, "Output path");
  sub->add_option("--config", c.config, "JSON file with option values (flags take precedence)")
      ->check(CLI::ExistingFile);
}

json read_config(const std::string& path, const std::set<std::string>& allowed) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  json j = json::parse(in);
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!allowed.empty() && !allowed.count(key)) throw UsageError("unknown config key '" + key + "'");
  return j;
}

// Config value unless the flag was given on the command line.
template <class T>
void merge(const json& cfg, const char* key, const CLI::Option* opt, T& value) {
  if ((opt == nullptr || opt->count() == 0) && cfg.contains(key)) value = cfg.at(key).get<T>();
}

void emit(std::ostream& out, const json& j, const std::string& path) {
  out << j.dump(2) << '\n';
  if (!path.empty()) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << j.dump(2) << '\n';
  }
}

bool has_truth(const fs::path& dir) { return fs::exists(dir / "truth" / "manifest.json"); }

HorrrProblem random_problem_from_seed(Index k, Index m, Index n, int d, double lambda, std::uint64_t seed) {
  NormalRng rng(seed);
  HorrrProblem p;
  p.x = rng.normal_matrix(m, n);
  p.y = rng.normal_matrix(k, n);
  p.lambda = lambda;
  p.degree = d;
  p.rank = 1;
  p.validate();
  return p;
}

// ---- synth ----

struct SynthArgs {
  Common common;
  SyntheticSpec spec;
  std::map<std::string, CLI::Option*> opts;
};

int run_synth(SynthArgs& a, std::ostream& out) {
  const json cfg = read_config(a.common.config, {"k", "m", "n", "d", "r", "noise", "seed", "memory_cap_bytes", "out"});
  SyntheticSpec& s = a.spec;
  merge(cfg, "k", a.opts["k"], s.k);
  merge(cfg, "m", a.opts["m"], s.m);
  merge(cfg, "n", a.opts["n"], s.n);
  merge(cfg, "d", a.opts["d"], s.d);
  merge(cfg, "r", a.opts["r"], s.r);
  merge(cfg, "noise", a.opts["noise"], s.noise);
  merge(cfg, "memory_cap_bytes", a.opts["cap"], s.memory_cap_bytes);
  merge(cfg, "seed", a.common.seed_opt, a.common.seed);
  merge(cfg, "out", nullptr, a.common.out);
  s.seed = a.common.seed;
  if (a.common.out.empty()) throw UsageError("synth: --out is required");
  const fs::path dir = a.common.out;
  const SyntheticData data = generate_synthetic(s);
  save_problem(dir, data.problem, {{"synthetic", s.to_json()}});
  save_point(dir / "truth", data.w_true, {{"role", "w_true"}, {"synthetic", s.to_json()}});
  emit(out, {{"problem", dir.string()}, {"truth", (dir / "truth").string()}, {"spec", s.to_json()}}, "");
  return kExitOk;
}

// ---- fit ----

struct FitArgs {
  Common common;
  std::string in, data, algo = "rcg", step_rule = "adaptive";
  Index rank = 0;
  int degree = 2;
  double lambda = 0, grad_tol = 1e-8, tau = 0, test_fraction = 0.2, feature_scale = 1.0 / 16.0;
  int max_iters = 1000, recore_every = 0, recore_at = -1, starts = 1;
  bool recore_midway = false, semi_symmetric = false, no_bias = false;
  std::map<std::string, CLI::Option*> opts;
};

int run_fit(FitArgs& a, std::ostream& out) {
  json cfg = read_config(a.common.config, {});
  // Problem-level keys; everything else goes to the optimizer config.
  for (const char* key : {"rank", "lambda", "degree", "test_fraction", "recore_midway", "starts", "in", "data", "out"}) {
    if (!cfg.contains(key)) continue;
    json v = cfg[key];
    cfg.erase(key);
    json one = {{key, v}};
    if (std::string(key) == "rank") merge(one, key, a.opts["rank"], a.rank);
    if (std::string(key) == "lambda") merge(one, key, a.opts["lambda"], a.lambda);
    if (std::string(key) == "degree") merge(one, key, a.opts["degree"], a.degree);
    if (std::string(key) == "test_fraction") merge(one, key, a.opts["test_fraction"], a.test_fraction);
    if (std::string(key) == "recore_midway") merge(one, key, a.opts["recore_midway"], a.recore_midway);
    if (std::string(key) == "starts") merge(one, key, a.opts["starts"], a.starts);
    if (std::string(key) == "in") merge(one, key, nullptr, a.in);
    if (std::string(key) == "data") merge(one, key, nullptr, a.data);
    if (std::string(key) == "out") merge(one, key, nullptr, a.common.out);
  }
  OptimizerConfig oc = OptimizerConfig::from_json(cfg);
  if (a.opts["algo"]->count()) oc.algorithm = a.algo == "rgd" ? Algorithm::rgd : Algorithm::rcg;
  if (a.opts["step_rule"]->count()) oc.step.rule = a.step_rule == "model" ? StepRule::model : StepRule::adaptive;
  if (a.opts["max_iters"]->count()) oc.max_iters = a.max_iters;
  if (a.opts["grad_tol"]->count()) oc.grad_tol = a.grad_tol;
  if (a.opts["recore_every"]->count()) oc.recore_every = a.recore_every;
  if (a.opts["recore_at"]->count()) oc.recore_at = a.recore_at;
  if (a.opts["semi_symmetric"]->count()) oc.semi_symmetric = true;
  if (a.opts["tau"]->count()) oc.tau = a.tau;
  if (a.common.seed_opt->count()) oc.seed = a.common.seed;
  if (a.recore_midway) oc.recore_at = oc.max_iters / 2;
  oc.validate();

  if (a.in.empty() == a.data.empty()) throw UsageError("fit: give exactly one of --in and --data");
  HorrrProblem prob;
  std::optional<ClassificationDataset> ds;
  std::optional<TuckerPoint> truth;
  fs::path out_dir = a.common.out;
  if (!a.in.empty()) {
    prob = load_problem(a.in);
    if (a.opts["degree"]->count()) throw UsageError("fit: --degree only applies to --data");
    if (has_truth(a.in)) truth = load_point(fs::path(a.in) / "truth").point;
    if (out_dir.empty()) out_dir = fs::path(a.in) / "fit";
  } else {
    if (out_dir.empty()) throw UsageError("fit: --out is required with --data");
    DatasetOptions dopt;
    dopt.seed = oc.seed;
    dopt.test_fraction = a.test_fraction;
    dopt.feature_scale = a.feature_scale;
    dopt.bias_feature = !a.no_bias;
    ds = load_labeled_csv(a.data, dopt);
    prob.x = ds->columns(ds->x, ds->train);
    prob.y = ds->columns(ds->y, ds->train);
    prob.degree = a.degree;
  }
  if (a.rank > 0) prob.rank = a.rank;
  if (a.opts["lambda"]->count() || !a.data.empty()) prob.lambda = a.lambda;
  prob.validate();

  OptimizerHooks hooks;
  if (truth) {
    const TuckerPoint t = *truth;
    const Matrix x = prob.x;
    hooks.metric = [t, x](const TuckerPoint& p) { return rre(p, t, x); };
  }
  MultiStartResult ms = minimize_multistart(prob, oc, a.starts, hooks);
  OptimizeResult& res = ms.best;
  fs::create_directories(out_dir);
  res.trace.checkpoint = (out_dir / "point").string();
  res.trace.write_jsonl(out_dir / "trace.jsonl");
  save_point(out_dir / "point", res.point, {{"optimizer", oc.to_json()}});

  json summary = res.trace.summary();
  summary["config"] = oc.to_json();
  summary["starts"] = {{"count", a.starts}, {"best", ms.best_start}, {"final_costs", ms.final_costs},
                       {"iterations", ms.iterations}};
  summary["problem"] = {{"k", prob.k()}, {"m", prob.m()}, {"n", prob.n()}, {"degree", prob.degree},
                        {"rank", prob.rank}, {"lambda", prob.lambda}};
  if (truth) summary["rre"] = rre(res.point, *truth, prob.x);
  if (ds) summary["test_error"] = classify_eval(res.point, *ds);
  emit(out, summary, (out_dir / "summary.json").string());
  return res.trace.termination == Termination::boundary ? kExitNumerical : kExitOk;
}

// ---- eval ----

struct EvalArgs {
  Common common;
  std::string in, point;
  bool against_true = false;
};

int run_eval(EvalArgs& a, std::ostream& out) {
  const json cfg = read_config(a.common.config, {"in", "point", "against_true", "out"});
  merge(cfg, "in", nullptr, a.in);
  merge(cfg, "point", nullptr, a.point);
  merge(cfg, "against_true", nullptr, a.against_true);
  merge(cfg, "out", nullptr, a.common.out);
  if (a.in.empty()) throw UsageError("eval: --in is required");
  const HorrrProblem prob = load_problem(a.in);
  const fs::path pdir = a.point.empty() ? fs::path(a.in) / "fit" / "point" : fs::path(a.point);
  const TuckerPoint p = load_point(pdir).point;
  check_compatible(prob, p);
  const StationarityReport rep = stationarity_report(prob, p);
  json j{{"cost", cost(prob, p)},
         {"relative_gradient", rep.gradient_norm / rep.scale},
         {"stationarity", rep.to_json()}};
  if (a.against_true) {
    if (!has_truth(a.in)) throw UsageError("eval: --against-true needs " + (fs::path(a.in) / "truth").string());
    j["rre"] = rre(p, load_point(fs::path(a.in) / "truth").point, prob.x);
  }
  emit(out, j, a.common.out);
  return kExitOk;
}

// ---- analyze-d1 ----

struct ProblemSource {
  std::string in;
  Index k = 4, m = 6, n = 40;
  double lambda = 0;
  std::map<std::string, CLI::Option*> opts;
};

void add_source(CLI::App* sub, ProblemSource& s) {
  sub->add_option("--in", s.in, "Problem directory (random data when omitted)");
  s.opts["k"] = sub->add_option("--k", s.k, "Responses of random data");
  s.opts["m"] = sub->add_option("--m", s.m, "Features of random data");
  s.opts["n"] = sub->add_option("--n", s.n, "Samples of random data");
  s.opts["lambda"] = sub->add_option("--lambda", s.lambda, "Ridge parameter");
}

HorrrProblem resolve_source(ProblemSource& s, const json& cfg, Common& c, int degree) {
  merge(cfg, "in", nullptr, s.in);
  merge(cfg, "k", s.opts["k"], s.k);
  merge(cfg, "m", s.opts["m"], s.m);
  merge(cfg, "n", s.opts["n"], s.n);
  merge(cfg, "lambda", s.opts["lambda"], s.lambda);
  merge(cfg, "seed", c.seed_opt, c.seed);
  merge(cfg, "out", nullptr, c.out);
  if (s.in.empty()) return random_problem_from_seed(s.k, s.m, s.n, degree, s.lambda, c.seed);
  HorrrProblem p = load_problem(s.in);
  if (p.degree != degree) throw UsageError("problem degree must be " + std::to_string(degree));
  if (s.opts["lambda"]->count() || cfg.contains("lambda")) p.lambda = s.lambda;
  return p;
}

const std::set<std::string> kSourceKeys{"in", "k", "m", "n", "lambda", "seed", "out", "runs", "max_iters"};

int run_analyze_d1(ProblemSource& s, Common& c, std::ostream& out) {
  const json cfg = read_config(c.config, kSourceKeys);
  const HorrrProblem prob = resolve_source(s, cfg, c, 1);
  const PencilAnalysis pa = pencil_stationary_points_d1(prob.x, prob.y, prob.lambda);
  const RrrSolution rrr = rrr_closed_form(prob.x, prob.y, 1, prob.lambda);
  const double scale = gradient_scale(prob);
  auto cost_of = [&](const Matrix& w) {
    return 0.5 * ((w * prob.x - prob.y).squaredNorm() + prob.lambda * w.squaredNorm());
  };
  json points = json::array();
  double min_cost = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pa.points.size(); ++i) {
    const auto& pt = pa.points[i];
    HorrrProblem p1 = prob;
    p1.rank = 1;
    const TuckerPoint tp = matrix_point(pt.w, 1);
    json row{{"gamma", pt.pair.gamma},
             {"cost", cost_of(pt.w)},
             {"relative_gradient", tangent_norm(tp, riemannian_gradient(p1, tp)) / scale},
             {"pencil_residual", pencil_residual(prob.x, prob.y, prob.lambda, pt.pair)}};
    if (prob.lambda == 0) {
      const NegativityCertificate nc = negativity_certificate_d1(prob.x, prob.y, pt.w);
      row["negativity"] = {{"exists", nc.exists}, {"value", nc.value}, {"expected", nc.expected}, {"note", nc.note}};
    }
    min_cost = std::min(min_cost, cost_of(pt.w));
    points.push_back(row);
  }
  json j{{"k", prob.k()}, {"m", prob.m()}, {"n", prob.n()}, {"lambda", prob.lambda},
         {"points", points},
         {"skipped", pa.to_json()["skipped"]},
         {"rrr", {{"cost", cost_of(rrr.w)}, {"unique", rrr.unique}, {"boundary_gap", rrr.boundary_gap},
                  {"matches_min_gamma", !pa.points.empty() && (pa.points.front().w - rrr.w).norm() <= 1e-8 * rrr.w.norm()},
                  {"attains_min_cost", cost_of(rrr.w) <= min_cost * (1 + 1e-12)}}}};
  emit(out, j, c.out);
  return kExitOk;
}

// ---- verify-d2r1 ----

struct VerifyArgs {
  ProblemSource source;
  Common common;
  int runs = 4;
  int max_iters = 3000;
  CLI::Option* runs_opt = nullptr;
  CLI::Option* iters_opt = nullptr;
};

int run_verify(VerifyArgs& a, std::ostream& out) {
  const json cfg = read_config(a.common.config, kSourceKeys);
  merge(cfg, "runs", a.runs_opt, a.runs);
  merge(cfg, "max_iters", a.iters_opt, a.max_iters);
  if (!a.source.opts["k"]->count() && !cfg.contains("k")) a.source.k = 3;
  if (!a.source.opts["m"]->count() && !cfg.contains("m")) a.source.m = 5;
  if (!a.source.opts["n"]->count() && !cfg.contains("n")) a.source.n = 80;
  HorrrProblem prob = resolve_source(a.source, cfg, a.common, 2);
  if (prob.lambda != 0) throw UsageError("verify-d2r1: the B-eigenpair correspondence needs lambda = 0");
  prob.rank = 1;
  OptimizerConfig oc;
  oc.max_iters = a.max_iters;
  oc.grad_tol = 1e-13;
  oc.semi_symmetric = true;
  const double scale = gradient_scale(prob);
  json runs = json::array();
  std::vector<GammaPoint> pts;
  bool ok = true;
  for (int i = 0; i < a.runs; ++i) {
    const std::uint64_t seed = a.common.seed + static_cast<std::uint64_t>(i) + 1;
    OptimizeResult res = minimize(prob, semi_symmetric_init(prob.k(), prob.m(), 1, 2, seed), oc);
    Vector u = res.point.factor(1).col(0);
    u.normalize();
    const BEigenInfo info = b_eigen_analysis(prob.x, prob.y, u);
    const TuckerPoint built = build_w_from_b_eigvec(prob.x, prob.y, u);
    const double run_grad = tangent_norm(res.point, riemannian_gradient(prob, res.point)) / scale;
    const double built_grad = tangent_norm(built, riemannian_gradient(prob, built)) / scale;
    ok = ok && info.residual <= 1e-6 && built_grad <= 1e-6;
    runs.push_back({{"seed", seed}, {"termination", to_string(res.trace.termination)},
                    {"relative_gradient", run_grad}, {"b_eigen_residual", info.residual},
                    {"gamma", info.gamma}, {"constructed_relative_gradient", built_grad}});
    pts.push_back({res.point, info.gamma});
  }
  const OrderCheck oc_check = cost_eigen_order_check(prob.x, prob.y, pts);
  json j{{"runs", runs}, {"order_check", oc_check.to_json()}, {"passed", ok && oc_check.passed()}};
  emit(out, j, a.common.out);
  return kExitOk;
}

// ---- baseline-krr ----

struct KrrArgs {
  Common common;
  std::string in, data;
  int d = 2;
  double lambda = 1e-2, test_fraction = 0.2, feature_scale = 1.0 / 16.0;
  bool no_bias = false;
  CLI::Option* d_opt = nullptr;
  CLI::Option* lambda_opt = nullptr;
};

int run_krr(KrrArgs& a, std::ostream& out) {
  const json cfg = read_config(a.common.config, {"in", "data", "d", "lambda", "test_fraction", "seed", "out"});
  merge(cfg, "in", nullptr, a.in);
  merge(cfg, "data", nullptr, a.data);
  merge(cfg, "d", a.d_opt, a.d);
  merge(cfg, "lambda", a.lambda_opt, a.lambda);
  merge(cfg, "test_fraction", nullptr, a.test_fraction);
  merge(cfg, "seed", a.common.seed_opt, a.common.seed);
  merge(cfg, "out", nullptr, a.common.out);
  if (a.in.empty() == a.data.empty()) throw UsageError("baseline-krr: give exactly one of --in and --data");
  json j;
  if (!a.data.empty()) {
    DatasetOptions dopt;
    dopt.seed = a.common.seed;
    dopt.test_fraction = a.test_fraction;
    dopt.feature_scale = a.feature_scale;
    dopt.bias_feature = !a.no_bias;
    const ClassificationDataset ds = load_labeled_csv(a.data, dopt);
    const Matrix xtr = ds.columns(ds.x, ds.train);
    const KernelBaseline kb(xtr, ds.columns(ds.y, ds.train), a.d, a.lambda);
    j = {{"d", a.d}, {"lambda", a.lambda}, {"n_train", ds.train.size()}, {"n_test", ds.test.size()},
         {"train_error", error_rate(kb.predict(xtr), ds.labels_of(ds.train))}};
    if (!ds.test.empty())
      j["test_error"] = error_rate(kb.predict(ds.columns(ds.x, ds.test)), ds.labels_of(ds.test));
  } else {
    const HorrrProblem prob = load_problem(a.in);
    const int d = a.d_opt->count() || cfg.contains("d") ? a.d : prob.degree;
    const double lambda = a.lambda_opt->count() || cfg.contains("lambda") ? a.lambda : prob.lambda;
    const KernelBaseline kb(prob.x, prob.y, d, lambda);
    const Matrix fit = kb.predict(prob.x);
    const double wnorm2 = (kb.alpha().transpose() * (prob.x.transpose() * prob.x).array().pow(d).matrix() *
                           kb.alpha()).trace();
    j = {{"d", d}, {"lambda", lambda},
         {"training_cost", 0.5 * ((fit - prob.y).squaredNorm() + lambda * wnorm2)},
         {"relative_residual", (fit - prob.y).norm() / prob.y.norm()}};
  }
  emit(out, j, a.common.out);
  return kExitOk;
}

// ---- report ----

struct ReportArgs {
  Common common;
  std::vector<std::string> runs;
  std::string field = "metric";
  double threshold = std::numeric_limits<double>::quiet_NaN();
};

std::vector<double> read_trace_field(const fs::path& run, const std::string& field) {
  const fs::path path = fs::is_directory(run) ? run / "trace.jsonl" : run;
  std::ifstream in(path);
  if (!in) throw IoError("cannot read trace " + path.string());
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (!j.contains(field) || !j[field].is_number())
      throw UsageError("trace " + path.string() + " has no numeric field '" + field + "'");
    values.push_back(j[field].get<double>());
  }
  return values;
}

int run_report(ReportArgs& a, std::ostream& out) {
  const json cfg = read_config(a.common.config, {"runs", "field", "threshold", "out"});
  merge(cfg, "runs", nullptr, a.runs);
  merge(cfg, "field", nullptr, a.field);
  merge(cfg, "threshold", nullptr, a.threshold);
  merge(cfg, "out", nullptr, a.common.out);
  if (a.runs.empty()) throw UsageError("report: --runs is required");
  if (a.common.out.empty()) throw UsageError("report: --out is required");
  std::vector<std::vector<double>> series;
  for (const auto& r : a.runs) series.push_back(read_trace_field(r, a.field));
  const auto rows = aggregate_series(series);
  write_aggregate_csv(a.common.out, rows);
  json j{{"runs", a.runs.size()}, {"field", a.field}, {"rows", rows.size()}, {"csv", a.common.out}};
  if (!rows.empty()) j["final"] = {{"mean", rows.back().mean}, {"min", rows.back().min}, {"max", rows.back().max}};
  if (!std::isnan(a.threshold)) {
    std::vector<double> its;
    json per_run = json::array();
    for (const auto& s : series) {
      const auto it = iterations_to_threshold(s, a.threshold);
      per_run.push_back(it ? json(*it) : json(nullptr));
      its.push_back(it ? static_cast<double>(*it) : std::numeric_limits<double>::infinity());
    }
    j["iterations_to_threshold"] = per_run;
    const double med = median(its);
    j["median_iterations_to_threshold"] = std::isfinite(med) ? json(med) : json(nullptr);
  }
  emit(out, j, "");
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Higher-order reduced rank regression on the Tucker manifold", "horrr"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a planted synthetic problem");
  add_common(s, synth.common);
  synth.opts["k"] = s->add_option("--k", synth.spec.k, "Responses");
  synth.opts["m"] = s->add_option("--m", synth.spec.m, "Features");
  synth.opts["n"] = s->add_option("--n", synth.spec.n, "Samples");
  synth.opts["d"] = s->add_option("--d", synth.spec.d, "Polynomial degree");
  synth.opts["r"] = s->add_option("--r", synth.spec.r, "Multilinear rank");
  synth.opts["noise"] = s->add_option("--noise", synth.spec.noise, "Noise level a");
  synth.opts["cap"] = s->add_option("--memory-cap", synth.spec.memory_cap_bytes, "Noise tensor cap in bytes");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Run Riemannian optimization on a problem or dataset");
  add_common(f, fit.common);
  f->add_option("--in", fit.in, "Problem directory");
  f->add_option("--data", fit.data, "Labeled CSV (label, features...) for classification");
  fit.opts["algo"] = f->add_option("--algo", fit.algo, "rgd or rcg")->check(CLI::IsMember({"rgd", "rcg"}));
  fit.opts["step_rule"] = f->add_option("--step-rule", fit.step_rule, "adaptive or model")
                              ->check(CLI::IsMember({"adaptive", "model"}));
  fit.opts["rank"] = f->add_option("--rank", fit.rank, "Multilinear rank r");
  fit.opts["lambda"] = f->add_option("--lambda", fit.lambda, "Ridge parameter");
  fit.opts["degree"] = f->add_option("--degree", fit.degree, "Polynomial degree (with --data)");
  fit.opts["max_iters"] = f->add_option("--max-iters", fit.max_iters, "Iteration budget");
  fit.opts["grad_tol"] = f->add_option("--grad-tol", fit.grad_tol, "Gradient tolerance");
  fit.opts["recore_every"] = f->add_option("--recore-every", fit.recore_every, "Recore period (0: off)");
  fit.opts["recore_at"] = f->add_option("--recore-at", fit.recore_at, "Single recore iteration (-1: off)");
  fit.opts["recore_midway"] = f->add_flag("--recore-midway", fit.recore_midway, "Recore at max_iters/2");
  fit.opts["semi_symmetric"] = f->add_flag("--semi-symmetric", fit.semi_symmetric, "Semi-symmetric iterates");
  fit.opts["starts"] = f->add_option("--starts", fit.starts, "Random starts; the lowest final cost is kept")
                         ->check(CLI::PositiveNumber);
  fit.opts["tau"] = f->add_option("--tau", fit.tau, "Barrier weight");
  fit.opts["test_fraction"] = f->add_option("--test-fraction", fit.test_fraction, "Held-out fraction (with --data)");
  f->add_option("--feature-scale", fit.feature_scale, "Feature multiplier (with --data)");
  f->add_flag("--no-bias", fit.no_bias, "Do not append a constant feature (with --data)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a fitted point");
  add_common(e, ev.common);
  e->add_option("--in", ev.in, "Problem directory");
  e->add_option("--point", ev.point, "Checkpoint directory (default <in>/fit/point)");
  e->add_flag("--against-true", ev.against_true, "Report RRE against <in>/truth");

  ProblemSource d1;
  Common d1c;
  auto* a1 = app.add_subcommand("analyze-d1", "Pencil stationary points of a d = 1 problem");
  add_common(a1, d1c);
  add_source(a1, d1);

  VerifyArgs vf;
  auto* v = app.add_subcommand("verify-d2r1", "B-eigenpair round trip for d = 2, r = 1");
  add_common(v, vf.common);
  add_source(v, vf.source);
  vf.runs_opt = v->add_option("--runs", vf.runs, "Number of optimizer runs");
  vf.iters_opt = v->add_option("--max-iters", vf.max_iters, "Iteration budget per run");

  KrrArgs kr;
  auto* k = app.add_subcommand("baseline-krr", "Polynomial-kernel ridge regression baseline");
  add_common(k, kr.common);
  k->add_option("--in", kr.in, "Problem directory");
  k->add_option("--data", kr.data, "Labeled CSV");
  kr.d_opt = k->add_option("--d", kr.d, "Kernel degree");
  kr.lambda_opt = k->add_option("--lambda", kr.lambda, "Ridge parameter");
  k->add_option("--test-fraction", kr.test_fraction, "Held-out fraction");
  k->add_option("--feature-scale", kr.feature_scale, "Feature multiplier");
  k->add_flag("--no-bias", kr.no_bias, "Do not append a constant feature");

  ReportArgs rp;
  auto* r = app.add_subcommand("report", "Aggregate traces across runs into CSV");
  add_common(r, rp.common);
  r->add_option("--runs", rp.runs, "Run directories or trace files");
  r->add_option("--field", rp.field, "Trace field to aggregate (metric, cost, grad_norm)");
  r->add_option("--threshold", rp.threshold, "Also report iterations to reach this value");

  std::vector<const char*> argv;
  argv.push_back("horrr");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& ex) {
    app.exit(ex, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& ex) {
    app.exit(ex, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return kExitUsage;
  }

  try {
    if (s->parsed()) return run_synth(synth, out);
    if (f->parsed()) return run_fit(fit, out);
    if (e->parsed()) return run_eval(ev, out);
    if (a1->parsed()) return run_analyze_d1(d1, d1c, out);
    if (v->parsed()) return run_verify(vf, out);
    if (k->parsed()) return run_krr(kr, out);
    if (r->parsed()) return run_report(rp, out);
  } catch (const NumericalError& ex) {
    err << "numerical failure: " << ex.what() << '\n';
    return kExitNumerical;
  } catch (const UsageError& ex) {
    err << "usage: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const ShapeError& ex) {
    err << "invalid input: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const IoError& ex) {
    err << "io: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const json::exception& ex) {
    err << "json: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace horrr

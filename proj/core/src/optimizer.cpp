// SPDX-License-Identifier: Apache-2.0
#include "horrr/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "horrr/error.hpp"
#include "horrr/rng.hpp"

namespace horrr {

namespace {

const char* to_string(Algorithm a) { return a == Algorithm::rgd ? "rgd" : "rcg"; }
const char* to_string(CgBeta b) { return b == CgBeta::polak_ribiere_plus ? "pr+" : "fr"; }
const char* to_string(StepRule r) { return r == StepRule::adaptive ? "adaptive" : "model"; }

// <A, B> for two Tucker tensors of equal ambient dims.
double tucker_inner(const TuckerPoint& a, const TuckerPoint& b) {
  std::vector<Matrix> cross;
  for (std::size_t j = 0; j < a.order(); ++j) cross.push_back(a.factor(j).transpose() * b.factor(j));
  return inner(a.core(), multi_mode_product(b.core(), cross));
}

}  // namespace

const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iters: return "max_iters";
    case Termination::line_search_failure: return "line_search_failure";
    case Termination::boundary: return "boundary";
  }
  return "unknown";
}

void OptimizerConfig::validate() const {
  if (max_iters < 0) throw ShapeError("max_iters must be non-negative");
  if (!(grad_tol > 0)) throw ShapeError("grad_tol must be positive");
  if (!(step.initial_step > 0)) throw ShapeError("initial step must be positive");
  if (!(step.shrink > 0 && step.shrink < 1)) throw ShapeError("shrink factor must lie in (0,1)");
  if (!(step.c1 > 0 && step.c1 < 1)) throw ShapeError("sufficient-decrease constant must lie in (0,1)");
  if (step.max_backtracks < 1) throw ShapeError("max_backtracks must be positive");
  if (restart_every < 0 || recore_every < 0) throw ShapeError("schedules must be non-negative");
  if (tau < 0) throw ShapeError("tau must be non-negative");
}

nlohmann::json OptimizerConfig::to_json() const {
  return {{"algorithm", to_string(algorithm)},
          {"max_iters", max_iters},
          {"grad_tol", grad_tol},
          {"step_rule", to_string(step.rule)},
          {"initial_step", step.initial_step},
          {"shrink", step.shrink},
          {"c1", step.c1},
          {"max_backtracks", step.max_backtracks},
          {"cg_beta", to_string(cg_beta)},
          {"restart_every", restart_every},
          {"recore_every", recore_every},
          {"recore_at", recore_at},
          {"semi_symmetric", semi_symmetric},
          {"tau", tau},
          {"seed", seed}};
}

OptimizerConfig OptimizerConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{
      "algorithm", "max_iters",     "grad_tol",     "step_rule", "initial_step",
      "shrink",    "c1",            "max_backtracks", "cg_beta", "restart_every",
      "recore_every", "recore_at",  "semi_symmetric", "tau",     "seed"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ShapeError("unknown optimizer option '" + key + "'");
  OptimizerConfig c;
  if (j.contains("algorithm")) {
    const auto a = j["algorithm"].get<std::string>();
    if (a == "rgd") c.algorithm = Algorithm::rgd;
    else if (a == "rcg") c.algorithm = Algorithm::rcg;
    else throw ShapeError("algorithm must be rgd or rcg");
  }
  if (j.contains("cg_beta")) {
    const auto b = j["cg_beta"].get<std::string>();
    if (b == "pr+") c.cg_beta = CgBeta::polak_ribiere_plus;
    else if (b == "fr") c.cg_beta = CgBeta::fletcher_reeves;
    else throw ShapeError("cg_beta must be pr+ or fr");
  }
  if (j.contains("step_rule")) {
    const auto r = j["step_rule"].get<std::string>();
    if (r == "adaptive") c.step.rule = StepRule::adaptive;
    else if (r == "model") c.step.rule = StepRule::model;
    else throw ShapeError("step_rule must be adaptive or model");
  }
  c.max_iters = j.value("max_iters", c.max_iters);
  c.grad_tol = j.value("grad_tol", c.grad_tol);
  c.step.initial_step = j.value("initial_step", c.step.initial_step);
  c.step.shrink = j.value("shrink", c.step.shrink);
  c.step.c1 = j.value("c1", c.step.c1);
  c.step.max_backtracks = j.value("max_backtracks", c.step.max_backtracks);
  c.restart_every = j.value("restart_every", c.restart_every);
  c.recore_every = j.value("recore_every", c.recore_every);
  c.recore_at = j.value("recore_at", c.recore_at);
  c.semi_symmetric = j.value("semi_symmetric", c.semi_symmetric);
  c.tau = j.value("tau", c.tau);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

nlohmann::json IterationRecord::to_json() const {
  nlohmann::json j{{"iter", iter},
                   {"cost", cost},
                   {"grad_norm", grad_norm},
                   {"step", step},
                   {"slope", slope},
                   {"backtracks", backtracks},
                   {"recored", recored},
                   {"restarted", restarted},
                   {"symmetry_correction", symmetry_correction},
                   {"padded_modes", padded_modes},
                   {"wall_seconds", wall_seconds}};
  if (!std::isnan(metric)) j["metric"] = metric;
  if (!std::isnan(direction_symmetry_defect))
    j["direction_symmetry_defect"] = direction_symmetry_defect;
  return j;
}

void RunTrace::write_jsonl(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write trace " + path.string());
  os << initial.to_json().dump() << '\n';
  for (const auto& r : records) os << r.to_json().dump() << '\n';
}

nlohmann::json RunTrace::summary() const {
  const IterationRecord& last = records.empty() ? initial : records.back();
  nlohmann::json j{{"iterations", records.size()},
                   {"termination", to_string(termination)},
                   {"message", message},
                   {"initial_cost", initial.cost},
                   {"final_cost", last.cost},
                   {"final_grad_norm", last.grad_norm},
                   {"checkpoint", checkpoint}};
  if (!std::isnan(last.metric)) j["final_metric"] = last.metric;
  return j;
}

TangentVector transport(const TuckerPoint& from, const TangentVector& z, const TuckerPoint& to) {
  check_anchor(from, z);
  if (from.id() == to.id()) return z;
  const TuckerPoint amb = tangent_as_tucker(from, z);
  return project_to_tangent(to, TuckerContractions(amb));
}

TuckerPoint semi_symmetric_init(Index k, Index m, Index r, int d, std::uint64_t seed) {
  TuckerPoint p = random_point(k, m, r, d, seed);
  std::vector<Matrix> factors{p.factor(0)};
  for (int j = 0; j < d; ++j) factors.push_back(p.factor(1));
  return TuckerPoint(symmetrize_trailing(p.core()), std::move(factors));
}

TuckerPoint symmetrize_point(const TuckerPoint& p, double* correction) {
  const std::size_t n = p.order();
  if (n <= 2) {
    if (correction) *correction = 0.0;
    return p;
  }
  const Matrix& u = p.factor(1);
  std::vector<Matrix> align(n);
  for (std::size_t j = 1; j < n; ++j) align[j] = u.transpose() * p.factor(j);
  DenseTensor core = symmetrize_trailing(multi_mode_product(p.core(), align));
  std::vector<Matrix> factors{p.factor(0)};
  for (std::size_t j = 1; j < n; ++j) factors.push_back(u);
  TuckerPoint q(std::move(core), std::move(factors));
  if (correction) {
    const double a2 = p.core().data().squaredNorm(), b2 = q.core().data().squaredNorm();
    const double diff2 = std::max(0.0, a2 + b2 - 2.0 * tucker_inner(p, q));
    *correction = std::sqrt(diff2) / std::max(std::sqrt(a2), 1e-300);
  }
  return q;
}

namespace {

class Objective {
 public:
  Objective(const HorrrProblem& prob, double tau) : prob_(prob), tau_(tau) {}

  double value(const TuckerPoint& p) {
    if (tau_ > 0) return regularized_cost(prob_, p, tau_).value;
    return cost(prob_, p, ws_);
  }

  TangentVector gradient(const TuckerPoint& p) {
    TangentVector g = riemannian_gradient(prob_, p, ws_);
    if (tau_ > 0) g += regularizer_gradient(p, tau_);
    return g;
  }

  // Minimizer of the quadratic model of the data term along p + t z.
  double model_step(const TuckerPoint& p, const TangentVector& dir, double slope) {
    const Matrix zx = tangent_apply(prob_, p, dir, ws_);
    const double curv = zx.squaredNorm() + prob_.lambda * tangent_inner(p, dir, dir);
    if (!(curv > 0) || !std::isfinite(curv)) return std::numeric_limits<double>::quiet_NaN();
    return -slope / curv;
  }

 private:
  const HorrrProblem& prob_;
  double tau_;
  GradientWorkspace ws_;
};

}  // namespace

OptimizeResult minimize(const HorrrProblem& prob, const TuckerPoint& init,
                        const OptimizerConfig& cfg, const OptimizerHooks& hooks) {
  cfg.validate();
  prob.validate();
  check_compatible(prob, init);
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  Objective obj(prob, cfg.tau);
  TuckerPoint x = init;
  RunTrace trace;
  double f = 0, gnorm = 0;
  TangentVector g, dir;

  try {
    f = obj.value(x);
    g = obj.gradient(x);
  } catch (const BoundaryError& e) {
    trace.termination = Termination::boundary;
    trace.message = e.what();
    return {x, trace};
  }
  gnorm = tangent_norm(x, g);
  trace.initial.cost = f;
  trace.initial.grad_norm = gnorm;
  if (hooks.metric) trace.initial.metric = hooks.metric(x);
  dir = -1.0 * g;
  double last_step = 0.0;
  bool converged = false;

  auto is_converged = [&] { return gnorm <= cfg.grad_tol * std::max(1.0, std::abs(f)); };

  try {
    for (int it = 1; it <= cfg.max_iters; ++it) {
      IterationRecord rec;
      rec.iter = it;
      const bool recore_now = (cfg.recore_every > 0 && it > 1 && (it - 1) % cfg.recore_every == 0) ||
                              it == cfg.recore_at;
      if (recore_now) {
        x = recore(prob, x);
        f = obj.value(x);
        g = obj.gradient(x);
        gnorm = tangent_norm(x, g);
        dir = -1.0 * g;
        rec.recored = true;
        rec.restarted = true;
        last_step = 0.0;  // restart the step rule from the quadratic model
      }
      if (is_converged()) {
        converged = true;
        break;
      }

      double slope = tangent_inner(x, g, dir);
      if (!(slope < 0)) {
        dir = -1.0 * g;
        slope = -gnorm * gnorm;
        rec.restarted = true;
      }

      double t = std::numeric_limits<double>::quiet_NaN();
      if (cfg.step.rule == StepRule::adaptive && last_step > 0) t = 2.0 * last_step;
      if (!(t > 0)) t = obj.model_step(x, dir, slope);
      if (!(t > 0) || !std::isfinite(t)) t = cfg.step.initial_step;

      bool accepted = false;
      TuckerPoint xn;
      double fn = 0;
      RetractInfo rinfo;
      // RGD keeps semi-symmetric iterates in symmetric storage; the direction's
      // own defect is logged so a non-symmetric gradient would still show up.
      bool sym_storage = false;
      if (cfg.semi_symmetric && cfg.algorithm == Algorithm::rgd) {
        rec.direction_symmetry_defect = semi_symmetric_defect(x, dir);
        sym_storage = rec.direction_symmetry_defect <= kSymmetricStorageTol;
      }
      for (int b = 0; b <= cfg.step.max_backtracks; ++b) {
        xn = sym_storage ? retract_hosvd_semi_symmetric(x, dir, t, kSymmetricStorageTol, &rinfo)
                         : retract_hosvd(x, dir, t, &rinfo);
        fn = obj.value(xn);
        if (fn <= f + cfg.step.c1 * t * slope) {
          accepted = true;
          rec.backtracks = b;
          break;
        }
        t *= cfg.step.shrink;
      }
      if (!accepted) {
        trace.termination = Termination::line_search_failure;
        trace.message = "no step satisfied the sufficient-decrease condition";
        break;
      }
      rec.padded_modes = rinfo.padded_modes;

      if (cfg.semi_symmetric && cfg.algorithm == Algorithm::rcg) {
        xn = symmetrize_point(xn, &rec.symmetry_correction);
        fn = obj.value(xn);
      }

      TangentVector gn = obj.gradient(xn);
      const double gn_norm = tangent_norm(xn, gn);
      if (cfg.algorithm == Algorithm::rgd) {
        dir = -1.0 * gn;
      } else {
        const double gg = gnorm * gnorm;
        double beta = 0.0;
        if (gg > 0) {
          if (cfg.cg_beta == CgBeta::fletcher_reeves) {
            beta = gn_norm * gn_norm / gg;
          } else {
            const TangentVector tg = transport(x, g, xn);
            beta = std::max(0.0, (gn_norm * gn_norm - tangent_inner(xn, gn, tg)) / gg);
          }
        }
        if (cfg.restart_every > 0 && it % cfg.restart_every == 0) {
          beta = 0.0;
          rec.restarted = true;
        }
        TangentVector next = -1.0 * gn;
        if (beta > 0) next += beta * transport(x, dir, xn);
        dir = std::move(next);
      }

      last_step = t;
      x = std::move(xn);
      f = fn;
      g = std::move(gn);
      gnorm = gn_norm;
      rec.cost = f;
      rec.grad_norm = gnorm;
      rec.step = t;
      rec.slope = slope;
      if (hooks.metric) rec.metric = hooks.metric(x);
      rec.wall_seconds = elapsed();
      trace.records.push_back(rec);
      if (hooks.on_iteration) hooks.on_iteration(rec);
    }
  } catch (const BoundaryError& e) {
    trace.termination = Termination::boundary;
    trace.message = e.what();
    return {x, trace};
  }

  if (trace.termination != Termination::line_search_failure) {
    if (converged || is_converged())
      trace.termination = Termination::converged;
    else
      trace.termination = Termination::max_iters;
  }
  return {x, trace};
}

}  // namespace horrr

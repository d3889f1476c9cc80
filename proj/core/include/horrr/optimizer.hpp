// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "horrr/manifold.hpp"
#include "horrr/problem.hpp"

namespace horrr {

enum class Algorithm { rgd, rcg };
enum class CgBeta { polak_ribiere_plus, fletcher_reeves };
// adaptive: previous accepted step times two (the first step comes from the
// quadratic model). model: minimizer of the quadratic model of the cost along
// the tangent line, recomputed every iteration.
enum class StepRule { adaptive, model };

struct LineSearchConfig {
  StepRule rule = StepRule::adaptive;
  double initial_step = 1.0;  // used when the quadratic model is degenerate
  double shrink = 0.5;
  double c1 = 1e-4;
  int max_backtracks = 60;
};

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::rcg;
  int max_iters = 1000;
  double grad_tol = 1e-8;  // relative to max(1, |cost|)
  LineSearchConfig step;
  CgBeta cg_beta = CgBeta::polak_ribiere_plus;
  int restart_every = 0;   // 0: only automatic restarts
  int recore_every = 0;    // 0: off
  int recore_at = -1;      // single recore before this iteration; -1: off
  bool semi_symmetric = false;
  double tau = 0.0;        // > 0 adds the singular-value barrier to the objective
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  // Unknown keys are rejected; missing keys keep their defaults.
  static OptimizerConfig from_json(const nlohmann::json& j);
};

// Largest semi-symmetry defect of (x, dir) for which RGD evaluates the
// retraction in symmetric storage.
inline constexpr double kSymmetricStorageTol = 1e-10;

struct IterationRecord {
  int iter = 0;
  double cost = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  double slope = 0.0;  // <grad, dir> at the previous iterate
  int backtracks = 0;
  bool recored = false;
  bool restarted = false;
  double metric = std::numeric_limits<double>::quiet_NaN();
  double symmetry_correction = 0.0;
  double direction_symmetry_defect = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> padded_modes;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
};

enum class Termination { converged, max_iters, line_search_failure, boundary };
const char* to_string(Termination t);

struct RunTrace {
  IterationRecord initial;
  std::vector<IterationRecord> records;  // one per completed iteration
  Termination termination = Termination::max_iters;
  std::string message;
  std::string checkpoint;  // set by callers that persist the final point

  void write_jsonl(const std::filesystem::path& path) const;
  nlohmann::json summary() const;
};

struct OptimizerHooks {
  // Evaluated after every iteration and stored in IterationRecord::metric.
  std::function<double(const TuckerPoint&)> metric;
  std::function<void(const IterationRecord&)> on_iteration;
};

struct OptimizeResult {
  TuckerPoint point;
  RunTrace trace;
};

OptimizeResult minimize(const HorrrProblem& prob, const TuckerPoint& init,
                        const OptimizerConfig& cfg, const OptimizerHooks& hooks = {});

// Vector transport by projection onto the tangent space at `to`.
TangentVector transport(const TuckerPoint& from, const TangentVector& z, const TuckerPoint& to);

// Random point with one shared trailing factor and a core symmetrized over
// its trailing modes.
TuckerPoint semi_symmetric_init(Index k, Index m, Index r, int d, std::uint64_t seed);

// Closest-in-spirit semi-symmetric point: trailing factors replaced by the
// first one, core re-expressed in that basis and symmetrized. `correction`
// receives the relative change of the densified tensor.
TuckerPoint symmetrize_point(const TuckerPoint& p, double* correction = nullptr);

}  // namespace horrr

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "isda/loss.hpp"
#include "isda/types.hpp"

namespace isda {

/// A randomly drawn head/batch/covariance instance for property suites.
struct LossInstance {
  ClassifierHead head;
  FeatureBatch batch;
  std::vector<Matrix> covariances;
  CovarianceMode mode = CovarianceMode::Full;
  Scalar lambda = 0.0;
};

/// Deterministic instance for a trial seed. Covariances are exactly
/// symmetric PSD; `mode` reshapes them (diagonal, identity, pooled).
LossInstance make_loss_instance(std::uint64_t seed, int max_dim, int max_classes,
                                int max_batch, Scalar lambda, CovarianceMode mode);

/// |a - b| / max(1, |a|, |b|): relative for O(1)-and-larger magnitudes,
/// absolute below one.
Scalar scaled_rel_error(Scalar a, Scalar b);

struct BoundTrial {
  int trial = 0;
  std::uint64_t seed = 0;
  Scalar lambda = 0.0;
  Scalar closed_form = 0.0;
  Scalar mc_estimate = 0.0;
  Scalar mc_standard_error = 0.0;
  bool ok = false;  // closed_form >= mc_estimate - 3 * SE
};
std::vector<BoundTrial> run_bound_trials(int trials, std::uint64_t seed,
                                         long long mc_samples);

struct GradientTrial {
  int trial = 0;
  std::uint64_t seed = 0;
  bool end_to_end = false;  // checked through the MLP as well
  Scalar max_rel_error = 0.0;
  bool ok = false;
};
std::vector<GradientTrial> run_gradient_trials(int trials, std::uint64_t seed,
                                               Scalar h = 1e-5, Scalar tol = 1e-6);

struct CovarianceTrial {
  int trial = 0;
  std::uint64_t seed = 0;
  long long samples = 0;
  Scalar rel_frobenius_error = 0.0;
  bool ok = false;
};
std::vector<CovarianceTrial> run_covariance_trials(int trials, std::uint64_t seed,
                                                   Scalar tol = 1e-10);

struct MonotonicityTrial {
  int trial = 0;
  std::uint64_t seed = 0;
  bool dominates_ce = false;   // value at every lambda >= plain CE value
  bool non_decreasing = false; // across the lambda grid
  bool ok = false;
};
std::vector<MonotonicityTrial> run_monotonicity_trials(int trials, std::uint64_t seed);

struct VerifyOptions {
  std::string suite = "all";  // bound | gradients | covariance | all
  int trials = 50;
  std::uint64_t seed = 20240501;
  long long mc_samples = 100000;
};

struct VerifyOutcome {
  bool passed = false;
  nlohmann::ordered_json report() const;
  std::vector<BoundTrial> bound;
  std::vector<GradientTrial> gradients;
  std::vector<CovarianceTrial> covariance;
  std::string suite;
  int trials = 0;
};

VerifyOutcome run_verification(const VerifyOptions& options);

}  // namespace isda

#pragma once

#include <cstdint>
#include <span>

#include "isda/loss.hpp"
#include "isda/types.hpp"

namespace isda {

/// One Monte-Carlo validation of the closed-form bound.
struct OracleReport {
  Scalar mc_estimate = 0.0;
  Scalar mc_standard_error = 0.0;
  Scalar closed_form = 0.0;
  long long sample_count = 0;
  std::uint64_t seed = 0;
};

/// Exact explicit-augmentation loss L_M: every sample gets M augmented
/// copies drawn from N(a_i, lambda * Sigma_{y_i}), and the CE loss is
/// averaged over all N*M copies. This is an independent code path from the
/// closed-form loss; only the sampler is shared. Deterministic given seed
/// (draw k of sample i has a counter-derived substream).
Scalar naive_augmented_loss(const ClassifierHead& head, const FeatureBatch& batch,
                            Scalar lambda, std::span<const Matrix> covariances,
                            long long samples, std::uint64_t seed);

/// Same sampling, plus the standard error of the estimate (batch mean of the
/// per-sample standard errors, which upper-bounds the independent-sum SE)
/// and the closed-form value for comparison. Requires samples >= 100.
OracleReport mc_expected_loss(const ClassifierHead& head, const FeatureBatch& batch,
                              Scalar lambda, std::span<const Matrix> covariances,
                              long long samples, std::uint64_t seed);

/// closed_form - mc_estimate; in expectation non-negative by Jensen.
Scalar jensen_gap(const ClassifierHead& head, const FeatureBatch& batch,
                  Scalar lambda, std::span<const Matrix> covariances,
                  long long samples, std::uint64_t seed);

/// Central finite differences of isda_loss_forward w.r.t. every entry of
/// W, b and the features. The adjusted_logits field of the result is left
/// zero; loss holds the center value.
LossResult finite_difference_gradients(const ClassifierHead& head,
                                       const FeatureBatch& batch, Scalar lambda,
                                       std::span<const Matrix> covariances, Scalar h,
                                       CovarianceMode mode = CovarianceMode::Full);

}  // namespace isda

#pragma once

#include <span>

#include "isda/class_stats.hpp"
#include "isda/types.hpp"

namespace isda {

enum class LambdaSchedule { LinearRamp, Constant };

/// Whether the ramp step counter t advances per optimizer step or per epoch.
enum class RampUnit { Step, Epoch };

struct IsdaConfig {
  Scalar lambda0 = 0.5;
  LambdaSchedule schedule = LambdaSchedule::LinearRamp;
  CovarianceMode covariance_mode = CovarianceMode::Full;
  long long total_steps = 1;
  RampUnit ramp_unit = RampUnit::Step;
};

/// Final linear layer: one weight row and one bias per class.
struct ClassifierHead {
  Matrix weights;  // C x A
  Vector bias;     // C

  int classes() const { return static_cast<int>(weights.rows()); }
  Eigen::Index feature_dim() const { return weights.cols(); }
};

struct LossResult {
  Scalar loss = 0.0;
  Matrix grad_weights;    // C x A
  Vector grad_bias;       // C
  Matrix grad_features;   // N x A
  Matrix adjusted_logits; // N x C, diagnostic
};

/// Augmentation strength at step t: LinearRamp gives (t/T) * lambda0,
/// Constant gives lambda0. Requires 0 <= t <= total_steps.
Scalar lambda_at(const IsdaConfig& config, long long t);

/// Per-class logits with the robust-loss margin term:
/// zt_j = w_j'a + b_j + (lambda/2) (w_j - w_y)' Sigma_y (w_j - w_y).
/// The entry for the true class stays the plain logit exactly. Quadratic
/// forms that round below zero are clamped to zero.
Vector adjusted_logits(const ClassifierHead& head, const Eigen::Ref<const Vector>& a,
                       int y, Scalar lambda, const Eigen::Ref<const Matrix>& sigma_y);

/// Mean over the batch of -log softmax(zt)_y, stabilized by max
/// subtraction. At lambda == 0 this is bit-identical to ce_loss_forward.
/// `covariances` holds one A x A matrix per class; `mode` is a fast-path
/// hint (Diagonal/Identity skip the dense products) and never changes the
/// result for matrices that actually have that shape.
Scalar isda_loss_forward(const ClassifierHead& head, const FeatureBatch& batch,
                         Scalar lambda, std::span<const Matrix> covariances,
                         CovarianceMode mode = CovarianceMode::Full);

/// Forward value plus exact gradients of it w.r.t. W, b and the features,
/// by the chain rule through the adjusted logits. Covariances are treated
/// as constants: no gradient flows into Sigma.
LossResult isda_loss_backward(const ClassifierHead& head, const FeatureBatch& batch,
                              Scalar lambda, std::span<const Matrix> covariances,
                              CovarianceMode mode = CovarianceMode::Full);

/// Plain softmax cross-entropy with the same stabilization; the lambda == 0
/// reference path used by the trainer and the reduction tests.
Scalar ce_loss_forward(const ClassifierHead& head, const FeatureBatch& batch);
LossResult ce_loss_backward(const ClassifierHead& head, const FeatureBatch& batch);

}  // namespace isda

#include "isda/loss.hpp"

#include <cmath>
#include <vector>

#include "isda/numeric.hpp"

namespace isda {
namespace {

// -log softmax(logits)_y with max subtraction.
Scalar stable_nll(const Vector& logits, int y) {
  const Scalar peak = logits.maxCoeff();
  const Scalar lse = peak + std::log((logits.array() - peak).exp().sum());
  return lse - logits(y);
}

// softmax(logits) - onehot(y), the shared backward seed g.
Vector softmax_residual(const Vector& logits, int y) {
  const Scalar peak = logits.maxCoeff();
  Vector g = (logits.array() - peak).exp();
  g /= g.sum();
  g(y) -= 1.0;
  return g;
}

void check_loss_inputs(const ClassifierHead& head, const FeatureBatch& batch) {
  require(batch.size() > 0, "loss: empty batch");
  require(batch.features.rows() == batch.labels.size(),
          "loss: feature/label count mismatch");
  require(batch.features.cols() == head.feature_dim(), "loss: feature dim mismatch");
  require(head.weights.allFinite() && head.bias.allFinite(), "loss: non-finite head");
  require(batch.features.allFinite(), "loss: non-finite features");
  require(head.bias.size() == head.weights.rows(), "loss: head bias/weight mismatch");
  require(head.classes() >= 2, "loss: need at least two classes");
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    require(batch.labels(i) >= 0 && batch.labels(i) < head.classes(),
            "loss: label out of range");
  }
}

// Work shared by every sample of one label: sigma_w = Sigma_y W' and the
// per-class quadratic forms (w_j - w_y)' Sigma_y (w_j - w_y).
struct LabelContext {
  Matrix sigma_w;  // A x C, column j = Sigma_y w_j
  Vector quad;     // C, zero at the label itself
};

LabelContext make_label_context(const ClassifierHead& head, const Matrix& sigma,
                                int y, CovarianceMode mode) {
  LabelContext ctx;
  switch (mode) {
    case CovarianceMode::Identity:
      ctx.sigma_w = head.weights.transpose();
      break;
    case CovarianceMode::Diagonal:
      ctx.sigma_w = sigma.diagonal().asDiagonal() * head.weights.transpose();
      break;
    default:
      ctx.sigma_w.noalias() = sigma * head.weights.transpose();
  }
  const Vector self = (head.weights.transpose().cwiseProduct(ctx.sigma_w))
                          .colwise()
                          .sum()
                          .transpose();                 // d_j = w_j' Sigma w_j
  const Vector cross = head.weights * ctx.sigma_w.col(y);  // c_j = w_j' Sigma w_y
  ctx.quad = (self.array() - 2.0 * cross.array() + cross(y)).cwiseMax(0.0);
  ctx.quad(y) = 0.0;
  return ctx;
}

void check_covariances(std::span<const Matrix> covariances, int classes,
                       Eigen::Index dim) {
  require(static_cast<int>(covariances.size()) == classes,
          "loss: need one covariance per class");
  for (const auto& sigma : covariances) {
    require(sigma.rows() == dim && sigma.cols() == dim,
            "loss: covariance dimension mismatch");
    require(sigma.allFinite(), "loss: non-finite covariance");
  }
}

}  // namespace

Scalar lambda_at(const IsdaConfig& config, long long t) {
  require(config.lambda0 >= 0.0, "lambda_at: lambda0 must be non-negative");
  require(config.total_steps >= 1, "lambda_at: total_steps must be positive");
  require(t >= 0 && t <= config.total_steps, "lambda_at: step out of range");
  if (config.schedule == LambdaSchedule::Constant) return config.lambda0;
  return config.lambda0 *
         (static_cast<Scalar>(t) / static_cast<Scalar>(config.total_steps));
}

Vector adjusted_logits(const ClassifierHead& head, const Eigen::Ref<const Vector>& a,
                       int y, Scalar lambda, const Eigen::Ref<const Matrix>& sigma_y) {
  require(a.size() == head.feature_dim(), "adjusted_logits: feature dim mismatch");
  require(y >= 0 && y < head.classes(), "adjusted_logits: label out of range");
  require(lambda >= 0.0, "adjusted_logits: lambda must be non-negative");
  require(sigma_y.rows() == head.feature_dim() && sigma_y.cols() == head.feature_dim(),
          "adjusted_logits: covariance dimension mismatch");

  Vector z = head.weights * a + head.bias;
  if (lambda == 0.0) return z;
  for (int j = 0; j < head.classes(); ++j) {
    if (j == y) continue;
    const Vector diff = (head.weights.row(j) - head.weights.row(y)).transpose();
    z(j) += 0.5 * lambda * std::max(quadratic_form(sigma_y, diff), 0.0);
  }
  return z;
}

Scalar isda_loss_forward(const ClassifierHead& head, const FeatureBatch& batch,
                         Scalar lambda, std::span<const Matrix> covariances,
                         CovarianceMode mode) {
  check_loss_inputs(head, batch);
  require(lambda >= 0.0, "isda_loss_forward: lambda must be non-negative");

  Matrix logits = batch.features * head.weights.transpose();
  logits.rowwise() += head.bias.transpose();

  std::vector<LabelContext> contexts;
  if (lambda > 0.0) {
    check_covariances(covariances, head.classes(), head.feature_dim());
    contexts.resize(static_cast<std::size_t>(head.classes()));
  }

  Scalar total = 0.0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const int y = batch.labels(i);
    Vector zt = logits.row(i).transpose();
    if (lambda > 0.0) {
      auto& ctx = contexts[static_cast<std::size_t>(y)];
      if (ctx.quad.size() == 0) {
        ctx = make_label_context(head, covariances[static_cast<std::size_t>(y)], y, mode);
      }
      zt += 0.5 * lambda * ctx.quad;
      zt(y) = logits(i, y);
    }
    total += stable_nll(zt, y);
  }
  return total / static_cast<Scalar>(batch.size());
}

LossResult isda_loss_backward(const ClassifierHead& head, const FeatureBatch& batch,
                              Scalar lambda, std::span<const Matrix> covariances,
                              CovarianceMode mode) {
  check_loss_inputs(head, batch);
  require(lambda >= 0.0, "isda_loss_backward: lambda must be non-negative");

  const Eigen::Index n = batch.size();
  const int classes = head.classes();

  Matrix logits = batch.features * head.weights.transpose();
  logits.rowwise() += head.bias.transpose();

  std::vector<LabelContext> contexts;
  if (lambda > 0.0) {
    check_covariances(covariances, classes, head.feature_dim());
    contexts.resize(static_cast<std::size_t>(classes));
  }

  LossResult out;
  out.grad_weights = Matrix::Zero(classes, head.feature_dim());
  out.grad_bias = Vector::Zero(classes);
  out.grad_features = Matrix::Zero(n, head.feature_dim());
  out.adjusted_logits = Matrix::Zero(n, classes);

  Scalar total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = batch.labels(i);
    Vector zt = logits.row(i).transpose();
    const LabelContext* ctx = nullptr;
    if (lambda > 0.0) {
      auto& slot = contexts[static_cast<std::size_t>(y)];
      if (slot.quad.size() == 0) {
        slot = make_label_context(head, covariances[static_cast<std::size_t>(y)], y, mode);
      }
      ctx = &slot;
      zt += 0.5 * lambda * ctx->quad;
      zt(y) = logits(i, y);
    }
    out.adjusted_logits.row(i) = zt.transpose();
    total += stable_nll(zt, y);

    const Vector g = softmax_residual(zt, y);
    out.grad_bias += g;
    out.grad_weights.noalias() += g * batch.features.row(i);
    if (lambda > 0.0) {
      // Rows j != y pick up lambda g_j Sigma (w_j - w_y); row y collects
      // -lambda sum_n g_n Sigma (w_n - w_y).
      const Vector ty = ctx->sigma_w.col(y);
      const Vector gl = lambda * g;
      out.grad_weights.noalias() +=
          gl.asDiagonal() * (ctx->sigma_w.colwise() - ty).transpose();
      const Vector s = ctx->sigma_w * g - g.sum() * ty;
      out.grad_weights.row(y) -= lambda * s.transpose();
    }
    out.grad_features.row(i) = (head.weights.transpose() * g).transpose();
  }

  const Scalar inv_n = 1.0 / static_cast<Scalar>(n);
  out.loss = total * inv_n;
  out.grad_weights *= inv_n;
  out.grad_bias *= inv_n;
  out.grad_features *= inv_n;
  return out;
}

Scalar ce_loss_forward(const ClassifierHead& head, const FeatureBatch& batch) {
  check_loss_inputs(head, batch);

  Matrix logits = batch.features * head.weights.transpose();
  logits.rowwise() += head.bias.transpose();

  Scalar total = 0.0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const Vector zt = logits.row(i).transpose();
    total += stable_nll(zt, batch.labels(i));
  }
  return total / static_cast<Scalar>(batch.size());
}

LossResult ce_loss_backward(const ClassifierHead& head, const FeatureBatch& batch) {
  check_loss_inputs(head, batch);

  const Eigen::Index n = batch.size();
  Matrix logits = batch.features * head.weights.transpose();
  logits.rowwise() += head.bias.transpose();

  LossResult out;
  out.grad_weights = Matrix::Zero(head.classes(), head.feature_dim());
  out.grad_bias = Vector::Zero(head.classes());
  out.grad_features = Matrix::Zero(n, head.feature_dim());
  out.adjusted_logits = Matrix::Zero(n, head.classes());

  Scalar total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = batch.labels(i);
    Vector zt = logits.row(i).transpose();
    out.adjusted_logits.row(i) = zt.transpose();
    total += stable_nll(zt, y);

    const Vector g = softmax_residual(zt, y);
    out.grad_bias += g;
    out.grad_weights.noalias() += g * batch.features.row(i);
    out.grad_features.row(i) = (head.weights.transpose() * g).transpose();
  }

  const Scalar inv_n = 1.0 / static_cast<Scalar>(n);
  out.loss = total * inv_n;
  out.grad_weights *= inv_n;
  out.grad_bias *= inv_n;
  out.grad_features *= inv_n;
  return out;
}

}  // namespace isda

#include "isda/oracle.hpp"

#include <cmath>

#include "isda/numeric.hpp"

namespace isda {
namespace {

// CE terms of Eq. 2, written out from the definition: one stabilized
// -log softmax per augmented copy. Returns the per-copy values.
Vector per_draw_ce(const Matrix& draws, const ClassifierHead& head, int y) {
  Matrix logits = draws * head.weights.transpose();
  logits.rowwise() += head.bias.transpose();
  Vector ce(draws.rows());
  for (Eigen::Index k = 0; k < draws.rows(); ++k) {
    const Scalar peak = logits.row(k).maxCoeff();
    const Scalar lse =
        peak + std::log((logits.row(k).array() - peak).exp().sum());
    ce(k) = lse - logits(k, y);
  }
  return ce;
}

void check_oracle_inputs(const ClassifierHead& head, const FeatureBatch& batch,
                         Scalar lambda, std::span<const Matrix> covariances) {
  require(batch.size() > 0, "oracle: empty batch");
  require(lambda >= 0.0, "oracle: lambda must be non-negative");
  require(static_cast<int>(covariances.size()) == head.classes(),
          "oracle: need one covariance per class");
}

}  // namespace

Scalar naive_augmented_loss(const ClassifierHead& head, const FeatureBatch& batch,
                            Scalar lambda, std::span<const Matrix> covariances,
                            long long samples, std::uint64_t seed) {
  check_oracle_inputs(head, batch, lambda, covariances);
  require(samples >= 1, "naive_augmented_loss: need at least one draw");

  Scalar total = 0.0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const int y = batch.labels(i);
    const Matrix draws =
        mvn_sample(batch.features.row(i).transpose(),
                   covariances[static_cast<std::size_t>(y)], lambda,
                   derive_seed(seed, static_cast<std::uint64_t>(i)), samples);
    total += per_draw_ce(draws, head, y).sum() / static_cast<Scalar>(samples);
  }
  return total / static_cast<Scalar>(batch.size());
}

OracleReport mc_expected_loss(const ClassifierHead& head, const FeatureBatch& batch,
                              Scalar lambda, std::span<const Matrix> covariances,
                              long long samples, std::uint64_t seed) {
  check_oracle_inputs(head, batch, lambda, covariances);
  require(samples >= 100, "mc_expected_loss: need at least 100 draws");

  Scalar mean_total = 0.0;
  Scalar se_total = 0.0;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    const int y = batch.labels(i);
    const Matrix draws =
        mvn_sample(batch.features.row(i).transpose(),
                   covariances[static_cast<std::size_t>(y)], lambda,
                   derive_seed(seed, static_cast<std::uint64_t>(i)), samples);
    const Vector ce = per_draw_ce(draws, head, y);
    const Scalar mean = ce.sum() / static_cast<Scalar>(samples);
    const Scalar var =
        (ce.array() - mean).square().sum() / static_cast<Scalar>(samples - 1);
    mean_total += mean;
    se_total += std::sqrt(var / static_cast<Scalar>(samples));
  }

  OracleReport report;
  report.sample_count = samples;
  report.seed = seed;
  report.mc_estimate = mean_total / static_cast<Scalar>(batch.size());
  report.mc_standard_error = se_total / static_cast<Scalar>(batch.size());
  report.closed_form = isda_loss_forward(head, batch, lambda, covariances);
  return report;
}

Scalar jensen_gap(const ClassifierHead& head, const FeatureBatch& batch,
                  Scalar lambda, std::span<const Matrix> covariances,
                  long long samples, std::uint64_t seed) {
  const OracleReport report =
      mc_expected_loss(head, batch, lambda, covariances, samples, seed);
  return report.closed_form - report.mc_estimate;
}

LossResult finite_difference_gradients(const ClassifierHead& head,
                                       const FeatureBatch& batch, Scalar lambda,
                                       std::span<const Matrix> covariances, Scalar h,
                                       CovarianceMode mode) {
  require(h > 0.0, "finite_difference_gradients: h must be positive");

  LossResult out;
  out.loss = isda_loss_forward(head, batch, lambda, covariances, mode);
  out.grad_weights = Matrix::Zero(head.weights.rows(), head.weights.cols());
  out.grad_bias = Vector::Zero(head.bias.size());
  out.grad_features = Matrix::Zero(batch.features.rows(), batch.features.cols());
  out.adjusted_logits = Matrix::Zero(batch.size(), head.classes());

  ClassifierHead probe = head;
  for (Eigen::Index r = 0; r < head.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < head.weights.cols(); ++c) {
      probe.weights(r, c) = head.weights(r, c) + h;
      const Scalar up = isda_loss_forward(probe, batch, lambda, covariances, mode);
      probe.weights(r, c) = head.weights(r, c) - h;
      const Scalar down = isda_loss_forward(probe, batch, lambda, covariances, mode);
      probe.weights(r, c) = head.weights(r, c);
      out.grad_weights(r, c) = (up - down) / (2.0 * h);
    }
  }
  for (Eigen::Index j = 0; j < head.bias.size(); ++j) {
    probe.bias(j) = head.bias(j) + h;
    const Scalar up = isda_loss_forward(probe, batch, lambda, covariances, mode);
    probe.bias(j) = head.bias(j) - h;
    const Scalar down = isda_loss_forward(probe, batch, lambda, covariances, mode);
    probe.bias(j) = head.bias(j);
    out.grad_bias(j) = (up - down) / (2.0 * h);
  }

  FeatureBatch probe_batch = batch;
  for (Eigen::Index i = 0; i < batch.features.rows(); ++i) {
    for (Eigen::Index c = 0; c < batch.features.cols(); ++c) {
      probe_batch.features(i, c) = batch.features(i, c) + h;
      const Scalar up = isda_loss_forward(head, probe_batch, lambda, covariances, mode);
      probe_batch.features(i, c) = batch.features(i, c) - h;
      const Scalar down =
          isda_loss_forward(head, probe_batch, lambda, covariances, mode);
      probe_batch.features(i, c) = batch.features(i, c);
      out.grad_features(i, c) = (up - down) / (2.0 * h);
    }
  }
  return out;
}

}  // namespace isda

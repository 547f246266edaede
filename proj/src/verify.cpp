#include "isda/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "isda/class_stats.hpp"
#include "isda/model.hpp"
#include "isda/numeric.hpp"
#include "isda/oracle.hpp"

namespace isda {
namespace {

using nlohmann::ordered_json;

Matrix random_psd(std::mt19937_64& rng, Eigen::Index dim) {
  std::normal_distribution<Scalar> normal(0.0, 1.0);
  Matrix g(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) g(r, c) = normal(rng);
  }
  Matrix psd = Matrix::Zero(dim, dim);
  psd.selfadjointView<Eigen::Lower>().rankUpdate(g, 1.0 / static_cast<Scalar>(dim));
  symmetrize_in_place(psd);
  return psd;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  std::uniform_int_distribution<int> dist(lo, hi);
  return dist(rng);
}

}  // namespace

LossInstance make_loss_instance(std::uint64_t seed, int max_dim, int max_classes,
                                int max_batch, Scalar lambda, CovarianceMode mode) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<Scalar> normal(0.0, 1.0);

  LossInstance inst;
  inst.lambda = lambda;
  inst.mode = mode;
  const int dim = uniform_int(rng, 2, max_dim);
  const int classes = uniform_int(rng, 2, max_classes);
  const int batch = uniform_int(rng, 2, max_batch);

  inst.head.weights = Matrix(classes, dim);
  for (int r = 0; r < classes; ++r) {
    for (int c = 0; c < dim; ++c) inst.head.weights(r, c) = 0.8 * normal(rng);
  }
  inst.head.bias = Vector(classes);
  for (int j = 0; j < classes; ++j) inst.head.bias(j) = 0.3 * normal(rng);

  inst.batch.features = Matrix(batch, dim);
  for (int r = 0; r < batch; ++r) {
    for (int c = 0; c < dim; ++c) inst.batch.features(r, c) = normal(rng);
  }
  inst.batch.labels = IntVector(batch);
  for (int r = 0; r < batch; ++r) inst.batch.labels(r) = uniform_int(rng, 0, classes - 1);

  for (int j = 0; j < classes; ++j) inst.covariances.push_back(random_psd(rng, dim));
  switch (mode) {
    case CovarianceMode::Diagonal:
      for (auto& cov : inst.covariances) {
        cov = Matrix(cov.diagonal().asDiagonal());
      }
      break;
    case CovarianceMode::Identity:
      for (auto& cov : inst.covariances) cov = Matrix::Identity(dim, dim);
      break;
    case CovarianceMode::SingleGlobal:
      for (auto& cov : inst.covariances) cov = inst.covariances.front();
      break;
    default:
      break;
  }
  return inst;
}

Scalar scaled_rel_error(Scalar a, Scalar b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

std::vector<BoundTrial> run_bound_trials(int trials, std::uint64_t seed,
                                         long long mc_samples) {
  static constexpr Scalar kLambdas[] = {0.1, 0.5, 1.0, 5.0};
  std::vector<BoundTrial> results;
  for (int t = 0; t < trials; ++t) {
    BoundTrial trial;
    trial.trial = t;
    trial.seed = derive_seed(seed, static_cast<std::uint64_t>(t));
    trial.lambda = kLambdas[t % 4];
    const LossInstance inst = make_loss_instance(trial.seed, 8, 5, 5, trial.lambda,
                                                 CovarianceMode::Full);
    const OracleReport report =
        mc_expected_loss(inst.head, inst.batch, inst.lambda, inst.covariances,
                         mc_samples, derive_seed(trial.seed, 0x6d63));
    trial.closed_form = report.closed_form;
    trial.mc_estimate = report.mc_estimate;
    trial.mc_standard_error = report.mc_standard_error;
    trial.ok =
        report.closed_form >= report.mc_estimate - 3.0 * report.mc_standard_error;
    results.push_back(trial);
  }
  return results;
}

namespace {

Scalar max_grad_error(const LossResult& analytic, const LossResult& fd) {
  Scalar worst = 0.0;
  for (Eigen::Index r = 0; r < analytic.grad_weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < analytic.grad_weights.cols(); ++c) {
      worst = std::max(worst,
                       scaled_rel_error(analytic.grad_weights(r, c), fd.grad_weights(r, c)));
    }
  }
  for (Eigen::Index j = 0; j < analytic.grad_bias.size(); ++j) {
    worst = std::max(worst, scaled_rel_error(analytic.grad_bias(j), fd.grad_bias(j)));
  }
  for (Eigen::Index r = 0; r < analytic.grad_features.rows(); ++r) {
    for (Eigen::Index c = 0; c < analytic.grad_features.cols(); ++c) {
      worst = std::max(worst, scaled_rel_error(analytic.grad_features(r, c),
                                               fd.grad_features(r, c)));
    }
  }
  return worst;
}

// End-to-end check: raw inputs -> MLP -> robust loss, analytic chain vs
// central differences over every network parameter. Instances whose
// pre-activations sit within 1e-3 of a rectifier kink are re-drawn; the
// one-sided slopes there make the FD reference itself invalid.
Scalar end_to_end_fd_error(std::uint64_t seed, Scalar h) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    std::mt19937_64 rng(derive_seed(seed, attempt));
    std::normal_distribution<Scalar> normal(0.0, 1.0);

    const int d_in = uniform_int(rng, 2, 4);
    const int hidden = uniform_int(rng, 3, 6);
    const int feat = uniform_int(rng, 2, 4);
    const int classes = uniform_int(rng, 2, 4);
    const int batch = uniform_int(rng, 2, 5);
    const Scalar lambda = 0.5 + 0.5 * std::abs(normal(rng));

    MlpNetwork net = init_network({d_in, hidden, feat}, rng());
    ClassifierHead head = init_head(classes, feat, rng());
    Matrix inputs(batch, d_in);
    for (int r = 0; r < batch; ++r) {
      for (int c = 0; c < d_in; ++c) inputs(r, c) = normal(rng);
    }
    IntVector labels(batch);
    for (int r = 0; r < batch; ++r) labels(r) = uniform_int(rng, 0, classes - 1);
    std::vector<Matrix> covariances;
    for (int j = 0; j < classes; ++j) covariances.push_back(random_psd(rng, feat));

    const ModelForward fwd = forward(net, inputs);
    if (fwd.trace.pre_activations.front().cwiseAbs().minCoeff() < 1e-3) continue;

    const FeatureBatch fb{fwd.features, labels};
    const LossResult loss = isda_loss_backward(head, fb, lambda, covariances);
    const MlpGradients analytic = backward(net, fwd.trace, loss.grad_features);

    const auto loss_at = [&](const MlpNetwork& probe) {
      const ModelForward f = forward(probe, inputs);
      return isda_loss_forward(head, {f.features, labels}, lambda, covariances);
    };

    Scalar worst = 0.0;
    MlpNetwork probe = net;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r) {
        for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c) {
          probe.weights[l](r, c) = net.weights[l](r, c) + h;
          const Scalar up = loss_at(probe);
          probe.weights[l](r, c) = net.weights[l](r, c) - h;
          const Scalar down = loss_at(probe);
          probe.weights[l](r, c) = net.weights[l](r, c);
          worst = std::max(worst, scaled_rel_error(analytic.weights[l](r, c),
                                                   (up - down) / (2.0 * h)));
        }
      }
      for (Eigen::Index j = 0; j < net.biases[l].size(); ++j) {
        probe.biases[l](j) = net.biases[l](j) + h;
        const Scalar up = loss_at(probe);
        probe.biases[l](j) = net.biases[l](j) - h;
        const Scalar down = loss_at(probe);
        probe.biases[l](j) = net.biases[l](j);
        worst = std::max(worst, scaled_rel_error(analytic.biases[l](j),
                                                 (up - down) / (2.0 * h)));
      }
    }
    return worst;
  }
}

}  // namespace

std::vector<GradientTrial> run_gradient_trials(int trials, std::uint64_t seed,
                                               Scalar h, Scalar tol) {
  static constexpr Scalar kLambdas[] = {0.0, 0.1, 0.5, 1.0, 5.0};
  static constexpr CovarianceMode kModes[] = {
      CovarianceMode::Full, CovarianceMode::Diagonal, CovarianceMode::Identity,
      CovarianceMode::SingleGlobal};

  std::vector<GradientTrial> results;
  for (int t = 0; t < trials; ++t) {
    GradientTrial trial;
    trial.trial = t;
    trial.seed = derive_seed(seed, 0x67000000ULL + static_cast<std::uint64_t>(t));
    trial.end_to_end = t % 5 == 4;
    if (trial.end_to_end) {
      trial.max_rel_error = end_to_end_fd_error(trial.seed, h);
    } else {
      const LossInstance inst =
          make_loss_instance(trial.seed, 16, 8, 6, kLambdas[t % 5], kModes[t % 4]);
      const LossResult analytic = isda_loss_backward(
          inst.head, inst.batch, inst.lambda, inst.covariances, inst.mode);
      const LossResult fd = finite_difference_gradients(
          inst.head, inst.batch, inst.lambda, inst.covariances, h, inst.mode);
      trial.max_rel_error = max_grad_error(analytic, fd);
    }
    trial.ok = trial.max_rel_error <= tol;
    results.push_back(trial);
  }
  return results;
}

std::vector<CovarianceTrial> run_covariance_trials(int trials, std::uint64_t seed,
                                                   Scalar tol) {
  std::vector<CovarianceTrial> results;
  for (int t = 0; t < trials; ++t) {
    CovarianceTrial trial;
    trial.trial = t;
    trial.seed = derive_seed(seed, 0x63000000ULL + static_cast<std::uint64_t>(t));
    std::mt19937_64 rng(trial.seed);
    std::normal_distribution<Scalar> normal(0.0, 2.0);

    const int dim = uniform_int(rng, 1, 32);
    const int batches = uniform_int(rng, 3, 12);

    auto stats = make_class_statistics(1, dim);
    std::vector<Vector> all_samples;
    for (int b = 0; b < batches; ++b) {
      const int count = uniform_int(rng, 0, 60);
      FeatureBatch batch;
      batch.features = Matrix(count, dim);
      batch.labels = IntVector::Zero(count);
      for (int r = 0; r < count; ++r) {
        for (int c = 0; c < dim; ++c) batch.features(r, c) = normal(rng);
        all_samples.push_back(batch.features.row(r).transpose());
      }
      const BatchMoments moments = batch_moments(batch, 0);
      stats[0] = merge_statistics(stats[0], moments.count, moments.mean, moments.cov);
      trial.samples += moments.count;
    }

    if (all_samples.empty()) {
      trial.rel_frobenius_error = stats[0].count == 0 ? 0.0 : 1.0;
      trial.ok = trial.rel_frobenius_error <= tol;
      results.push_back(trial);
      continue;
    }

    // One-shot population moments, recomputed from scratch.
    Vector mean = Vector::Zero(dim);
    for (const auto& x : all_samples) mean += x;
    mean /= static_cast<Scalar>(all_samples.size());
    Matrix cov = Matrix::Zero(dim, dim);
    for (const auto& x : all_samples) {
      const Vector d = x - mean;
      for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) cov(r, c) += d(r) * d(c);
      }
    }
    cov /= static_cast<Scalar>(all_samples.size());

    const Scalar mean_err =
        (stats[0].mean - mean).norm() / std::max(1.0, mean.norm());
    const Scalar cov_err = (stats[0].cov - cov).norm() / std::max(1.0, cov.norm());
    trial.rel_frobenius_error = std::max(mean_err, cov_err);
    trial.ok = trial.rel_frobenius_error <= tol &&
               stats[0].count == static_cast<long long>(all_samples.size());
    results.push_back(trial);
  }
  return results;
}

std::vector<MonotonicityTrial> run_monotonicity_trials(int trials, std::uint64_t seed) {
  static constexpr Scalar kGrid[] = {0.0, 1e-3, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
  std::vector<MonotonicityTrial> results;
  for (int t = 0; t < trials; ++t) {
    MonotonicityTrial trial;
    trial.trial = t;
    trial.seed = derive_seed(seed, 0x6d000000ULL + static_cast<std::uint64_t>(t));
    const LossInstance inst =
        make_loss_instance(trial.seed, 8, 5, 5, 0.0, CovarianceMode::Full);
    const Scalar ce = ce_loss_forward(inst.head, inst.batch);

    trial.dominates_ce = true;
    trial.non_decreasing = true;
    Scalar previous = -std::numeric_limits<Scalar>::infinity();
    for (Scalar lambda : kGrid) {
      const Scalar value =
          isda_loss_forward(inst.head, inst.batch, lambda, inst.covariances);
      if (value < ce) trial.dominates_ce = false;
      if (value < previous) trial.non_decreasing = false;
      previous = value;
    }
    trial.ok = trial.dominates_ce && trial.non_decreasing;
    results.push_back(trial);
  }
  return results;
}

nlohmann::ordered_json VerifyOutcome::report() const {
  ordered_json doc;
  doc["suite"] = suite;
  doc["trials"] = trials;
  doc["passed"] = passed;

  if (!bound.empty()) {
    ordered_json rows = ordered_json::array();
    Scalar min_margin = std::numeric_limits<Scalar>::infinity();
    for (const auto& t : bound) {
      rows.push_back({{"trial", t.trial},
                      {"seed", t.seed},
                      {"lambda", t.lambda},
                      {"closed_form", t.closed_form},
                      {"mc_estimate", t.mc_estimate},
                      {"mc_standard_error", t.mc_standard_error},
                      {"gap", t.closed_form - t.mc_estimate},
                      {"ok", t.ok}});
      min_margin = std::min(min_margin,
                            t.closed_form - (t.mc_estimate - 3.0 * t.mc_standard_error));
    }
    doc["bound"] = {{"trials", rows}, {"min_margin", min_margin}};
  }
  if (!gradients.empty()) {
    ordered_json rows = ordered_json::array();
    Scalar worst = 0.0;
    for (const auto& t : gradients) {
      rows.push_back({{"trial", t.trial},
                      {"seed", t.seed},
                      {"end_to_end", t.end_to_end},
                      {"max_rel_error", t.max_rel_error},
                      {"ok", t.ok}});
      worst = std::max(worst, t.max_rel_error);
    }
    doc["gradients"] = {{"trials", rows}, {"max_gradient_rel_error", worst}};
  }
  if (!covariance.empty()) {
    ordered_json rows = ordered_json::array();
    Scalar worst = 0.0;
    for (const auto& t : covariance) {
      rows.push_back({{"trial", t.trial},
                      {"seed", t.seed},
                      {"samples", t.samples},
                      {"rel_frobenius_error", t.rel_frobenius_error},
                      {"ok", t.ok}});
      worst = std::max(worst, t.rel_frobenius_error);
    }
    doc["covariance"] = {{"trials", rows}, {"max_covariance_rel_error", worst}};
  }
  return doc;
}

VerifyOutcome run_verification(const VerifyOptions& options) {
  require(options.trials >= 0, "verify: trials must be non-negative");
  VerifyOutcome outcome;
  outcome.suite = options.suite;
  outcome.trials = options.trials;

  const bool all = options.suite == "all";
  require(all || options.suite == "bound" || options.suite == "gradients" ||
              options.suite == "covariance",
          "verify: unknown suite '" + options.suite + "'");

  if (all || options.suite == "bound") {
    outcome.bound = run_bound_trials(options.trials, options.seed, options.mc_samples);
  }
  if (all || options.suite == "gradients") {
    outcome.gradients = run_gradient_trials(options.trials, options.seed);
  }
  if (all || options.suite == "covariance") {
    outcome.covariance = run_covariance_trials(options.trials, options.seed);
  }

  outcome.passed = true;
  for (const auto& t : outcome.bound) outcome.passed &= t.ok;
  for (const auto& t : outcome.gradients) outcome.passed &= t.ok;
  for (const auto& t : outcome.covariance) outcome.passed &= t.ok;
  return outcome;
}

}  // namespace isda

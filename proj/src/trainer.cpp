#include "isda/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <thread>

namespace isda {
namespace {

void check_optimizer(const OptimizerConfig& opt) {
  require(opt.learning_rate >= 0.0, "train: learning rate must be non-negative");
  require(opt.momentum >= 0.0 && opt.momentum < 1.0, "train: momentum must be in [0,1)");
  require(opt.weight_decay >= 0.0, "train: weight decay must be non-negative");
  require(opt.epochs >= 1, "train: need at least one epoch");
  require(opt.batch_size >= 1, "train: need positive batch size");
  for (std::size_t i = 0; i < opt.lr_drops.size(); ++i) {
    const auto& drop = opt.lr_drops[i];
    require(drop.multiplier > 0.0 && drop.multiplier <= 1.0,
            "train: lr multiplier must be in (0,1]");
    require(drop.epoch >= 1, "train: lr drop epoch must be >= 1");
    if (i > 0) {
      require(opt.lr_drops[i - 1].epoch < drop.epoch, "train: lr drops must be sorted");
    }
  }
}

struct SgdState {
  std::vector<Matrix> w_velocity;
  std::vector<Vector> b_velocity;
  Matrix head_w_velocity;
  Vector head_b_velocity;
};

// v <- momentum*v - lr*(g + wd*theta); theta <- theta + v. The Nesterov
// variant applies theta <- theta + momentum*v - lr*(g + wd*theta) with the
// updated velocity.
template <typename Param, typename Grad>
void sgd_update(Param& theta, Param& velocity, const Grad& grad,
                const OptimizerConfig& opt, double lr) {
  const Param total = grad + opt.weight_decay * theta;
  velocity = opt.momentum * velocity - lr * total;
  if (opt.nesterov) {
    theta += opt.momentum * velocity - lr * total;
  } else {
    theta += velocity;
  }
}

std::vector<long long> class_counts(const Dataset& d) {
  std::vector<long long> counts(static_cast<std::size_t>(d.meta.classes), 0);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    ++counts[static_cast<std::size_t>(d.labels(i))];
  }
  return counts;
}

}  // namespace

TrainResult train(MlpNetwork net, ClassifierHead head, const DataSplits& splits,
                  const OptimizerConfig& optimizer, IsdaConfig isda, LossPath path,
                  const EpochHook& hook) {
  check_optimizer(optimizer);
  const Dataset& data = splits.train;
  require(data.size() > 0, "train: empty training set");
  require(data.meta.classes == head.classes(), "train: class count mismatch");
  require(data.meta.input_dim == net.input_dim(), "train: input dim mismatch");
  require(net.feature_dim() == head.feature_dim(), "train: feature dim mismatch");
  for (long long c : class_counts(data)) {
    require(c >= 1, "train: every class needs at least one training sample");
  }

  const Eigen::Index n = data.size();
  const long long steps_per_epoch =
      (n + optimizer.batch_size - 1) / optimizer.batch_size;
  isda.total_steps = isda.ramp_unit == RampUnit::Epoch
                         ? optimizer.epochs
                         : steps_per_epoch * optimizer.epochs;

  const int classes = head.classes();
  const Eigen::Index feat_dim = net.feature_dim();
  auto stats = make_class_statistics(classes, feat_dim);

  SgdState sgd;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    sgd.w_velocity.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
    sgd.b_velocity.push_back(Vector::Zero(net.biases[l].size()));
  }
  sgd.head_w_velocity = Matrix::Zero(head.weights.rows(), head.weights.cols());
  sgd.head_b_velocity = Vector::Zero(head.bias.size());

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  TrainingMetrics metrics;
  double lr = optimizer.learning_rate;
  long long global_step = 0;
  std::vector<Matrix> covariances(static_cast<std::size_t>(classes));

  for (int epoch = 1; epoch <= optimizer.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    for (const auto& drop : optimizer.lr_drops) {
      if (drop.epoch == epoch) lr *= drop.multiplier;
    }

    std::mt19937_64 shuffle_rng(
        derive_seed(optimizer.shuffle_seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    long long correct = 0;
    double lambda = 0.0;

    for (Eigen::Index begin = 0; begin < n; begin += optimizer.batch_size) {
      const Eigen::Index count = std::min<Eigen::Index>(optimizer.batch_size, n - begin);
      ++global_step;

      FeatureBatch batch;
      Matrix inputs(count, data.inputs.cols());
      batch.labels.resize(count);
      for (Eigen::Index k = 0; k < count; ++k) {
        inputs.row(k) = data.inputs.row(order[static_cast<std::size_t>(begin + k)]);
        batch.labels(k) = data.labels(order[static_cast<std::size_t>(begin + k)]);
      }

      ModelForward fwd = forward(net, inputs);
      batch.features = fwd.features;

      LossResult loss;
      if (path == LossPath::Isda) {
        // Algorithm order: statistics first, then the loss at this step's lambda.
        for (int j = 0; j < classes; ++j) {
          const BatchMoments moments = batch_moments(batch, j);
          if (moments.count > 0) {
            stats[static_cast<std::size_t>(j)] = merge_statistics(
                stats[static_cast<std::size_t>(j)], moments.count, moments.mean,
                moments.cov);
          }
        }
        lambda = lambda_at(
            isda, isda.ramp_unit == RampUnit::Epoch ? epoch : global_step);
        if (isda.covariance_mode == CovarianceMode::SingleGlobal) {
          const Matrix pooled =
              snapshot_covariance(stats, CovarianceMode::SingleGlobal, 0);
          for (auto& cov : covariances) cov = pooled;
        } else {
          for (int j = 0; j < classes; ++j) {
            covariances[static_cast<std::size_t>(j)] =
                snapshot_covariance(stats, isda.covariance_mode, j);
          }
        }
        loss = isda_loss_backward(head, batch, lambda, covariances,
                                  isda.covariance_mode);
      } else {
        loss = ce_loss_backward(head, batch);
      }

      if (!std::isfinite(loss.loss)) {
        throw DivergenceError("train: non-finite loss at step " +
                                  std::to_string(global_step) + " (epoch " +
                                  std::to_string(epoch) + ")",
                              global_step);
      }

      // Pre-update training accuracy from the plain logits.
      Matrix plain = batch.features * head.weights.transpose();
      plain.rowwise() += head.bias.transpose();
      for (Eigen::Index k = 0; k < count; ++k) {
        Eigen::Index pred = 0;
        plain.row(k).maxCoeff(&pred);
        if (pred == batch.labels(k)) ++correct;
      }
      loss_sum += loss.loss;

      const MlpGradients net_grads = backward(net, fwd.trace, loss.grad_features);
      for (std::size_t l = 0; l < net.layer_count(); ++l) {
        sgd_update(net.weights[l], sgd.w_velocity[l], net_grads.weights[l], optimizer, lr);
        sgd_update(net.biases[l], sgd.b_velocity[l], net_grads.biases[l], optimizer, lr);
      }
      sgd_update(head.weights, sgd.head_w_velocity, loss.grad_weights, optimizer, lr);
      sgd_update(head.bias, sgd.head_b_velocity, loss.grad_bias, optimizer, lr);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
    record.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    record.lambda = lambda;
    if (splits.validation.has_value()) {
      record.val_error = evaluate(net, head, *splits.validation).error_rate;
    }
    if (splits.test.has_value()) {
      record.test_error = evaluate(net, head, *splits.test).error_rate;
      if (!splits.validation.has_value()) record.val_error = record.test_error;
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start)
            .count();
    metrics.epochs.push_back(record);
    if (hook) hook(record, net, head, stats);
  }

  return {std::move(net), std::move(head), std::move(stats), std::move(metrics)};
}

Evaluation evaluate(const MlpNetwork& net, const ClassifierHead& head,
                    const Dataset& dataset) {
  require(dataset.size() > 0, "evaluate: empty dataset");

  long long wrong = 0;
  double loss_sum = 0.0;
  const Eigen::Index chunk = 1024;
  for (Eigen::Index begin = 0; begin < dataset.size(); begin += chunk) {
    const Eigen::Index count = std::min(chunk, dataset.size() - begin);
    const ModelForward fwd = forward(net, dataset.inputs.middleRows(begin, count));
    FeatureBatch fb{fwd.features, dataset.labels.segment(begin, count)};
    Matrix logits = fb.features * head.weights.transpose();
    logits.rowwise() += head.bias.transpose();
    for (Eigen::Index k = 0; k < count; ++k) {
      Eigen::Index pred = 0;
      logits.row(k).maxCoeff(&pred);
      if (pred != fb.labels(k)) ++wrong;
    }
    loss_sum += ce_loss_forward(head, fb) * static_cast<double>(count);
  }
  return {static_cast<double>(wrong) / static_cast<double>(dataset.size()),
          loss_sum / static_cast<double>(dataset.size())};
}

int thread_cap() {
  if (const char* env = std::getenv("ISDA_THREADS")) {
    const int parsed = std::atoi(env);
    if (parsed >= 1) return parsed;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

SweepResult sweep_lambda(const std::vector<int>& layer_sizes, const DataSplits& splits,
                         const OptimizerConfig& optimizer, const IsdaConfig& isda_base,
                         const std::vector<double>& candidates,
                         const std::vector<std::uint64_t>& seeds) {
  require(!candidates.empty(), "sweep_lambda: need at least one candidate");
  require(!seeds.empty(), "sweep_lambda: need at least one seed");
  require(splits.validation.has_value() || splits.test.has_value(),
          "sweep_lambda: need a validation or test split");

  struct Run {
    std::size_t row;
    std::uint64_t seed;
    double val_error = 0.0;
    std::exception_ptr failure;
  };
  std::vector<Run> runs;
  for (std::size_t r = 0; r < candidates.size(); ++r) {
    for (std::uint64_t seed : seeds) runs.push_back({r, seed});
  }

  const auto execute = [&](Run& run) {
    try {
      IsdaConfig isda = isda_base;
      isda.lambda0 = candidates[run.row];
      MlpNetwork net = init_network(layer_sizes, derive_seed(run.seed, 0x6e65));
      ClassifierHead head = init_head(splits.train.meta.classes, net.feature_dim(),
                                      derive_seed(run.seed, 0x6865));
      OptimizerConfig opt = optimizer;
      opt.shuffle_seed = derive_seed(run.seed, 0x7368);
      const TrainResult result = train(std::move(net), std::move(head), splits, opt, isda);
      run.val_error = result.metrics.epochs.back().val_error;
    } catch (...) {
      run.failure = std::current_exception();
    }
  };

  const int workers = std::min<int>(thread_cap(), static_cast<int>(runs.size()));
  if (workers <= 1) {
    for (auto& run : runs) execute(run);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const std::size_t idx = next.fetch_add(1);
          if (idx >= runs.size()) return;
          execute(runs[idx]);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& run : runs) {
    if (run.failure) std::rethrow_exception(run.failure);
  }

  SweepResult result;
  for (std::size_t r = 0; r < candidates.size(); ++r) {
    std::vector<double> errors;
    for (const auto& run : runs) {
      if (run.row == r) errors.push_back(run.val_error);
    }
    SweepRow row;
    row.lambda0 = candidates[r];
    row.runs = static_cast<int>(errors.size());
    row.mean_val_error =
        std::accumulate(errors.begin(), errors.end(), 0.0) / errors.size();
    if (errors.size() > 1) {
      double sq = 0.0;
      for (double e : errors) sq += (e - row.mean_val_error) * (e - row.mean_val_error);
      row.std_val_error = std::sqrt(sq / static_cast<double>(errors.size() - 1));
    }
    result.rows.push_back(row);
  }

  std::size_t best = 0;
  for (std::size_t r = 1; r < result.rows.size(); ++r) {
    const bool better = result.rows[r].mean_val_error < result.rows[best].mean_val_error;
    const bool tie_smaller =
        result.rows[r].mean_val_error == result.rows[best].mean_val_error &&
        result.rows[r].lambda0 < result.rows[best].lambda0;
    if (better || tie_smaller) best = r;
  }
  result.selected_lambda0 = result.rows[best].lambda0;
  return result;
}

}  // namespace isda

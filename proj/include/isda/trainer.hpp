#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "isda/class_stats.hpp"
#include "isda/data.hpp"
#include "isda/loss.hpp"
#include "isda/model.hpp"

namespace isda {

struct LrDrop {
  int epoch = 0;        // 1-based; applied at the start of this epoch
  double multiplier = 0.1;
};

struct OptimizerConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  bool nesterov = true;
  std::vector<LrDrop> lr_drops;
  int epochs = 1;
  int batch_size = 128;
  std::uint64_t shuffle_seed = 0;
};

/// Which loss drives the updates. PlainCe is the reference path the
/// lambda0 == 0 run must match bit for bit.
enum class LossPath { Isda, PlainCe };

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_error = 0.0;
  double lambda = 0.0;
  double seconds = 0.0;
  double test_error = std::numeric_limits<double>::quiet_NaN();  // not in the CSV
};

struct TrainingMetrics {
  std::vector<EpochRecord> epochs;
};

struct DataSplits {
  Dataset train;
  std::optional<Dataset> validation;
  std::optional<Dataset> test;
};

struct TrainResult {
  MlpNetwork net;
  ClassifierHead head;
  std::vector<ClassStatistics> stats;
  TrainingMetrics metrics;
};

using EpochHook =
    std::function<void(const EpochRecord&, const MlpNetwork&, const ClassifierHead&,
                       const std::vector<ClassStatistics>&)>;

/// Runs the full training loop: per step, sample a mini-batch, compute
/// features, fold the batch moments into the running class statistics,
/// evaluate the robust loss at the current lambda, backprop, and apply the
/// SGD update v <- momentum*v - lr*(g + wd*theta), theta <- theta + v
/// (Nesterov variant adds the lookahead term). isda.total_steps is filled
/// in from the ramp unit; a non-finite loss aborts with DivergenceError.
TrainResult train(MlpNetwork net, ClassifierHead head, const DataSplits& splits,
                  const OptimizerConfig& optimizer, IsdaConfig isda,
                  LossPath path = LossPath::Isda, const EpochHook& hook = {});

struct Evaluation {
  double error_rate = 0.0;
  double mean_loss = 0.0;
};

/// Plain-logit argmax error (ties break to the lowest class index) and
/// mean CE loss; the augmentation term plays no role at evaluation time.
Evaluation evaluate(const MlpNetwork& net, const ClassifierHead& head,
                    const Dataset& dataset);

struct SweepRow {
  double lambda0 = 0.0;
  double mean_val_error = 0.0;
  double std_val_error = 0.0;
  int runs = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double selected_lambda0 = 0.0;
};

/// One training run per (candidate lambda0, seed); rows report mean and
/// sample std of the final validation error. Selects the argmin mean,
/// ties toward the smaller lambda0. Runs execute in parallel up to the
/// ISDA_THREADS cap without affecting results.
SweepResult sweep_lambda(const std::vector<int>& layer_sizes, const DataSplits& splits,
                         const OptimizerConfig& optimizer, const IsdaConfig& isda_base,
                         const std::vector<double>& candidates,
                         const std::vector<std::uint64_t>& seeds);

/// ISDA_THREADS env var, defaulting to the hardware concurrency.
int thread_cap();

}  // namespace isda

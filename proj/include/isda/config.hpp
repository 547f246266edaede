#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "isda/data.hpp"
#include "isda/loss.hpp"
#include "isda/trainer.hpp"

namespace isda {

struct DataConfig {
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::string> csv_path;   // resolved against the config file dir
  std::optional<double> validation_fraction;
  std::uint64_t seed = 1;
};

struct OutputConfig {
  std::string directory = "out";
  int checkpoint_interval = 0;  // epochs between checkpoints; 0 = final only
  bool fixed_order_reduction = true;
};

struct ExperimentConfig {
  DataConfig data;
  std::vector<int> model_layers;
  OptimizerConfig optimizer;
  IsdaConfig isda;
  OutputConfig output;
  std::uint64_t hash = 0;  // FNV-1a of the canonical JSON form
};

/// Parses and validates a config document. Unknown keys are errors at
/// every level; referenced files must exist. Throws ParseError.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const nlohmann::json& doc,
                                         const std::string& base_dir);

/// Assembles the splits a config describes: synthetic train/test plus an
/// optional stratified validation carve-out, or a CSV with an optional
/// validation split.
DataSplits build_splits(const DataConfig& data);

const char* to_string(CovarianceMode mode);
const char* to_string(LambdaSchedule schedule);
const char* to_string(RampUnit unit);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace isda

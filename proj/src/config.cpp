#include "isda/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace isda {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& context) {
  if (!obj.is_object()) {
    throw ParseError("config: '" + context + "' must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) {
      throw ParseError("config: unknown key '" + key + "' in " + context);
    }
  }
}

template <typename T>
T get_required(const json& obj, const std::string& key, const std::string& context) {
  if (!obj.contains(key)) {
    throw ParseError("config: missing key '" + key + "' in " + context);
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError("config: bad value for '" + key + "' in " + context + ": " +
                     e.what());
  }
}

template <typename T>
T get_optional(const json& obj, const std::string& key, const std::string& context,
               T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError("config: bad value for '" + key + "' in " + context + ": " +
                     e.what());
  }
}

SyntheticSpec parse_synthetic(const json& obj) {
  check_keys(obj,
             {"name", "classes", "input_dim", "means", "covariances",
              "train_per_class", "test_per_class"},
             "data.synthetic");
  SyntheticSpec spec;
  spec.name = get_optional<std::string>(obj, "name", "data.synthetic", "synthetic");
  spec.classes = get_required<int>(obj, "classes", "data.synthetic");
  spec.input_dim = get_required<int>(obj, "input_dim", "data.synthetic");
  spec.train_per_class = get_required<int>(obj, "train_per_class", "data.synthetic");
  spec.test_per_class = get_required<int>(obj, "test_per_class", "data.synthetic");

  const auto means = get_required<std::vector<std::vector<double>>>(obj, "means",
                                                                    "data.synthetic");
  for (const auto& m : means) {
    spec.means.push_back(Eigen::Map<const Vector>(m.data(),
                                                  static_cast<Eigen::Index>(m.size())));
  }
  const auto covs = get_required<std::vector<std::vector<std::vector<double>>>>(
      obj, "covariances", "data.synthetic");
  for (const auto& rows : covs) {
    Matrix cov(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != static_cast<std::size_t>(cov.cols())) {
        throw ParseError("config: ragged covariance matrix in data.synthetic");
      }
      cov.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Vector>(
          rows[r].data(), static_cast<Eigen::Index>(rows[r].size()));
    }
    spec.covariances.push_back(cov);
  }
  return spec;
}

CovarianceMode parse_covariance_mode(const std::string& text) {
  if (text == "full") return CovarianceMode::Full;
  if (text == "diagonal") return CovarianceMode::Diagonal;
  if (text == "identity") return CovarianceMode::Identity;
  if (text == "single_global") return CovarianceMode::SingleGlobal;
  throw ParseError("config: unknown covariance_mode '" + text + "'");
}

LambdaSchedule parse_schedule(const std::string& text) {
  if (text == "linear_ramp") return LambdaSchedule::LinearRamp;
  if (text == "constant") return LambdaSchedule::Constant;
  throw ParseError("config: unknown schedule '" + text + "'");
}

RampUnit parse_ramp_unit(const std::string& text) {
  if (text == "step") return RampUnit::Step;
  if (text == "epoch") return RampUnit::Epoch;
  throw ParseError("config: unknown ramp_unit '" + text + "'");
}

}  // namespace

const char* to_string(CovarianceMode mode) {
  switch (mode) {
    case CovarianceMode::Full: return "full";
    case CovarianceMode::Diagonal: return "diagonal";
    case CovarianceMode::Identity: return "identity";
    case CovarianceMode::SingleGlobal: return "single_global";
  }
  return "unknown";
}

const char* to_string(LambdaSchedule schedule) {
  return schedule == LambdaSchedule::LinearRamp ? "linear_ramp" : "constant";
}

const char* to_string(RampUnit unit) {
  return unit == RampUnit::Step ? "step" : "epoch";
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

ExperimentConfig parse_experiment_config(const json& doc, const std::string& base_dir) {
  check_keys(doc, {"data", "model", "optimizer", "isda", "output"}, "config root");
  ExperimentConfig cfg;

  // data
  {
    const json& data = doc.contains("data") ? doc.at("data") : json::object();
    check_keys(data, {"synthetic", "csv", "validation_fraction", "seed"}, "data");
    if (data.contains("synthetic") == data.contains("csv")) {
      throw ParseError("config: data needs exactly one of 'synthetic' or 'csv'");
    }
    if (data.contains("synthetic")) {
      cfg.data.synthetic = parse_synthetic(data.at("synthetic"));
    } else {
      auto path = get_required<std::string>(data, "csv", "data");
      std::filesystem::path resolved(path);
      if (resolved.is_relative()) resolved = std::filesystem::path(base_dir) / resolved;
      if (!std::filesystem::exists(resolved)) {
        throw ParseError("config: csv file does not exist: " + resolved.string());
      }
      cfg.data.csv_path = resolved.string();
    }
    if (data.contains("validation_fraction")) {
      cfg.data.validation_fraction =
          get_required<double>(data, "validation_fraction", "data");
    }
    cfg.data.seed = get_optional<std::uint64_t>(data, "seed", "data", 1);
  }

  // model
  {
    const json& model = doc.contains("model") ? doc.at("model") : json::object();
    check_keys(model, {"layers"}, "model");
    cfg.model_layers = get_required<std::vector<int>>(model, "layers", "model");
    if (cfg.model_layers.size() < 2) {
      throw ParseError("config: model.layers needs at least [input_dim, feature_dim]");
    }
  }

  // optimizer
  {
    if (!doc.contains("optimizer")) throw ParseError("config: missing 'optimizer'");
    const json& opt = doc.at("optimizer");
    check_keys(opt,
               {"learning_rate", "momentum", "weight_decay", "nesterov", "epochs",
                "batch_size", "lr_drops", "shuffle_seed"},
               "optimizer");
    cfg.optimizer.learning_rate = get_required<double>(opt, "learning_rate", "optimizer");
    cfg.optimizer.momentum = get_optional<double>(opt, "momentum", "optimizer", 0.9);
    cfg.optimizer.weight_decay =
        get_optional<double>(opt, "weight_decay", "optimizer", 1e-4);
    cfg.optimizer.nesterov = get_optional<bool>(opt, "nesterov", "optimizer", true);
    cfg.optimizer.epochs = get_required<int>(opt, "epochs", "optimizer");
    cfg.optimizer.batch_size = get_required<int>(opt, "batch_size", "optimizer");
    cfg.optimizer.shuffle_seed =
        get_optional<std::uint64_t>(opt, "shuffle_seed", "optimizer", 0);
    if (opt.contains("lr_drops")) {
      const auto drops =
          get_required<std::vector<std::vector<double>>>(opt, "lr_drops", "optimizer");
      for (const auto& d : drops) {
        if (d.size() != 2) {
          throw ParseError("config: each lr_drop must be [epoch, multiplier]");
        }
        cfg.optimizer.lr_drops.push_back(
            {static_cast<int>(d[0]), d[1]});
      }
    }
  }

  // isda
  {
    if (!doc.contains("isda")) throw ParseError("config: missing 'isda'");
    const json& isda = doc.at("isda");
    check_keys(isda, {"lambda0", "schedule", "covariance_mode", "ramp_unit"}, "isda");
    cfg.isda.lambda0 = get_required<double>(isda, "lambda0", "isda");
    if (cfg.isda.lambda0 < 0.0) throw ParseError("config: lambda0 must be >= 0");
    cfg.isda.schedule = parse_schedule(
        get_optional<std::string>(isda, "schedule", "isda", "linear_ramp"));
    cfg.isda.covariance_mode = parse_covariance_mode(
        get_optional<std::string>(isda, "covariance_mode", "isda", "full"));
    cfg.isda.ramp_unit =
        parse_ramp_unit(get_optional<std::string>(isda, "ramp_unit", "isda", "step"));
  }

  // output
  if (doc.contains("output")) {
    const json& output = doc.at("output");
    check_keys(output, {"directory", "checkpoint_interval", "fixed_order_reduction"},
               "output");
    cfg.output.directory =
        get_optional<std::string>(output, "directory", "output", "out");
    cfg.output.checkpoint_interval =
        get_optional<int>(output, "checkpoint_interval", "output", 0);
    cfg.output.fixed_order_reduction =
        get_optional<bool>(output, "fixed_order_reduction", "output", true);
  }

  cfg.hash = fnv1a64(doc.dump());
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("config: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("config: " + path + ": " + e.what());
  }
  const std::string base = std::filesystem::path(path).parent_path().string();
  return parse_experiment_config(doc, base.empty() ? "." : base);
}

DataSplits build_splits(const DataConfig& data) {
  DataSplits splits;
  if (data.synthetic.has_value()) {
    auto [train, test] = generate_synthetic(*data.synthetic, data.seed);
    if (data.validation_fraction.has_value()) {
      auto [tr, val] = split(train, *data.validation_fraction, derive_seed(data.seed, 0x73));
      splits.train = std::move(tr);
      splits.validation = std::move(val);
    } else {
      splits.train = std::move(train);
    }
    if (test.size() > 0) splits.test = std::move(test);
  } else {
    Dataset full = load_csv(*data.csv_path);
    if (data.validation_fraction.has_value()) {
      auto [tr, val] = split(full, *data.validation_fraction, derive_seed(data.seed, 0x73));
      splits.train = std::move(tr);
      splits.validation = std::move(val);
    } else {
      splits.train = std::move(full);
    }
  }
  return splits;
}

}  // namespace isda

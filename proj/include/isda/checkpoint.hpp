#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isda/class_stats.hpp"
#include "isda/loss.hpp"
#include "isda/model.hpp"

namespace isda {

/// On disk: one JSON header line (format version, config hash, step,
/// shapes, per-class counts, payload length), then a flat little-endian
/// f64 payload in a fixed order: each layer's weights row-major then its
/// bias, the head weights row-major then the head bias, then per class
/// the mean and the row-major covariance. Round-trips byte-identically.
struct Checkpoint {
  int format_version = 1;
  std::uint64_t config_hash = 0;
  long long step = 0;
  MlpNetwork net;
  ClassifierHead head;
  std::vector<ClassStatistics> stats;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace isda

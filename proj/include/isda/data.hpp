#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "isda/types.hpp"

namespace isda {

struct DatasetMeta {
  std::string name;
  int classes = 0;
  int input_dim = 0;
  std::uint64_t seed = 0;
};

struct Dataset {
  Matrix inputs;     // N x d_in
  IntVector labels;  // N, values in [0, classes)
  DatasetMeta meta;

  Eigen::Index size() const { return inputs.rows(); }
};

/// Class-conditional Gaussian mixture spec; the desk-scale stand-in for an
/// image benchmark, with controllable per-class covariance.
struct SyntheticSpec {
  std::string name = "synthetic";
  int classes = 0;
  int input_dim = 0;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
  int train_per_class = 0;
  int test_per_class = 0;
};

/// Draws disjoint train/test sets, one MVN stream per (class, role).
/// Deterministic given seed.
std::pair<Dataset, Dataset> generate_synthetic(const SyntheticSpec& spec,
                                               std::uint64_t seed);

/// CSV schema: header `feature_0,...,feature_{d-1},label`, `.` decimal
/// separator, shortest round-trip formatting. Class count is inferred as
/// max label + 1. Malformed rows raise ParseError naming the line.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& dataset, const std::string& path);

/// Stratified (train, validation) split: per-class counts within one
/// sample of proportional, deterministic given seed, disjoint and
/// exhaustive. Throws if any class would end up empty on either side.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double validation_fraction,
                                  std::uint64_t seed);

}  // namespace isda

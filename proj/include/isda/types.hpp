#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace isda {

/// Working scalar for the whole library. All public interfaces use
/// 64-bit reals; verification tolerances are calibrated for this.
using Scalar = double;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntVector = Eigen::VectorXi;

/// A mini-batch of deep features a_i (one row per sample) with labels.
struct FeatureBatch {
  Matrix features;    // N x A
  IntVector labels;   // N, values in [0, C)

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index feature_dim() const { return features.cols(); }
};

/// Violated precondition or shape mismatch.
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

/// Covariance could not be factorized even after the jitter ladder.
class DegenerateCovarianceError : public std::runtime_error {
 public:
  explicit DegenerateCovarianceError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed external input (CSV rows, config documents, checkpoints).
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long long step)
      : std::runtime_error(what), step(step) {}
  long long step;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

/// splitmix64 mix of (seed, stream); used to hand independent RNG streams
/// to samplers, per-class generators and per-draw MC workers.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace isda

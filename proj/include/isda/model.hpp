#pragma once

#include <cstdint>
#include <vector>

#include "isda/loss.hpp"
#include "isda/types.hpp"

namespace isda {

/// Feed-forward feature extractor: rectifier on hidden layers, identity on
/// the feature output layer. sizes = [d_in, h_1, ..., A]; zero hidden
/// layers (a plain linear map) is allowed.
struct MlpNetwork {
  std::vector<int> sizes;
  std::vector<Matrix> weights;  // layer l: sizes[l+1] x sizes[l]
  std::vector<Vector> biases;

  int input_dim() const { return sizes.front(); }
  int feature_dim() const { return sizes.back(); }
  std::size_t layer_count() const { return weights.size(); }
};

/// Per-layer pre-activations and activations kept for the backward pass.
struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre_activations;
  std::vector<Matrix> activations;
};

struct ModelForward {
  Matrix features;
  ForwardTrace trace;
};

struct MlpGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

/// Zero-mean normal weights with std 1 / sqrt(fan_in), zero biases.
/// Deterministic given seed.
MlpNetwork init_network(const std::vector<int>& sizes, std::uint64_t seed);

/// Same initialization for the final linear classifier.
ClassifierHead init_head(int classes, int feature_dim, std::uint64_t seed);

ModelForward forward(const MlpNetwork& net, const Eigen::Ref<const Matrix>& inputs);

/// Exact gradients of the scalar loss w.r.t. every parameter, given the
/// loss gradient w.r.t. the output features.
MlpGradients backward(const MlpNetwork& net, const ForwardTrace& trace,
                      const Eigen::Ref<const Matrix>& grad_features);

}  // namespace isda

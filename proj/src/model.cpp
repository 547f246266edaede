#include "isda/model.hpp"

#include <random>

namespace isda {
namespace {

Matrix scaled_normal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<Scalar> normal(0.0, 1.0);
  const Scalar scale = 1.0 / std::sqrt(static_cast<Scalar>(cols));
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * normal(rng);
  }
  return m;
}

}  // namespace

MlpNetwork init_network(const std::vector<int>& sizes, std::uint64_t seed) {
  require(sizes.size() >= 2, "init_network: need at least input and output sizes");
  for (int s : sizes) require(s >= 1, "init_network: non-positive layer size");

  MlpNetwork net;
  net.sizes = sizes;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    net.weights.push_back(scaled_normal(sizes[l + 1], sizes[l], derive_seed(seed, l)));
    net.biases.push_back(Vector::Zero(sizes[l + 1]));
  }
  return net;
}

ClassifierHead init_head(int classes, int feature_dim, std::uint64_t seed) {
  require(classes >= 2, "init_head: need at least two classes");
  require(feature_dim >= 1, "init_head: need positive feature dim");
  ClassifierHead head;
  head.weights = scaled_normal(classes, feature_dim, seed);
  head.bias = Vector::Zero(classes);
  return head;
}

ModelForward forward(const MlpNetwork& net, const Eigen::Ref<const Matrix>& inputs) {
  require(!net.weights.empty(), "forward: uninitialized network");
  require(inputs.cols() == net.input_dim(), "forward: input dim mismatch");
  require(inputs.allFinite(), "forward: non-finite inputs");

  ModelForward out;
  out.trace.input = inputs;
  Matrix act = inputs;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    Matrix pre = act * net.weights[l].transpose();
    pre.rowwise() += net.biases[l].transpose();
    out.trace.pre_activations.push_back(pre);
    act = (l + 1 == net.layer_count()) ? pre : pre.cwiseMax(0.0).eval();
    out.trace.activations.push_back(act);
  }
  out.features = act;
  return out;
}

MlpGradients backward(const MlpNetwork& net, const ForwardTrace& trace,
                      const Eigen::Ref<const Matrix>& grad_features) {
  const std::size_t layers = net.layer_count();
  require(trace.pre_activations.size() == layers && trace.activations.size() == layers,
          "backward: trace does not match network");
  require(grad_features.rows() == trace.input.rows() &&
              grad_features.cols() == net.feature_dim(),
          "backward: gradient shape mismatch");

  MlpGradients grads;
  grads.weights.resize(layers);
  grads.biases.resize(layers);

  Matrix delta = grad_features;
  for (std::size_t l = layers; l-- > 0;) {
    const Matrix& below = l == 0 ? trace.input : trace.activations[l - 1];
    grads.weights[l].noalias() = delta.transpose() * below;
    grads.biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      const auto mask = (trace.pre_activations[l - 1].array() > 0.0).cast<Scalar>();
      delta = ((delta * net.weights[l]).array() * mask).matrix();
    }
  }
  return grads;
}

}  // namespace isda

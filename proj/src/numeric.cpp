#include "isda/numeric.hpp"

#include <random>

namespace isda {

Scalar min_eigenvalue_bound(const Eigen::Ref<const Matrix>& m) {
  require(m.rows() == m.cols(), "min_eigenvalue_bound: matrix must be square");
  Scalar bound = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Scalar radius = m.row(i).cwiseAbs().sum() - std::abs(m(i, i));
    bound = std::min(bound, m(i, i) - radius);
  }
  return m.rows() == 0 ? 0.0 : bound;
}

void symmetrize_in_place(Matrix& m) {
  require(m.rows() == m.cols(), "symmetrize_in_place: matrix must be square");
  m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
}

Matrix psd_factor(const Eigen::Ref<const Matrix>& cov) {
  require(cov.rows() == cov.cols(), "psd_factor: matrix must be square");
  require(cov.allFinite(), "psd_factor: non-finite covariance");
  require((cov.array() == cov.transpose().array()).all(),
          "psd_factor: matrix must be symmetric");

  const Scalar trace = cov.trace();
  Scalar jitter = 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver;
  for (int attempt = 0; attempt < 4; ++attempt) {
    Matrix shifted = cov;
    shifted.diagonal().array() += jitter;
    solver.compute(shifted);
    if (solver.info() == Eigen::Success &&
        solver.eigenvalues().minCoeff() >= -psd_tolerance(shifted)) {
      const Vector clamped = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
      return solver.eigenvectors() * clamped.asDiagonal();
    }
    jitter = attempt == 0 ? 1e-10 * (1.0 + trace) : jitter * 10.0;
  }
  throw DegenerateCovarianceError(
      "psd_factor: covariance not PSD after 3 jittered attempts (min eigenvalue " +
      std::to_string(solver.eigenvalues().minCoeff()) + ")");
}

Matrix mvn_sample(const Eigen::Ref<const Vector>& mean,
                  const Eigen::Ref<const Matrix>& cov, Scalar scale,
                  std::uint64_t rng_seed, Eigen::Index count) {
  const Eigen::Index dim = mean.size();
  require(cov.rows() == dim && cov.cols() == dim, "mvn_sample: dimension mismatch");
  require(mean.allFinite(), "mvn_sample: non-finite mean");
  require(scale >= 0.0, "mvn_sample: scale must be non-negative");
  require(count >= 0, "mvn_sample: count must be non-negative");

  const Matrix transform = std::sqrt(scale) * psd_factor(cov);

  std::mt19937_64 rng(rng_seed);
  std::normal_distribution<Scalar> normal(0.0, 1.0);
  Matrix draws(count, dim);
  Vector z(dim);
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index k = 0; k < dim; ++k) z(k) = normal(rng);
    draws.row(i) = (mean + transform * z).transpose();
  }
  return draws;
}

}  // namespace isda

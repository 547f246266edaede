#pragma once

#include <cstdint>

#include "isda/types.hpp"

namespace isda {

/// Symmetry slack for PSD checks: 1e-9 * (1 + trace(M)).
template <typename Derived>
Scalar psd_tolerance(const Eigen::MatrixBase<Derived>& m) {
  return 1e-9 * (1.0 + m.trace());
}

/// v' M v for symmetric M. For PSD M the result is >= -psd_tolerance(M).
template <typename DerivedM, typename DerivedV>
Scalar quadratic_form(const Eigen::MatrixBase<DerivedM>& m,
                      const Eigen::MatrixBase<DerivedV>& v) {
  require(m.rows() == m.cols(), "quadratic_form: matrix must be square");
  require(m.rows() == v.size(), "quadratic_form: dimension mismatch");
  require(m.allFinite() && v.allFinite(), "quadratic_form: non-finite input");
  return v.derived().dot(m.derived() * v.derived());
}

/// u v'. Exactly symmetric when u == v (IEEE products commute).
template <typename DerivedU, typename DerivedV>
Matrix outer_product(const Eigen::MatrixBase<DerivedU>& u,
                     const Eigen::MatrixBase<DerivedV>& v) {
  require(u.size() == v.size(), "outer_product: dimension mismatch");
  require(u.allFinite() && v.allFinite(), "outer_product: non-finite input");
  return u.derived() * v.derived().transpose();
}

/// Gershgorin lower bound on the smallest eigenvalue of a symmetric matrix.
/// Diagnostic only; never tight on purpose.
Scalar min_eigenvalue_bound(const Eigen::Ref<const Matrix>& m);

/// Copies the lower triangle onto the upper one so that m(i,j) == m(j,i)
/// holds exactly.
void symmetrize_in_place(Matrix& m);

/// Factor B with B B' = cov (eigenvalues clamped at zero). Retries with a
/// growing diagonal jitter, starting at 1e-10 * (1 + trace), when the
/// eigensolver fails or reports an eigenvalue below -psd_tolerance(cov).
/// Throws DegenerateCovarianceError after three jittered attempts.
Matrix psd_factor(const Eigen::Ref<const Matrix>& cov);

/// `count` i.i.d. draws from N(mean, scale * cov), one draw per row.
/// Deterministic given rng_seed; scale == 0 reproduces the mean exactly,
/// and exactly-zero eigendirections stay pinned to the mean.
Matrix mvn_sample(const Eigen::Ref<const Vector>& mean,
                  const Eigen::Ref<const Matrix>& cov, Scalar scale,
                  std::uint64_t rng_seed, Eigen::Index count);

}  // namespace isda

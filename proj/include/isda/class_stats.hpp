#pragma once

#include <span>
#include <vector>

#include "isda/types.hpp"

namespace isda {

/// Which matrix feeds the quadratic term of the robust loss.
enum class CovarianceMode { Full, Diagonal, Identity, SingleGlobal };

/// Running per-class feature statistics. Population convention throughout:
/// cov is the divide-by-n second central moment, which is what makes the
/// streaming merge identity exact.
struct ClassStatistics {
  int class_id = 0;
  long long count = 0;
  Vector mean;
  Matrix cov;
};

/// Count, mean and population covariance of one class within a batch.
struct BatchMoments {
  long long count = 0;
  Vector mean;
  Matrix cov;
};

/// Zero-initialized statistics for `classes` classes of `dim`-dimensional
/// features.
std::vector<ClassStatistics> make_class_statistics(int classes, Eigen::Index dim);

/// Zeroes counts, means and covariances in place. Idempotent.
void reset(std::vector<ClassStatistics>& stats);

/// Population moments of the samples labelled `class_id`. An absent class
/// yields count 0 and zero moments; a single sample yields zero covariance.
BatchMoments batch_moments(const FeatureBatch& batch, int class_id);

/// Folds one batch worth of moments into the running statistics:
/// count-weighted mean and covariance merge with the n*m/(n+m)^2
/// cross-mean term. m == 0 returns the prior unchanged.
ClassStatistics merge_statistics(const ClassStatistics& prior, long long m,
                                 const Eigen::Ref<const Vector>& batch_mean,
                                 const Eigen::Ref<const Matrix>& batch_cov);

/// Covariance matrix handed to the loss for `class_id` under `mode`.
/// SingleGlobal pools every class with merge_statistics semantics and is
/// therefore the population covariance of all features seen so far.
Matrix snapshot_covariance(std::span<const ClassStatistics> stats,
                           CovarianceMode mode, int class_id);

}  // namespace isda

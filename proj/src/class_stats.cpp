#include "isda/class_stats.hpp"

#include "isda/numeric.hpp"

namespace isda {

std::vector<ClassStatistics> make_class_statistics(int classes, Eigen::Index dim) {
  require(classes >= 1, "make_class_statistics: need at least one class");
  require(dim >= 1, "make_class_statistics: need positive feature dim");
  std::vector<ClassStatistics> stats(static_cast<std::size_t>(classes));
  for (int j = 0; j < classes; ++j) {
    stats[j].class_id = j;
    stats[j].count = 0;
    stats[j].mean = Vector::Zero(dim);
    stats[j].cov = Matrix::Zero(dim, dim);
  }
  return stats;
}

void reset(std::vector<ClassStatistics>& stats) {
  for (auto& s : stats) {
    s.count = 0;
    s.mean.setZero();
    s.cov.setZero();
  }
}

BatchMoments batch_moments(const FeatureBatch& batch, int class_id) {
  const Eigen::Index dim = batch.feature_dim();
  require(batch.features.rows() == batch.labels.size(),
          "batch_moments: feature/label count mismatch");
  require(batch.features.allFinite(), "batch_moments: non-finite features");

  BatchMoments out;
  out.mean = Vector::Zero(dim);
  out.cov = Matrix::Zero(dim, dim);

  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < batch.size(); ++i) {
    if (batch.labels(i) == class_id) rows.push_back(i);
  }
  out.count = static_cast<long long>(rows.size());
  if (rows.empty()) return out;

  Matrix members(rows.size(), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    members.row(static_cast<Eigen::Index>(r)) = batch.features.row(rows[r]);
  }
  out.mean = members.colwise().mean().transpose();

  // Lower-triangle rank update, mirrored, keeps the covariance exactly
  // symmetric regardless of GEMM blocking.
  const Matrix centered = members.rowwise() - out.mean.transpose();
  out.cov.selfadjointView<Eigen::Lower>().rankUpdate(
      centered.transpose(), 1.0 / static_cast<Scalar>(rows.size()));
  symmetrize_in_place(out.cov);
  return out;
}

ClassStatistics merge_statistics(const ClassStatistics& prior, long long m,
                                 const Eigen::Ref<const Vector>& batch_mean,
                                 const Eigen::Ref<const Matrix>& batch_cov) {
  require(m >= 0, "merge_statistics: negative batch count");
  if (m == 0) return prior;

  const Eigen::Index dim = prior.mean.size();
  require(batch_mean.size() == dim && batch_cov.rows() == dim && batch_cov.cols() == dim,
          "merge_statistics: dimension mismatch");

  ClassStatistics merged;
  merged.class_id = prior.class_id;
  merged.count = prior.count + m;
  if (prior.count == 0) {
    merged.mean = batch_mean;
    merged.cov = batch_cov;
    return merged;
  }

  const Scalar n = static_cast<Scalar>(prior.count);
  const Scalar mm = static_cast<Scalar>(m);
  const Scalar total = n + mm;

  merged.mean = (n * prior.mean + mm * batch_mean) / total;

  const Vector delta = prior.mean - batch_mean;
  merged.cov = (n * prior.cov + mm * batch_cov) / total +
               (n * mm / (total * total)) * outer_product(delta, delta);
  symmetrize_in_place(merged.cov);
  return merged;
}

Matrix snapshot_covariance(std::span<const ClassStatistics> stats,
                           CovarianceMode mode, int class_id) {
  require(!stats.empty(), "snapshot_covariance: empty statistics");
  require(class_id >= 0 && class_id < static_cast<int>(stats.size()),
          "snapshot_covariance: class_id out of range");
  const Eigen::Index dim = stats[0].mean.size();

  switch (mode) {
    case CovarianceMode::Full:
      return stats[static_cast<std::size_t>(class_id)].cov;
    case CovarianceMode::Diagonal:
      return stats[static_cast<std::size_t>(class_id)].cov.diagonal().asDiagonal();
    case CovarianceMode::Identity:
      return Matrix::Identity(dim, dim);
    case CovarianceMode::SingleGlobal: {
      ClassStatistics pooled;
      pooled.class_id = -1;
      pooled.count = 0;
      pooled.mean = Vector::Zero(dim);
      pooled.cov = Matrix::Zero(dim, dim);
      for (const auto& s : stats) {
        pooled = merge_statistics(pooled, s.count, s.mean, s.cov);
      }
      return pooled.cov;
    }
  }
  throw ContractError("snapshot_covariance: unknown mode");
}

}  // namespace isda

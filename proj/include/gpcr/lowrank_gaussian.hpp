#pragma once

// Gaussians with covariance W W^T + diag(lambda). Every solve and
// determinant goes through the L x L capacitance matrix
//   M = I + W^T diag(lambda)^-1 W
// so the per-sample cost is O(L^2 p) instead of O(p^3).

#include <gpcr/types.hpp>

namespace gpcr {

class LowRankCov {
 public:
  /// Throws InputError unless every variance is positive and rank <= dim.
  LowRankCov(Matrix loadings, Vector variances);

  const Matrix& loadings() const { return loadings_; }
  const Vector& variances() const { return variances_; }
  Index dim() const { return loadings_.rows(); }
  Index rank() const { return loadings_.cols(); }

 private:
  Matrix loadings_;
  Vector variances_;
};

/// One Cholesky factorization of the capacitance matrix, shared by solves,
/// log-determinants and batch log-densities.
class CapacitanceFactor {
 public:
  /// Throws NumericError if the capacitance is not numerically SPD.
  explicit CapacitanceFactor(const LowRankCov& cov);

  const Matrix& capacitance() const { return capacitance_; }
  /// Lower-triangular U with capacitance = U U^T.
  const Matrix& chol() const { return chol_; }
  Matrix inverse() const;
  /// log det(M)
  double logdet_capacitance() const { return logdet_capacitance_; }
  /// log det(W W^T + Lambda)
  double logdet_cov() const;
  /// (W W^T + Lambda)^-1 v
  Vector solve_cov(const Vector& v) const;
  /// M^-1 b for an L-vector or L x k block.
  Matrix solve_capacitance(const Matrix& b) const;
  /// Gaussian log-density of one demeaned observation.
  double logpdf(const Vector& x) const;
  /// Row-wise log-densities of a demeaned N x p batch, OpenMP over rows.
  Vector logpdf_rows(const Matrix& X) const;

  const LowRankCov& cov() const { return cov_; }

 private:
  LowRankCov cov_;
  Vector inv_variances_;
  Matrix scaled_loadings_;  // Lambda^-1 W
  Matrix capacitance_;
  Matrix chol_;
  double logdet_capacitance_ = 0.0;
};

Matrix capacitance(const LowRankCov& cov);
Vector solve_cov(const LowRankCov& cov, const Vector& v);
double logdet_cov(const LowRankCov& cov);
double logpdf(const LowRankCov& cov, const Vector& x);
Vector logpdf_rows(const LowRankCov& cov, const Matrix& X);

}  // namespace gpcr

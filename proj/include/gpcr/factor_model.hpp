#pragma once

// Linear-Gaussian factor model
//   z ~ N(0, I_L),  x | z ~ N(W z, Lambda),  Lambda diagonal,
// with the PPCA restriction Lambda = sigma^2 I available as a flag.

#include <gpcr/lowrank_gaussian.hpp>
#include <gpcr/types.hpp>

namespace gpcr {

class FactorModel {
 public:
  /// `mean_offset` is the training mean subtracted from raw rows before any
  /// density or posterior computation. Empty means zero.
  FactorModel(Matrix loadings, Vector variances, Vector mean_offset = {}, bool isotropic = false);

  const LowRankCov& cov() const { return cov_; }
  const Matrix& loadings() const { return cov_.loadings(); }
  const Vector& variances() const { return cov_.variances(); }
  const Vector& mean_offset() const { return mean_offset_; }
  bool isotropic() const { return isotropic_; }
  Index dim() const { return cov_.dim(); }
  Index latents() const { return cov_.rank(); }

  /// Subtract mean_offset from every row.
  Matrix demean(const Matrix& raw) const;

 private:
  LowRankCov cov_;
  Vector mean_offset_;
  bool isotropic_ = false;
};

/// p(z | x) = N(mean_map x, cov). The covariance does not depend on x.
struct GaussianPosterior {
  Matrix mean_map;  ///< L x p, equals M^-1 W^T Lambda^-1
  Matrix cov;       ///< L x L, equals M^-1
  Matrix chol;      ///< lower Cholesky factor of cov
};

GaussianPosterior posterior(const FactorModel& model);

/// Sum of row log-densities; rows of X must already be demeaned.
double marginal_loglik(const FactorModel& model, const Matrix& X);

struct FactorSample {
  Matrix Z;  ///< n x L
  Matrix X;  ///< n x p, demeaned space (no mean_offset added)
};

FactorSample sample(const FactorModel& model, Index n, Seed seed);

/// Row i is mean_map * x_i for demeaned X.
Matrix posterior_mean_scores(const FactorModel& model, const Matrix& X);

}  // namespace gpcr

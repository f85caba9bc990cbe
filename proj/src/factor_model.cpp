#include <gpcr/factor_model.hpp>

#include <random>

#include <gpcr/error.hpp>
#include <gpcr/kernels.hpp>

namespace gpcr {

FactorModel::FactorModel(Matrix loadings, Vector variances, Vector mean_offset, bool isotropic)
    : cov_(std::move(loadings), std::move(variances)),
      mean_offset_(std::move(mean_offset)),
      isotropic_(isotropic) {
  if (mean_offset_.size() == 0) mean_offset_ = Vector::Zero(cov_.dim());
  if (mean_offset_.size() != cov_.dim()) throw InputError("FactorModel: mean_offset length does not match dimension");
  if (!mean_offset_.allFinite()) throw InputError("FactorModel: mean_offset is not finite");
  if (isotropic_) {
    const Vector& v = cov_.variances();
    if ((v.array() != v[0]).any()) throw InputError("FactorModel: isotropic model needs equal variances");
  }
}

Matrix FactorModel::demean(const Matrix& raw) const {
  if (raw.cols() != dim()) throw InputError("FactorModel::demean: column count does not match dimension");
  return raw.rowwise() - mean_offset_.transpose();
}

GaussianPosterior posterior(const FactorModel& model) {
  CapacitanceFactor fac(model.cov());
  GaussianPosterior post;
  post.cov = fac.inverse();
  post.cov = 0.5 * (post.cov + post.cov.transpose());
  const Matrix scaled = model.variances().cwiseInverse().asDiagonal() * model.loadings();
  post.mean_map = fac.solve_capacitance(scaled.transpose());
  Eigen::LLT<Matrix> llt(post.cov);
  if (llt.info() != Eigen::Success) throw NumericError("posterior covariance Cholesky failed");
  post.chol = llt.matrixL();
  return post;
}

double marginal_loglik(const FactorModel& model, const Matrix& X) {
  const Vector rows = CapacitanceFactor(model.cov()).logpdf_rows(X);
  return rows.sum();
}

FactorSample sample(const FactorModel& model, Index n, Seed seed) {
  if (n < 1) throw InputError("sample: n must be at least 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index L = model.latents();
  const Index p = model.dim();
  FactorSample out{Matrix(n, L), Matrix(n, p)};
  for (Index i = 0; i < n; ++i)
    for (Index l = 0; l < L; ++l) out.Z(i, l) = normal(rng);
  const Vector sd = model.variances().cwiseSqrt();
  Matrix noise(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) noise(i, j) = sd[j] * normal(rng);
  out.X = out.Z * model.loadings().transpose() + noise;
  return out;
}

Matrix posterior_mean_scores(const FactorModel& model, const Matrix& X) {
  if (X.cols() != model.dim()) throw InputError("posterior_mean_scores: column count does not match dimension");
  const GaussianPosterior post = posterior(model);
  return kernels::parallel::gemm_rows(X, post.mean_map.transpose());
}

}  // namespace gpcr

#include <gpcr/lowrank_gaussian.hpp>

#include <cmath>
#include <numbers>
#include <string>

#include <gpcr/error.hpp>
#include <gpcr/kernels.hpp>

namespace gpcr {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
}

LowRankCov::LowRankCov(Matrix loadings, Vector variances)
    : loadings_(std::move(loadings)), variances_(std::move(variances)) {
  if (variances_.size() != loadings_.rows()) {
    throw InputError("LowRankCov: loadings have " + std::to_string(loadings_.rows()) +
                     " rows but " + std::to_string(variances_.size()) + " variances were given");
  }
  if (loadings_.cols() > loadings_.rows()) {
    throw InputError("LowRankCov: rank " + std::to_string(loadings_.cols()) +
                     " exceeds dimension " + std::to_string(loadings_.rows()));
  }
  for (Index j = 0; j < variances_.size(); ++j) {
    if (!(variances_[j] > 0.0) || !std::isfinite(variances_[j])) {
      throw InputError("LowRankCov: variance " + std::to_string(j) + " is not a positive finite number");
    }
  }
  if (!loadings_.allFinite()) throw InputError("LowRankCov: loadings contain non-finite entries");
}

CapacitanceFactor::CapacitanceFactor(const LowRankCov& cov)
    : cov_(cov),
      inv_variances_(cov.variances().cwiseInverse()),
      scaled_loadings_(inv_variances_.asDiagonal() * cov.loadings()) {
  const Index L = cov.rank();
  capacitance_ = Matrix::Identity(L, L) + cov.loadings().transpose() * scaled_loadings_;
  capacitance_ = 0.5 * (capacitance_ + capacitance_.transpose());
  Eigen::LLT<Matrix> llt(capacitance_);
  if (llt.info() != Eigen::Success) {
    throw NumericError("capacitance matrix Cholesky failed; model is numerically indefinite");
  }
  chol_ = llt.matrixL();
  logdet_capacitance_ = 2.0 * chol_.diagonal().array().log().sum();
}

Matrix CapacitanceFactor::inverse() const {
  return solve_capacitance(Matrix::Identity(cov_.rank(), cov_.rank()));
}

Matrix CapacitanceFactor::solve_capacitance(const Matrix& b) const {
  Matrix y = chol_.triangularView<Eigen::Lower>().solve(b);
  return chol_.transpose().triangularView<Eigen::Upper>().solve(y);
}

double CapacitanceFactor::logdet_cov() const {
  return cov_.variances().array().log().sum() + logdet_capacitance_;
}

Vector CapacitanceFactor::solve_cov(const Vector& v) const {
  if (v.size() != cov_.dim()) throw InputError("solve_cov: vector length does not match dimension");
  Vector lv = inv_variances_.cwiseProduct(v);
  Vector inner = solve_capacitance(cov_.loadings().transpose() * lv);
  return lv - scaled_loadings_ * inner;
}

double CapacitanceFactor::logpdf(const Vector& x) const {
  if (x.size() != cov_.dim()) throw InputError("logpdf: vector length does not match dimension");
  const double quad = x.dot(solve_cov(x));
  return -0.5 * (static_cast<double>(cov_.dim()) * kLog2Pi + logdet_cov() + quad);
}

Vector CapacitanceFactor::logpdf_rows(const Matrix& X) const {
  if (X.cols() != cov_.dim()) throw InputError("logpdf_rows: column count does not match dimension");
  const Matrix V = kernels::parallel::gemm_rows(X, scaled_loadings_);
  const Matrix Minv = inverse();
  Vector quad = kernels::parallel::woodbury_quadforms(X, inv_variances_, V, Minv);
  const double constant = static_cast<double>(cov_.dim()) * kLog2Pi + logdet_cov();
  return (-0.5 * (quad.array() + constant)).matrix();
}

Matrix capacitance(const LowRankCov& cov) { return CapacitanceFactor(cov).capacitance(); }
Vector solve_cov(const LowRankCov& cov, const Vector& v) { return CapacitanceFactor(cov).solve_cov(v); }
double logdet_cov(const LowRankCov& cov) { return CapacitanceFactor(cov).logdet_cov(); }
double logpdf(const LowRankCov& cov, const Vector& x) { return CapacitanceFactor(cov).logpdf(x); }
Vector logpdf_rows(const LowRankCov& cov, const Matrix& X) { return CapacitanceFactor(cov).logpdf_rows(X); }

}  // namespace gpcr

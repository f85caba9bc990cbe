#include <gpcr/kernels.hpp>

#include <algorithm>
#include <cmath>

#include <omp.h>

namespace gpcr::kernels {

double log_sigmoid(double t) {
  return t >= 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace serial {

// The products walk the same fixed blocks as the parallel versions so that
// both produce identical floating-point results.
Matrix gemm_rows(const Matrix& A, const Matrix& B) {
  Matrix out(A.rows(), B.cols());
  for (Index r0 = 0; r0 < A.rows(); r0 += kRowBlock) {
    const Index nr = std::min(kRowBlock, A.rows() - r0);
    out.middleRows(r0, nr).noalias() = A.middleRows(r0, nr) * B;
  }
  return out;
}

Matrix gemm_tn(const Matrix& A, const Matrix& B) {
  Matrix out(A.cols(), B.cols());
  for (Index c0 = 0; c0 < A.cols(); c0 += kColBlock) {
    const Index nc = std::min(kColBlock, A.cols() - c0);
    out.middleRows(c0, nc).noalias() = A.middleCols(c0, nc).transpose() * B;
  }
  return out;
}

Vector col_sq_norms(const Matrix& A) { return A.colwise().squaredNorm().transpose(); }

Vector woodbury_quadforms(const Matrix& X, const Vector& w, const Matrix& V, const Matrix& C) {
  Vector out(X.rows());
  for (Index i = 0; i < X.rows(); ++i) {
    const double diag = X.row(i).array().square().matrix().dot(w);
    out[i] = diag - V.row(i).dot(V.row(i) * C);
  }
  return out;
}

LogisticMcRows logistic_mc(const Matrix& means, const Matrix& scale, const Matrix& eps,
                           const Vector& coef, double intercept, const Vector& labels,
                           Index draws) {
  const Index N = means.rows();
  const Index L = means.cols();
  LogisticMcRows out{Vector::Zero(N), Vector::Zero(N), Matrix::Zero(N, L), Matrix::Zero(N, L)};
  const double inv_s = 1.0 / static_cast<double>(draws);
  Vector z(L);
  for (Index i = 0; i < N; ++i) {
    const double sign = 2.0 * labels[i] - 1.0;
    for (Index s = 0; s < draws; ++s) {
      const auto e = eps.row(i * draws + s).transpose();
      z = means.row(i).transpose() + scale * e;
      const double t = sign * (coef.dot(z) + intercept);
      out.value[i] += inv_s * log_sigmoid(t);
      const double g = inv_s * sign * sigmoid(-t);
      out.dlogit_sum[i] += g;
      out.weighted_eps.row(i) += g * e.transpose();
      out.weighted_z.row(i) += g * z.transpose();
    }
  }
  return out;
}

}  // namespace serial

namespace parallel {

Matrix gemm_rows(const Matrix& A, const Matrix& B) {
  Matrix out(A.rows(), B.cols());
  const Index blocks = (A.rows() + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const Index r0 = b * kRowBlock;
    const Index nr = std::min(kRowBlock, A.rows() - r0);
    out.middleRows(r0, nr).noalias() = A.middleRows(r0, nr) * B;
  }
  return out;
}

Matrix gemm_tn(const Matrix& A, const Matrix& B) {
  Matrix out(A.cols(), B.cols());
  const Index blocks = (A.cols() + kColBlock - 1) / kColBlock;
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const Index c0 = b * kColBlock;
    const Index nc = std::min(kColBlock, A.cols() - c0);
    out.middleRows(c0, nc).noalias() = A.middleCols(c0, nc).transpose() * B;
  }
  return out;
}

Vector col_sq_norms(const Matrix& A) {
  Vector out(A.cols());
#pragma omp parallel for schedule(static)
  for (Index j = 0; j < A.cols(); ++j) out[j] = A.col(j).squaredNorm();
  return out;
}

Vector woodbury_quadforms(const Matrix& X, const Vector& w, const Matrix& V, const Matrix& C) {
  Vector out(X.rows());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < X.rows(); ++i) {
    const double diag = X.row(i).array().square().matrix().dot(w);
    out[i] = diag - V.row(i).dot(V.row(i) * C);
  }
  return out;
}

LogisticMcRows logistic_mc(const Matrix& means, const Matrix& scale, const Matrix& eps,
                           const Vector& coef, double intercept, const Vector& labels,
                           Index draws) {
  const Index N = means.rows();
  const Index L = means.cols();
  LogisticMcRows out{Vector::Zero(N), Vector::Zero(N), Matrix::Zero(N, L), Matrix::Zero(N, L)};
  const double inv_s = 1.0 / static_cast<double>(draws);
#pragma omp parallel
  {
    Vector z(L);
#pragma omp for schedule(static)
    for (Index i = 0; i < N; ++i) {
      const double sign = 2.0 * labels[i] - 1.0;
      for (Index s = 0; s < draws; ++s) {
        const auto e = eps.row(i * draws + s).transpose();
        z = means.row(i).transpose() + scale * e;
        const double t = sign * (coef.dot(z) + intercept);
        out.value[i] += inv_s * log_sigmoid(t);
        const double g = inv_s * sign * sigmoid(-t);
        out.dlogit_sum[i] += g;
        out.weighted_eps.row(i) += g * e.transpose();
        out.weighted_z.row(i) += g * z.transpose();
      }
    }
  }
  return out;
}

}  // namespace parallel

}  // namespace gpcr::kernels

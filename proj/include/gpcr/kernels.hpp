#pragma once

// Data-parallel kernels used on the N x p hot paths. Each kernel has a
// serial reference in `serial` and an OpenMP version in `parallel`. The
// parallel versions partition work into fixed-size blocks that do not
// depend on the thread count, and every reduction across rows happens
// serially in row order, so results are reproducible bit-for-bit for a
// given build regardless of OMP_NUM_THREADS.

#include <gpcr/types.hpp>

namespace gpcr::kernels {

inline constexpr Index kRowBlock = 128;
inline constexpr Index kColBlock = 32;

namespace serial {
/// A * B
Matrix gemm_rows(const Matrix& A, const Matrix& B);
/// A^T * B
Matrix gemm_tn(const Matrix& A, const Matrix& B);
/// Column sums of squares of A.
Vector col_sq_norms(const Matrix& A);
/// sum_j X_ij^2 w_j - v_i^T C v_i for every row i.
Vector woodbury_quadforms(const Matrix& X, const Vector& w, const Matrix& V, const Matrix& C);
}  // namespace serial

namespace parallel {
Matrix gemm_rows(const Matrix& A, const Matrix& B);
Matrix gemm_tn(const Matrix& A, const Matrix& B);
Vector col_sq_norms(const Matrix& A);
Vector woodbury_quadforms(const Matrix& X, const Vector& w, const Matrix& V, const Matrix& C);
}  // namespace parallel

/// Per-row results of the reparameterized logistic supervision term.
struct LogisticMcRows {
  Vector value;        ///< mean over draws of log sigmoid(s_i t_is), per row
  Vector dlogit_sum;   ///< sum over draws of d/dt / S, per row
  Matrix weighted_eps; ///< sum over draws of (d/dt / S) * eps_is, N x L
  Matrix weighted_z;   ///< sum over draws of (d/dt / S) * z_is, N x L
};

/// z_is = means_i + scale(eps_is), t_is = coef . z_is + intercept, for
/// labels in {0,1}. `eps` is (N*S) x L with the draws of row i stored in
/// rows [i*S, (i+1)*S). `scale` is an L x L matrix applied as scale * eps
/// (a Cholesky factor or a diagonal).
namespace serial {
LogisticMcRows logistic_mc(const Matrix& means, const Matrix& scale, const Matrix& eps,
                           const Vector& coef, double intercept, const Vector& labels,
                           Index draws);
}
namespace parallel {
LogisticMcRows logistic_mc(const Matrix& means, const Matrix& scale, const Matrix& eps,
                           const Vector& coef, double intercept, const Vector& labels,
                           Index draws);
}

/// Numerically stable log(sigmoid(t)).
double log_sigmoid(double t);
double sigmoid(double t);

}  // namespace gpcr::kernels

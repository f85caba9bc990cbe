#include <gpcr/objectives.hpp>

#include <cmath>
#include <random>

#include <gpcr/error.hpp>
#include <gpcr/kernels.hpp>

namespace gpcr {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

namespace kp = kernels::parallel;

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

// Row-wise dot products of two equally shaped matrices.
Vector row_dots(const Matrix& a, const Matrix& b) {
  return a.cwiseProduct(b).rowwise().sum();
}

// Adjoint of C given the adjoint of its lower Cholesky factor K:
//   C_bar = sym(K^-T Phi(K^T K_bar) K^-1),
// Phi keeps the lower triangle and halves the diagonal.
Matrix cholesky_backprop(const Matrix& K, const Matrix& K_bar) {
  Matrix lower_bar = K_bar.triangularView<Eigen::Lower>();
  Matrix phi = (K.transpose() * lower_bar).triangularView<Eigen::Lower>();
  phi.diagonal() *= 0.5;
  const auto Kl = K.triangularView<Eigen::Lower>();
  const Matrix left = Kl.transpose().solve(phi);
  const Matrix full = Kl.transpose().solve(left.transpose()).transpose();
  return symmetrize(full);
}

void check_inputs(const FactorModel& model, const PredictiveHead& head, const Matrix& X,
                  const Matrix& Y) {
  if (X.cols() != model.dim()) throw InputError("objective: X has wrong column count");
  if (Y.rows() != X.rows()) throw InputError("objective: X and y row counts differ");
  if (head.latents() != model.latents()) throw InputError("objective: head latent count does not match model");
  if (Y.cols() != head.outputs()) throw InputError("objective: y column count does not match head outputs");
  head.validate();
  if (head.link == Link::logistic) {
    for (Index i = 0; i < Y.rows(); ++i) {
      if (Y(i, 0) != 0.0 && Y(i, 0) != 1.0) {
        throw InputError("objective: logistic outcome at row " + std::to_string(i) + " is not 0 or 1");
      }
    }
  }
}

int draws_for(const ObjectiveConfig& cfg, McPhase phase) {
  return phase == McPhase::train ? cfg.mc_samples_train : cfg.mc_samples_eval;
}

}  // namespace

std::string to_string(Link link) { return link == Link::gaussian ? "gaussian" : "logistic"; }

Link link_from_string(const std::string& s) {
  if (s == "gaussian") return Link::gaussian;
  if (s == "logistic") return Link::logistic;
  throw InputError("unknown link '" + s + "' (expected gaussian or logistic)");
}

PredictiveHead PredictiveHead::zeros(Index latents, Index outputs, Link link, double noise_var,
                                     std::vector<bool> supervised) {
  PredictiveHead h;
  h.coef = Matrix::Zero(latents, outputs);
  h.intercept = Vector::Zero(outputs);
  h.link = link;
  h.noise_var = noise_var;
  h.supervised = supervised.empty() ? mask(latents, false) : std::move(supervised);
  h.validate();
  return h;
}

std::vector<bool> PredictiveHead::mask(Index latents, bool first_only) {
  std::vector<bool> m(static_cast<std::size_t>(latents), !first_only);
  if (first_only && latents > 0) m[0] = true;
  return m;
}

void PredictiveHead::apply_mask() {
  for (Index l = 0; l < coef.rows(); ++l)
    if (!supervised[static_cast<std::size_t>(l)]) coef.row(l).setZero();
}

void PredictiveHead::validate() const {
  if (static_cast<Index>(supervised.size()) != coef.rows()) throw InputError("head: mask length does not match latent count");
  if (intercept.size() != coef.cols()) throw InputError("head: intercept length does not match output count");
  if (link == Link::gaussian && !(noise_var > 0.0)) throw InputError("head: gaussian noise variance must be positive");
  if (link == Link::logistic && coef.cols() != 1) throw InputError("head: logistic link supports a single output");
  for (Index l = 0; l < coef.rows(); ++l) {
    if (!supervised[static_cast<std::size_t>(l)] && !coef.row(l).isZero(0.0)) {
      throw InputError("head: masked coefficient row " + std::to_string(l) + " is nonzero");
    }
  }
}

Matrix PredictiveHead::linear_predictor(const Matrix& scores) const {
  return (scores * coef).rowwise() + intercept.transpose();
}

Matrix PredictiveHead::mean_response(const Matrix& scores) const {
  Matrix eta = linear_predictor(scores);
  if (link == Link::logistic) eta = eta.unaryExpr([](double t) { return kernels::sigmoid(t); });
  return eta;
}

void LinearEncoder::validate() const {
  if (intercept.size() != A.rows() || variances.size() != A.rows()) throw InputError("encoder: inconsistent shapes");
  if ((variances.array() <= 0.0).any()) throw InputError("encoder: variances must be positive");
}

Matrix LinearEncoder::means(const Matrix& X) const {
  if (X.cols() != A.cols()) throw InputError("encoder: X has wrong column count");
  Matrix E = kp::gemm_rows(X, A.transpose());
  E.rowwise() += intercept.transpose();
  return E;
}

void ObjectiveConfig::validate() const {
  if (!(mu >= 0.0)) throw InputError("objective config: mu must be nonnegative");
  if (mc_samples_train < 1 || mc_samples_eval < 1) throw InputError("objective config: sample counts must be at least 1");
}

Matrix as_column(const Vector& y) { return Matrix(y); }

double gaussian_kl_to_standard(const Vector& mean, const Vector& variances) {
  return 0.5 * (variances.sum() + mean.squaredNorm() - static_cast<double>(mean.size()) -
                variances.array().log().sum());
}

double head_loglik(const PredictiveHead& head, const Matrix& Z, const Vector& y) {
  head.validate();
  if (Z.cols() != head.latents()) throw InputError("head_loglik: latent draws have wrong width");
  if (y.size() != head.outputs()) throw InputError("head_loglik: outcome has wrong length");
  const Matrix eta = head.linear_predictor(Z);
  double total = 0.0;
  if (head.link == Link::logistic) {
    if (y[0] != 0.0 && y[0] != 1.0) throw InputError("head_loglik: logistic outcome must be 0 or 1");
    const double sign = 2.0 * y[0] - 1.0;
    for (Index s = 0; s < Z.rows(); ++s) total += kernels::log_sigmoid(sign * eta(s, 0));
  } else {
    const double c = -0.5 * std::log(2.0 * M_PI * head.noise_var);
    for (Index s = 0; s < Z.rows(); ++s)
      for (Index k = 0; k < head.outputs(); ++k) {
        const double r = y[k] - eta(s, k);
        total += c - 0.5 * r * r / head.noise_var;
      }
  }
  return total / static_cast<double>(Z.rows());
}

Matrix mc_draws(Index rows, Index draws, Index latents, Seed seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix eps(rows * draws, latents);
  for (Index r = 0; r < eps.rows(); ++r)
    for (Index l = 0; l < latents; ++l) eps(r, l) = normal(rng);
  return eps;
}

GpcrEvaluation gpcr_objective(const FactorModel& model, const PredictiveHead& head, const Matrix& X,
                              const Matrix& Y, const ObjectiveConfig& cfg, McPhase phase,
                              bool with_grad) {
  check_inputs(model, head, X, Y);
  cfg.validate();
  const Index N = X.rows();
  const Index p = model.dim();
  const Index L = model.latents();
  const double Nd = static_cast<double>(N);
  const Matrix& W = model.loadings();
  const Vector& lam = model.variances();
  const Vector inv = lam.cwiseInverse();

  CapacitanceFactor fac(model.cov());
  const Matrix C = symmetrize(fac.inverse());
  const Matrix WL = inv.asDiagonal() * W;

  const Matrix V = kp::gemm_rows(X, WL);  // N x L
  const Vector quad = kp::woodbury_quadforms(X, inv, V, C);
  const double logdet = fac.logdet_cov();

  GpcrEvaluation ev;
  ev.terms.marginal = -0.5 * (Nd * (static_cast<double>(p) * kLog2Pi + logdet) + quad.sum());

  const Matrix Mn = V * C;  // posterior means, N x L
  const Matrix& B = head.coef;
  const double mu = cfg.mu;

  Matrix Gm = Matrix::Zero(N, L);
  Matrix C_bar = Matrix::Zero(L, L);
  Matrix B_bar = Matrix::Zero(L, head.outputs());
  Vector c_bar = Vector::Zero(head.outputs());

  if (head.link == Link::gaussian) {
    const double s = head.noise_var;
    const Matrix Res = (Y - Mn * B).rowwise() - head.intercept.transpose();
    const Vector spread = (B.transpose() * C * B).diagonal();
    const double c0 = -0.5 * std::log(2.0 * M_PI * s);
    ev.terms.supervision = Nd * static_cast<double>(head.outputs()) * c0 -
                           (Res.squaredNorm() + Nd * spread.sum()) / (2.0 * s);
    if (with_grad) {
      Gm = (mu / s) * Res * B.transpose();
      C_bar = -(mu * Nd / (2.0 * s)) * B * B.transpose();
      B_bar = mu * (Mn.transpose() * Res / s - (Nd / s) * C * B);
      c_bar = (mu / s) * Res.colwise().sum().transpose();
    }
  } else {
    const int S = draws_for(cfg, phase);
    const Matrix eps = mc_draws(N, S, L, cfg.seed);
    Eigen::LLT<Matrix> llt(C);
    if (llt.info() != Eigen::Success) throw NumericError("gpcr objective: posterior covariance Cholesky failed");
    const Matrix K = llt.matrixL();
    const Vector beta = B.col(0);
    const kernels::LogisticMcRows rows =
        kp::logistic_mc(Mn, K, eps, beta, head.intercept[0], Y.col(0), S);
    ev.terms.supervision = rows.value.sum();
    if (with_grad) {
      Gm = mu * rows.dlogit_sum * beta.transpose();
      const Vector eps_sum = rows.weighted_eps.colwise().sum().transpose();
      const Matrix K_bar = mu * beta * eps_sum.transpose();
      C_bar = cholesky_backprop(K, K_bar);
      B_bar.col(0) = mu * rows.weighted_z.colwise().sum().transpose();
      c_bar[0] = mu * rows.dlogit_sum.sum();
    }
  }
  ev.value = ev.terms.marginal + mu * ev.terms.supervision;
  if (!with_grad) return ev;

  // d log p(x) / dW and d / dlambda via R = X Sigma^-1.
  const Matrix XL = X * inv.asDiagonal();
  const Matrix R = XL - kp::gemm_rows(Mn, WL.transpose());
  const Matrix RW = kp::gemm_rows(R, W);
  Matrix gW = -Nd * WL * C + kp::gemm_tn(R, RW);
  const Vector wcw = row_dots(W * C, W);
  const Vector diag_sinv = inv - inv.cwiseProduct(inv).cwiseProduct(wcw);
  const Vector colsq = kp::col_sq_norms(R);
  Vector g_lam = -0.5 * (Nd * diag_sinv - colsq);

  // Supervision terms flow through the posterior means Mn = V C and C = M^-1.
  C_bar += V.transpose() * Gm;
  C_bar = symmetrize(C_bar);
  const Matrix V_bar = Gm * C;
  const Matrix XtVbar = kp::gemm_tn(X, V_bar);  // p x L
  gW += inv.asDiagonal() * XtVbar;
  Vector g_inv = row_dots(W, XtVbar);
  const Matrix M_bar = -C * C_bar * C;
  gW += 2.0 * WL * M_bar;
  g_inv += row_dots(W * M_bar, W);
  g_lam -= inv.cwiseProduct(inv).cwiseProduct(g_inv);

  ev.grad.loadings = std::move(gW);
  ev.grad.log_variances = lam.cwiseProduct(g_lam);
  ev.grad.coef = std::move(B_bar);
  for (Index l = 0; l < L; ++l)
    if (!head.supervised[static_cast<std::size_t>(l)]) ev.grad.coef.row(l).setZero();
  ev.grad.intercept = std::move(c_bar);
  return ev;
}

double weighted_conditional_objective(const FactorModel& model, const PredictiveHead& head,
                                      const Matrix& X, const Matrix& Y, double mu) {
  check_inputs(model, head, X, Y);
  if (head.link != Link::gaussian) {
    throw InputError("weighted conditional objective is only available for the gaussian link");
  }
  const GaussianPosterior post = posterior(model);
  const Index K = head.outputs();
  const Matrix pred_cov = head.coef.transpose() * post.cov * head.coef +
                          head.noise_var * Matrix::Identity(K, K);
  Eigen::LLT<Matrix> llt(pred_cov);
  if (llt.info() != Eigen::Success) throw NumericError("predictive covariance Cholesky failed");
  const Matrix Lc = llt.matrixL();
  const double logdet = 2.0 * Lc.diagonal().array().log().sum();
  const Matrix scores = kp::gemm_rows(X, post.mean_map.transpose());
  const Matrix Res = Y - head.linear_predictor(scores);
  const Matrix white = Lc.triangularView<Eigen::Lower>().solve(Res.transpose());
  const double Nd = static_cast<double>(X.rows());
  const double cond = -0.5 * (Nd * (static_cast<double>(K) * kLog2Pi + logdet) + white.squaredNorm());
  return marginal_loglik(model, X) + mu * cond;
}

SvaeEvaluation svae_objective(const FactorModel& model, const PredictiveHead& head,
                              const LinearEncoder& enc, const Matrix& X, const Matrix& Y,
                              const ObjectiveConfig& cfg, McPhase phase, bool with_grad) {
  check_inputs(model, head, X, Y);
  cfg.validate();
  enc.validate();
  if (enc.A.rows() != model.latents() || enc.A.cols() != model.dim()) {
    throw InputError("svae objective: encoder shape does not match model");
  }
  const Index N = X.rows();
  const Index p = model.dim();
  const Index L = model.latents();
  const double Nd = static_cast<double>(N);
  const Matrix& W = model.loadings();
  const Vector& lam = model.variances();
  const Vector inv = lam.cwiseInverse();
  const Vector& d = enc.variances;
  const double mu = cfg.mu;

  const Matrix E = enc.means(X);                       // N x L
  const Matrix R = X - kp::gemm_rows(E, W.transpose());  // N x p
  const Matrix WL = inv.asDiagonal() * W;
  const Matrix G = W.transpose() * WL;
  const Vector colsq = kp::col_sq_norms(R);

  SvaeEvaluation ev;
  ev.terms.kl = 0.5 * (Nd * (d.sum() - static_cast<double>(L) - d.array().log().sum()) + E.squaredNorm());
  ev.terms.reconstruction =
      -0.5 * (Nd * (static_cast<double>(p) * kLog2Pi + lam.array().log().sum() + d.dot(G.diagonal())) +
              colsq.dot(inv));

  const Matrix& B = head.coef;
  Matrix E_bar;
  Vector d_bar;
  Matrix B_bar = Matrix::Zero(L, head.outputs());
  Vector c_bar = Vector::Zero(head.outputs());
  Matrix RL;
  if (with_grad) {
    RL = R * inv.asDiagonal();
    E_bar = kp::gemm_rows(RL, W) - E;
    d_bar = -0.5 * Nd * G.diagonal() - 0.5 * Nd * (Vector::Ones(L) - d.cwiseInverse());
  }

  if (head.link == Link::gaussian) {
    const double s = head.noise_var;
    const Matrix Res = (Y - E * B).rowwise() - head.intercept.transpose();
    const Vector spread = B.cwiseProduct(B).transpose() * d;  // per output
    ev.terms.supervision = Nd * static_cast<double>(head.outputs()) * (-0.5 * std::log(2.0 * M_PI * s)) -
                           (Res.squaredNorm() + Nd * spread.sum()) / (2.0 * s);
    if (with_grad) {
      E_bar += (mu / s) * Res * B.transpose();
      d_bar -= (mu * Nd / (2.0 * s)) * B.cwiseProduct(B).rowwise().sum();
      B_bar = mu * (E.transpose() * Res / s - (Nd / s) * d.asDiagonal() * B);
      c_bar = (mu / s) * Res.colwise().sum().transpose();
    }
  } else {
    const int S = draws_for(cfg, phase);
    const Matrix eps = mc_draws(N, S, L, cfg.seed);
    const Vector sd = d.cwiseSqrt();
    const Matrix scale = sd.asDiagonal();
    const Vector beta = B.col(0);
    const kernels::LogisticMcRows rows =
        kp::logistic_mc(E, scale, eps, beta, head.intercept[0], Y.col(0), S);
    ev.terms.supervision = rows.value.sum();
    if (with_grad) {
      E_bar += mu * rows.dlogit_sum * beta.transpose();
      const Vector eps_sum = rows.weighted_eps.colwise().sum().transpose();
      d_bar += mu * beta.cwiseProduct(eps_sum).cwiseQuotient(2.0 * sd);
      B_bar.col(0) = mu * rows.weighted_z.colwise().sum().transpose();
      c_bar[0] = mu * rows.dlogit_sum.sum();
    }
  }
  ev.value = ev.terms.reconstruction - ev.terms.kl + mu * ev.terms.supervision;
  if (!with_grad) return ev;

  ev.grad.loadings = kp::gemm_tn(RL, E) - Nd * WL * d.asDiagonal();
  const Vector w2d = W.cwiseProduct(W) * d;  // sum_l W_jl^2 d_l
  const Vector g_lam =
      -0.5 * (Nd * inv - colsq.cwiseProduct(inv).cwiseProduct(inv) - Nd * w2d.cwiseProduct(inv).cwiseProduct(inv));
  ev.grad.log_variances = lam.cwiseProduct(g_lam);
  ev.grad.coef = std::move(B_bar);
  for (Index l = 0; l < L; ++l)
    if (!head.supervised[static_cast<std::size_t>(l)]) ev.grad.coef.row(l).setZero();
  ev.grad.intercept = std::move(c_bar);

  ev.encoder_grad.A = kp::gemm_tn(X, E_bar).transpose();
  ev.encoder_grad.intercept = E_bar.colwise().sum().transpose();
  ev.encoder_grad.log_variances = d.cwiseProduct(d_bar);
  return ev;
}

}  // namespace gpcr

#include <gpcr/baselines.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <gpcr/error.hpp>
#include <gpcr/kernels.hpp>

namespace gpcr {

namespace {

void check_xy(const Matrix& X, const Matrix& Y, const char* who) {
  if (X.rows() < 1) throw InputError(std::string(who) + ": no rows");
  if (Y.rows() != X.rows()) throw InputError(std::string(who) + ": X and y row counts differ");
  if (Y.cols() < 1) throw InputError(std::string(who) + ": no outcome columns");
  if (!X.allFinite() || !Y.allFinite()) throw InputError(std::string(who) + ": non-finite input");
}

void check_labels(const Matrix& Y, const char* who) {
  if (Y.cols() != 1) throw InputError(std::string(who) + ": logistic link needs exactly one outcome column");
  for (Index i = 0; i < Y.rows(); ++i)
    if (Y(i, 0) != 0.0 && Y(i, 0) != 1.0)
      throw InputError(std::string(who) + ": label at row " + std::to_string(i) + " is not 0 or 1");
}

// Penalized logistic log-likelihood for centered X.
double logistic_value(const Matrix& Xc, const Vector& y, const Vector& w, double b, double penalty) {
  const Vector t = (Xc * w).array() + b;
  double v = 0.0;
  for (Index i = 0; i < t.size(); ++i) v += kernels::log_sigmoid(y[i] == 1.0 ? t[i] : -t[i]);
  return v - 0.5 * penalty * w.squaredNorm();
}

struct LogisticSolution {
  Vector coef;
  double intercept;
};

LogisticSolution newton_logistic(const Matrix& Xc, const Vector& y, double penalty) {
  const Index p = Xc.cols();
  const double ybar = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
  Vector w = Vector::Zero(p);
  double b = std::log(ybar / (1.0 - ybar));
  double value = logistic_value(Xc, y, w, b, penalty);
  for (int it = 0; it < 200; ++it) {
    const Vector t = (Xc * w).array() + b;
    Vector prob(t.size()), s(t.size());
    for (Index i = 0; i < t.size(); ++i) {
      prob[i] = kernels::sigmoid(t[i]);
      s[i] = prob[i] * (1.0 - prob[i]);
    }
    const Vector r = y - prob;
    Vector g(p + 1);
    g.head(p) = Xc.transpose() * r - penalty * w;
    g[p] = r.sum();
    Matrix H(p + 1, p + 1);
    H.topLeftCorner(p, p) = Xc.transpose() * s.asDiagonal() * Xc;
    H.topLeftCorner(p, p).diagonal().array() += penalty;
    H.block(0, p, p, 1) = Xc.transpose() * s;
    H.block(p, 0, 1, p) = H.block(0, p, p, 1).transpose();
    H(p, p) = s.sum() + 1e-12;
    Eigen::LDLT<Matrix> ldlt(H);
    Vector step = ldlt.solve(g);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      throw NumericError("logistic regression: singular Newton system; use a positive penalty");
    }
    // Backtracking keeps each step an ascent step on separable data.
    double scale = 1.0;
    double next = logistic_value(Xc, y, w + step.head(p), b + step[p], penalty);
    while (next < value - 1e-12 * std::abs(value) && scale > 1e-10) {
      scale *= 0.5;
      next = logistic_value(Xc, y, w + scale * step.head(p), b + scale * step[p], penalty);
    }
    w += scale * step.head(p);
    b += scale * step[p];
    value = next;
    if (scale * step.norm() < 1e-8) break;
  }
  return {w, b};
}

}  // namespace

Pca fit_pca(const Matrix& X, Index latents) {
  if (latents < 1) throw InputError("pca: latent count must be at least 1");
  if (latents > std::min(X.rows(), X.cols())) throw InputError("pca: latent count exceeds min(N, p)");
  Pca out;
  out.mean_offset = X.colwise().mean().transpose();
  const Matrix Xc = X.rowwise() - out.mean_offset.transpose();
  Eigen::BDCSVD<Matrix> svd(Xc, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double tol = std::max(X.rows(), X.cols()) * std::numeric_limits<double>::epsilon() * (sv.size() ? sv[0] : 0.0);
  if (sv.size() < latents || !(sv[latents - 1] > tol)) {
    throw InputError("pca: latent count " + std::to_string(latents) + " exceeds the rank of the demeaned data");
  }
  out.components = svd.matrixV().leftCols(latents);
  out.singular_values = sv.head(latents);
  for (Index l = 0; l < latents; ++l) {
    Index arg = 0;
    out.components.col(l).cwiseAbs().maxCoeff(&arg);
    if (out.components(arg, l) < 0.0) out.components.col(l) *= -1.0;
  }
  return out;
}

Matrix RidgeModel::linear_predictor(const Matrix& X) const {
  if (X.cols() != coef.rows()) throw InputError("ridge: covariate count does not match the model");
  return (X * coef).rowwise() + intercept.transpose();
}

Matrix RidgeModel::predict(const Matrix& X) const {
  Matrix t = linear_predictor(X);
  if (link == Link::logistic) t = t.unaryExpr([](double v) { return kernels::sigmoid(v); });
  return t;
}

RidgeModel fit_ridge(const Matrix& X, const Matrix& Y, double penalty, Link link) {
  check_xy(X, Y, "ridge");
  if (!(penalty >= 0.0) || !std::isfinite(penalty)) throw InputError("ridge: penalty must be finite and nonnegative");
  const Index N = X.rows(), p = X.cols();
  const Vector xbar = X.colwise().mean().transpose();
  const Matrix Xc = X.rowwise() - xbar.transpose();
  RidgeModel m;
  m.penalty = penalty;
  m.link = link;
  if (link == Link::gaussian) {
    const Vector ybar = Y.colwise().mean().transpose();
    const Matrix Yc = Y.rowwise() - ybar.transpose();
    if (penalty == 0.0 && p > N - 1) {
      throw InputError("ridge: normal equations are singular with p >= N; use a nonzero penalty");
    }
    if (p <= N) {
      Matrix G = Xc.transpose() * Xc;
      G.diagonal().array() += penalty;
      Eigen::LDLT<Matrix> ldlt(G);
      m.coef = ldlt.solve(Xc.transpose() * Yc);
      if (ldlt.info() != Eigen::Success || !m.coef.allFinite() || ldlt.rcond() < 1e-14) {
        throw InputError("ridge: normal equations are singular; use a nonzero penalty");
      }
    } else {
      Matrix G = Xc * Xc.transpose();
      G.diagonal().array() += penalty;
      Eigen::LDLT<Matrix> ldlt(G);
      m.coef = Xc.transpose() * ldlt.solve(Yc);
      if (ldlt.info() != Eigen::Success || !m.coef.allFinite()) throw NumericError("ridge: dual system failed");
    }
    m.intercept = ybar - m.coef.transpose() * xbar;
  } else {
    check_labels(Y, "ridge");
    const LogisticSolution s = newton_logistic(Xc, Y.col(0), penalty);
    m.coef = s.coef;
    m.intercept = Vector::Constant(1, s.intercept - xbar.dot(s.coef));
  }
  return m;
}

Matrix PcrModel::scores(const Matrix& X) const {
  if (X.cols() != components.rows()) throw InputError("pcr: covariate count does not match the model");
  return (X.rowwise() - mean_offset.transpose()) * components;
}

Matrix PcrModel::linear_predictor(const Matrix& X) const { return head.linear_predictor(scores(X)); }

Matrix PcrModel::predict(const Matrix& X) const { return head.mean_response(scores(X)); }

Matrix PcrModel::effective_coef() const { return components * head.coef; }

PcrModel fit_pcr(const Matrix& X, const Matrix& Y, Index latents, Link link, double penalty) {
  check_xy(X, Y, "pcr");
  if (X.rows() <= latents) throw InputError("pcr: need more rows than components");
  const Pca pca = fit_pca(X, latents);
  PcrModel m;
  m.components = pca.components;
  m.mean_offset = pca.mean_offset;
  m.penalty = penalty;
  const Matrix S = m.scores(X);
  const RidgeModel r = fit_ridge(S, Y, penalty, link);
  m.head = PredictiveHead::zeros(latents, Y.cols(), link, 1.0, {});
  m.head.coef = r.coef;
  m.head.intercept = r.intercept;
  if (link == Link::gaussian) {
    const Matrix resid = Y - r.linear_predictor(S);
    m.head.noise_var = std::max(resid.squaredNorm() / static_cast<double>(resid.size()), 1e-12);
  }
  return m;
}

std::vector<double> default_penalty_grid() {
  std::vector<double> g;
  for (int e = -4; e <= 4; ++e) g.push_back(std::pow(10.0, e));
  return g;
}

std::vector<int> make_folds(const Vector& y, int folds, bool stratified, Seed seed) {
  if (folds < 2) throw InputError("cross-validation: need at least 2 folds");
  if (y.size() < folds) throw InputError("cross-validation: fewer rows than folds");
  std::mt19937_64 rng(seed);
  std::vector<int> fold(static_cast<std::size_t>(y.size()), 0);
  auto assign = [&](std::vector<Index> idx, int& next) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (Index i : idx) {
      fold[static_cast<std::size_t>(i)] = next;
      next = (next + 1) % folds;
    }
  };
  int next = 0;
  if (stratified) {
    std::vector<Index> neg, pos;
    for (Index i = 0; i < y.size(); ++i) (y[i] == 1.0 ? pos : neg).push_back(i);
    assign(neg, next);
    assign(pos, next);
  } else {
    std::vector<Index> all(static_cast<std::size_t>(y.size()));
    std::iota(all.begin(), all.end(), Index{0});
    assign(all, next);
  }
  return fold;
}

CvResult cross_validate_penalty(const Matrix& X, const Matrix& Y, Link link, const FitPredict& fit_predict,
                                const std::vector<double>& grid, int folds, Seed seed) {
  check_xy(X, Y, "cross-validation");
  if (grid.empty()) throw InputError("cross-validation: empty penalty grid");
  const std::vector<int> fold = make_folds(Y.col(0), folds, link == Link::logistic, seed);
  CvResult res;
  res.penalties = grid;
  res.scores.assign(grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<Index> tr, te;
    for (Index i = 0; i < X.rows(); ++i) (fold[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
    const Matrix Xtr = X(tr, Eigen::all), Ytr = Y(tr, Eigen::all);
    const Matrix Xte = X(te, Eigen::all), Yte = Y(te, Eigen::all);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Matrix t = fit_predict(Xtr, Ytr, Xte, grid[g]);
      double loss = 0.0;
      if (link == Link::gaussian) {
        loss = (t - Yte).squaredNorm() / static_cast<double>(Yte.size());
      } else {
        for (Index i = 0; i < t.rows(); ++i) loss -= 2.0 * kernels::log_sigmoid(Yte(i, 0) == 1.0 ? t(i, 0) : -t(i, 0));
        loss /= static_cast<double>(t.rows());
      }
      res.scores[g] += loss / folds;
    }
  }
  // Ties go to the larger penalty.
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (res.scores[g] < res.scores[best] || (res.scores[g] == res.scores[best] && grid[g] > grid[best])) best = g;
  res.best_penalty = grid[best];
  return res;
}

RidgeModel fit_ridge_cv(const Matrix& X, const Matrix& Y, Link link, const std::vector<double>& grid, int folds,
                        Seed seed, CvResult* cv) {
  const FitPredict fp = [link](const Matrix& Xtr, const Matrix& Ytr, const Matrix& Xte, double pen) {
    return fit_ridge(Xtr, Ytr, pen, link).linear_predictor(Xte);
  };
  CvResult res = cross_validate_penalty(X, Y, link, fp, grid, folds, seed);
  if (cv) *cv = res;
  return fit_ridge(X, Y, res.best_penalty, link);
}

PcrModel fit_pcr_cv(const Matrix& X, const Matrix& Y, Index latents, Link link, const std::vector<double>& grid,
                    int folds, Seed seed, CvResult* cv) {
  const FitPredict fp = [latents, link](const Matrix& Xtr, const Matrix& Ytr, const Matrix& Xte, double pen) {
    return fit_pcr(Xtr, Ytr, latents, link, pen).linear_predictor(Xte);
  };
  CvResult res = cross_validate_penalty(X, Y, link, fp, grid, folds, seed);
  if (cv) *cv = res;
  return fit_pcr(X, Y, latents, link, res.best_penalty);
}

}  // namespace gpcr

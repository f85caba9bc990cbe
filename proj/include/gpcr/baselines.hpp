#pragma once

// PCA, principal component regression, ridge regression, and L2-penalized
// logistic regression, with k-fold penalty selection.

#include <functional>
#include <vector>

#include <gpcr/objectives.hpp>
#include <gpcr/types.hpp>

namespace gpcr {

struct Pca {
  Matrix components;       ///< p x L, orthonormal columns
  Vector singular_values;  ///< L, of the demeaned data
  Vector mean_offset;      ///< p
};

/// SVD of the demeaned rows. Each component's largest-magnitude entry is
/// made positive.
Pca fit_pca(const Matrix& X, Index latents);

/// Linear model on raw covariates: prediction = X coef + intercept (then the
/// sigmoid for the logistic link). Logistic models have one output.
struct RidgeModel {
  Matrix coef;  ///< p x K
  Vector intercept;
  double penalty = 0.0;
  Link link = Link::gaussian;

  Matrix linear_predictor(const Matrix& X) const;
  Matrix predict(const Matrix& X) const;
};

/// Penalized least squares (gaussian) or penalized logistic regression by
/// Newton-Raphson (logistic). The intercept is never penalized.
RidgeModel fit_ridge(const Matrix& X, const Matrix& Y, double penalty, Link link = Link::gaussian);

struct PcrModel {
  Matrix components;     ///< p x L
  Vector mean_offset;    ///< p
  PredictiveHead head;   ///< regression on the component scores
  double penalty = 0.0;

  Matrix scores(const Matrix& X) const;
  Matrix linear_predictor(const Matrix& X) const;
  Matrix predict(const Matrix& X) const;
  /// Composition of projection and head coefficients, p x K.
  Matrix effective_coef() const;
};

PcrModel fit_pcr(const Matrix& X, const Matrix& Y, Index latents, Link link, double penalty);

/// Log-spaced penalties 1e-4, 1e-3, ..., 1e4.
std::vector<double> default_penalty_grid();

/// Fold index per row. Classification folds are stratified by label.
std::vector<int> make_folds(const Vector& y, int folds, bool stratified, Seed seed);

struct CvResult {
  double best_penalty = 0.0;
  std::vector<double> penalties;
  std::vector<double> scores;  ///< mean held-out loss per penalty (lower is better)
};

/// Predicts held-out linear predictors from (X_train, Y_train, X_test, penalty).
using FitPredict = std::function<Matrix(const Matrix&, const Matrix&, const Matrix&, double)>;

/// Held-out loss: mean squared error (gaussian) or mean deviance (logistic).
CvResult cross_validate_penalty(const Matrix& X, const Matrix& Y, Link link, const FitPredict& fit_predict,
                                const std::vector<double>& grid, int folds, Seed seed);

RidgeModel fit_ridge_cv(const Matrix& X, const Matrix& Y, Link link, const std::vector<double>& grid, int folds,
                        Seed seed, CvResult* cv = nullptr);

PcrModel fit_pcr_cv(const Matrix& X, const Matrix& Y, Index latents, Link link, const std::vector<double>& grid,
                    int folds, Seed seed, CvResult* cv = nullptr);

}  // namespace gpcr

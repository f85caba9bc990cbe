#pragma once

// Training objectives over a FactorModel plus a predictive head p(y | z).
//
//   gpcr:     sum_i log p(x_i) + mu * E_{p(z|x_i)}[log p(y_i | z)]
//   weighted: sum_i log p(x_i) + mu * log p(y_i | x_i)      (gaussian head)
//   svae:     sum_i -KL(q(z|x_i) || p(z)) + E_q[log p(x_i|z)]
//                   + mu * E_q[log p(y_i | z)]
//
// All gradients are closed form. Values are sums over rows, not means.

#include <string>
#include <vector>

#include <gpcr/factor_model.hpp>
#include <gpcr/types.hpp>

namespace gpcr {

enum class Link { gaussian, logistic };

std::string to_string(Link link);
Link link_from_string(const std::string& s);

/// Linear head on the latent space with K outputs. Logistic heads have K = 1
/// and labels in {0, 1}; gaussian heads share one noise variance.
struct PredictiveHead {
  Matrix coef;                    ///< L x K
  Vector intercept;               ///< K
  Link link = Link::gaussian;
  double noise_var = 1.0;         ///< gaussian link only
  std::vector<bool> supervised;   ///< length L; false rows of coef stay zero

  static PredictiveHead zeros(Index latents, Index outputs, Link link, double noise_var,
                              std::vector<bool> supervised);
  /// All factors supervised, or only the first when `first_only`.
  static std::vector<bool> mask(Index latents, bool first_only);

  Index latents() const { return coef.rows(); }
  Index outputs() const { return coef.cols(); }
  void apply_mask();
  void validate() const;
  /// Linear predictor scores * coef + intercept, N x K.
  Matrix linear_predictor(const Matrix& scores) const;
  /// Mean of y given latent scores: identity for gaussian, sigmoid for logistic.
  Matrix mean_response(const Matrix& scores) const;
};

/// q(z | x) = N(A x + intercept, diag(variances)).
struct LinearEncoder {
  Matrix A;           ///< L x p
  Vector intercept;   ///< L
  Vector variances;   ///< L, positive

  void validate() const;
  /// Encoder means for demeaned rows, N x L.
  Matrix means(const Matrix& X) const;
};

struct ObjectiveConfig {
  double mu = 1.0;
  int mc_samples_train = 8;
  int mc_samples_eval = 256;
  Seed seed = 0;

  void validate() const;
};

enum class McPhase { train, eval };

/// Mean over the rows of Z (latent draws) of log p(y | z). `y` has K entries.
double head_loglik(const PredictiveHead& head, const Matrix& Z, const Vector& y);

struct GenerativeGrad {
  Matrix loadings;      ///< p x L
  Vector log_variances; ///< p (per coordinate even for isotropic models)
  Matrix coef;          ///< L x K
  Vector intercept;     ///< K
};

struct EncoderGrad {
  Matrix A;
  Vector intercept;
  Vector log_variances;
};

/// Individual terms of an objective value, for diagnostics.
struct ObjectiveTerms {
  double marginal = 0.0;        ///< sum log p(x_i), gpcr only
  double kl = 0.0;              ///< sum KL(q || prior), svae only
  double reconstruction = 0.0;  ///< sum E_q log p(x_i | z), svae only
  double supervision = 0.0;     ///< unweighted sum of expected log p(y_i | z)
};

struct GpcrEvaluation {
  double value = 0.0;
  ObjectiveTerms terms;
  GenerativeGrad grad;
};

struct SvaeEvaluation {
  double value = 0.0;
  ObjectiveTerms terms;
  GenerativeGrad grad;
  EncoderGrad encoder_grad;
};

/// Standard-normal draws for the reparameterized expectations: (N*S) x L,
/// rows [i*S, (i+1)*S) belong to observation i.
Matrix mc_draws(Index rows, Index draws, Index latents, Seed seed);

/// X demeaned (N x p), Y is N x K. The gaussian-link expectation is exact;
/// the logistic link uses cfg.mc_samples_{train,eval} reparameterized draws
/// z = mean_map x + chol * eps seeded by cfg.seed.
GpcrEvaluation gpcr_objective(const FactorModel& model, const PredictiveHead& head, const Matrix& X,
                              const Matrix& Y, const ObjectiveConfig& cfg,
                              McPhase phase = McPhase::eval, bool with_grad = true);

/// Exact weighted-conditional objective; gaussian heads only.
double weighted_conditional_objective(const FactorModel& model, const PredictiveHead& head,
                                      const Matrix& X, const Matrix& Y, double mu);

/// The reconstruction expectation and KL are evaluated in closed form (both
/// are exact for a linear decoder); the supervision expectation is exact for
/// the gaussian link and reparameterized for the logistic link.
SvaeEvaluation svae_objective(const FactorModel& model, const PredictiveHead& head,
                              const LinearEncoder& enc, const Matrix& X, const Matrix& Y,
                              const ObjectiveConfig& cfg, McPhase phase = McPhase::eval,
                              bool with_grad = true);

/// KL(N(m, diag(d)) || N(0, I)).
double gaussian_kl_to_standard(const Vector& mean, const Vector& variances);

/// Convert a single outcome vector into an N x 1 matrix.
Matrix as_column(const Vector& y);

}  // namespace gpcr

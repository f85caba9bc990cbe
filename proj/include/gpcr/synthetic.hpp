#pragma once

// Synthetic benchmark data with one low-variance predictive factor, and the
// stimulation-efficacy experiment built on it.
//
//   z ~ N(0, diag(lambda1, 1, ..., 1))
//   x | z ~ N(W z, sigma2 I),  W[:, 0] = 1 on the first `block` covariates
//   y* ~ N(z_1, tau),  y = 1{y* > 0}

#include <string>
#include <vector>

#include <gpcr/baselines.hpp>
#include <gpcr/factor_model.hpp>
#include <gpcr/objectives.hpp>
#include <gpcr/types.hpp>

namespace gpcr {

struct SynthConfig {
  Index p = 440;
  Index latents = 10;
  Index n = 2000;
  double sigma2 = 1.0;
  double lambda1 = 0.2;
  double tau = 0.001;
  Index block = 40;
  Seed seed = 0;

  void validate() const;
  /// Prior variances of z: lambda1 then ones.
  Vector prior_variances() const;
};

struct SynthData {
  Matrix X;       ///< n x p
  Vector y;       ///< n, in {0, 1}
  Vector y_star;  ///< n
  Matrix Z;       ///< n x latents
  Matrix W_true;  ///< p x latents
  SynthConfig config;
};

SynthData generate(const SynthConfig& cfg);

/// Pool = the k_pool largest |weights| (ties broken by ascending index); each
/// stimulation draws k_stim distinct pool members uniformly.
std::vector<std::vector<Index>> select_targets(const Vector& weights, Index k_pool, Index k_stim, Index n_stims,
                                               Seed seed);

/// Change in the true-model posterior mean of z_1 per unit shift of each
/// covariate: e_1^T M^-1 W^T / sigma2 with M = diag(1/lambda_z) + W^T W / sigma2.
Vector stim_response(const SynthData& data);

struct StimResult {
  std::vector<double> per_stim_shift;
  double mean_shift = 0.0;
  std::string model_tag;
};

StimResult stim_efficacy(const SynthData& data, const std::vector<std::vector<Index>>& targets, double delta,
                         const std::string& model_tag);

/// |loadings column| of the first supervised factor.
Vector loading_saliency(const FactorModel& model, const PredictiveHead& head);

/// |components * coefficients| for the first outcome.
Vector pcr_saliency(const PcrModel& model);

}  // namespace gpcr

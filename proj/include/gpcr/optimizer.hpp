#pragma once

// Full-batch gradient ascent with momentum for the gPCR and SVAE
// objectives, plus a central finite-difference gradient verifier.

#include <functional>
#include <string>
#include <vector>

#include <gpcr/factor_model.hpp>
#include <gpcr/objectives.hpp>
#include <gpcr/types.hpp>

namespace gpcr {

enum class InitKind {
  pca_warm_start,   ///< W from the top-L principal directions, noise from residuals
  random_gaussian,  ///< W ~ N(0, init_scale^2), noise from column variances
  automatic,        ///< pca_warm_start when mu == 0, random_gaussian otherwise
};

std::string to_string(InitKind k);
InitKind init_kind_from_string(const std::string& s);

struct TrainConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int max_iters = 5000;
  double rel_tol = 1e-7;
  int patience = 50;
  /// Independent fits from different random starts; the one with the
  /// highest evaluation objective is returned.
  int restarts = 1;
  Seed seed = 0;
  InitKind init = InitKind::pca_warm_start;
  double init_scale = 0.1;
  bool isotropic = false;        ///< PPCA restriction Lambda = sigma^2 I
  double variance_floor = 1e-6;
  /// Right-multiply encoder weight gradients by (X^T X / N + eps I)^-1.
  bool precondition_encoder = true;

  void validate() const;
};

/// How the predictive head is set up before training.
struct HeadSpec {
  Link link = Link::logistic;
  double noise_var = 1.0;
  bool mask_first_factor = true;
};

struct TraceRecord {
  int iteration = 0;
  double objective = 0.0;  ///< per-sample objective (value / N)
  double grad_norm = 0.0;
};

using TraceSink = std::function<void(const TraceRecord&)>;

struct AscentResult {
  Vector best;  ///< iterate with the highest recorded objective
  std::vector<TraceRecord> trace;
  int best_iteration = 0;
};

/// Returns the objective at theta and writes its gradient into `grad`.
using ObjectiveFn = std::function<double(const Vector& theta, Vector& grad)>;

/// The momentum ascent loop used by the model fits, for an arbitrary smooth
/// objective. Stops after `patience` consecutive iterations whose relative
/// objective change is at most rel_tol, or at max_iters.
AscentResult gradient_ascent(Vector theta, const ObjectiveFn& objective, const TrainConfig& cfg,
                             const TraceSink& sink = {});

struct GpcrFit {
  FactorModel model;
  PredictiveHead head;
  std::vector<TraceRecord> trace;  ///< of the returned restart
  int best_iteration = 0;
  int restart = 0;  ///< index of the returned restart
};

struct SvaeFit {
  FactorModel model;
  PredictiveHead head;
  LinearEncoder encoder;
  std::vector<TraceRecord> trace;
  int best_iteration = 0;
  int restart = 0;
};

/// X holds raw rows; the column means become the model's mean_offset. The
/// trace sink sees the records of every restart in turn.
GpcrFit fit_gpcr(const Matrix& X, const Matrix& Y, Index latents, const HeadSpec& head,
                 const ObjectiveConfig& obj_cfg, const TrainConfig& train_cfg,
                 const TraceSink& sink = {});

SvaeFit fit_svae(const Matrix& X, const Matrix& Y, Index latents, const HeadSpec& head,
                 const ObjectiveConfig& obj_cfg, const TrainConfig& train_cfg,
                 const TraceSink& sink = {});

/// Generative parameters used to start an optimization: loadings and
/// per-coordinate variances for already-demeaned X.
struct InitialLoadings {
  Matrix loadings;
  Vector variances;
};

InitialLoadings initialize_loadings(const Matrix& Xc, Index latents, InitKind kind, double scale,
                                    bool isotropic, double floor, Seed seed);

/// Closed-form PPCA maximum likelihood for demeaned X: returns the maximized
/// log-likelihood summed over rows, with loadings/variance if requested.
double ppca_max_loglik(const Matrix& Xc, Index latents, InitialLoadings* solution = nullptr);

enum class GradObjective { gpcr, svae };

struct GradCheckInstance {
  Index dim = 10;
  Index latents = 3;
  Index rows = 20;
  Link link = Link::gaussian;
  double mu = 5.0;
  Seed seed = 0;
  bool mask_first_factor = false;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  Index parameters = 0;
};

/// Central differences with step 1e-5 against the analytic gradient. The
/// Monte Carlo draws are shared between evaluations. Relative error per
/// coordinate is |a - f| / max(|a|, |f|, 1).
GradCheckReport check_gradients(GradObjective objective, const GradCheckInstance& instance,
                                double step = 1e-5);

}  // namespace gpcr

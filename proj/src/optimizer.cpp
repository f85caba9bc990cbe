#include <gpcr/optimizer.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>

#include <gpcr/error.hpp>

namespace gpcr {

namespace {

// Flat parameter vector layout:
//   [W (p*L, column-major) | log variances (p, or 1 if isotropic) |
//    coef (L*K) | intercept (K) | A (L*p) | encoder intercept (L) |
//    encoder log variances (L)]
struct Layout {
  Index p = 0, L = 0, K = 0;
  bool isotropic = false;
  bool encoder = false;

  Index n_var() const { return isotropic ? 1 : p; }
  Index off_W() const { return 0; }
  Index off_var() const { return p * L; }
  Index off_coef() const { return off_var() + n_var(); }
  Index off_int() const { return off_coef() + L * K; }
  Index off_A() const { return off_int() + K; }
  Index off_a() const { return off_A() + L * p; }
  Index off_d() const { return off_a() + L; }
  Index size() const { return encoder ? off_d() + L : off_A(); }
};

struct Unpacked {
  FactorModel model;
  PredictiveHead head;
  LinearEncoder encoder;
};

Unpacked unpack(const Vector& theta, const Layout& lay, const PredictiveHead& tmpl,
                const Vector& mean_offset) {
  Matrix W = Eigen::Map<const Matrix>(theta.data() + lay.off_W(), lay.p, lay.L);
  Vector var(lay.p);
  if (lay.isotropic) var.setConstant(std::exp(theta[lay.off_var()]));
  else var = theta.segment(lay.off_var(), lay.p).array().exp().matrix();
  PredictiveHead head = tmpl;
  head.coef = Eigen::Map<const Matrix>(theta.data() + lay.off_coef(), lay.L, lay.K);
  head.intercept = theta.segment(lay.off_int(), lay.K);
  LinearEncoder enc;
  if (lay.encoder) {
    enc.A = Eigen::Map<const Matrix>(theta.data() + lay.off_A(), lay.L, lay.p);
    enc.intercept = theta.segment(lay.off_a(), lay.L);
    enc.variances = theta.segment(lay.off_d(), lay.L).array().exp().matrix();
  }
  return Unpacked{FactorModel(std::move(W), std::move(var), mean_offset, lay.isotropic), std::move(head),
                  std::move(enc)};
}

void pack_generative(Vector& out, const Layout& lay, const Matrix& W, const Vector& log_var,
                     const Matrix& coef, const Vector& intercept) {
  Eigen::Map<Matrix>(out.data() + lay.off_W(), lay.p, lay.L) = W;
  if (lay.isotropic) out[lay.off_var()] = log_var.sum();
  else out.segment(lay.off_var(), lay.p) = log_var;
  Eigen::Map<Matrix>(out.data() + lay.off_coef(), lay.L, lay.K) = coef;
  out.segment(lay.off_int(), lay.K) = intercept;
}

void pack_encoder(Vector& out, const Layout& lay, const Matrix& A, const Vector& a, const Vector& log_d) {
  Eigen::Map<Matrix>(out.data() + lay.off_A(), lay.L, lay.p) = A;
  out.segment(lay.off_a(), lay.L) = a;
  out.segment(lay.off_d(), lay.L) = log_d;
}

struct Evaluation {
  double value = 0.0;
  Vector grad;
  ObjectiveTerms terms;
};

using Evaluator = std::function<Evaluation(const Vector& theta, Seed draw_seed, bool with_grad)>;

void check_finite(const Evaluation& ev, int iter) {
  if (std::isfinite(ev.value) && ev.grad.allFinite()) return;
  std::string term = "gradient";
  if (!std::isfinite(ev.terms.marginal)) term = "marginal log-likelihood";
  else if (!std::isfinite(ev.terms.reconstruction)) term = "reconstruction";
  else if (!std::isfinite(ev.terms.kl)) term = "KL divergence";
  else if (!std::isfinite(ev.terms.supervision)) term = "supervision";
  throw NumericError("non-finite " + term + " at iteration " + std::to_string(iter) +
                     "; try a smaller learning rate");
}

Seed mix_seed(Seed base, std::uint64_t k) {
  // splitmix64 finalizer
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

AscentResult momentum_ascent(Vector theta, const Evaluator& evaluate, const TrainConfig& cfg,
                             double rows, const std::function<void(Vector&)>& precondition,
                             const std::function<void(Vector&)>& project, const TraceSink& sink) {
  Vector velocity = Vector::Zero(theta.size());
  AscentResult out;
  out.best = theta;
  double best_value = -std::numeric_limits<double>::infinity();
  double previous = std::numeric_limits<double>::quiet_NaN();
  int quiet = 0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    Evaluation ev;
    try {
      ev = evaluate(theta, mix_seed(cfg.seed, static_cast<std::uint64_t>(it)), true);
    } catch (const InputError& e) {
      // Inputs were valid at the start, so a rejection later means the
      // iterates diverged.
      if (it == 0) throw;
      throw NumericError("optimization diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    check_finite(ev, it);
    const double value = ev.value / rows;
    Vector g = ev.grad / rows;
    TraceRecord rec{it, value, g.norm()};
    out.trace.push_back(rec);
    if (sink) sink(rec);
    if (value > best_value) {
      best_value = value;
      out.best = theta;
      out.best_iteration = it;
    }
    if (std::isfinite(previous) && std::abs(value - previous) <= cfg.rel_tol * std::abs(previous)) {
      if (++quiet >= cfg.patience) break;
    } else {
      quiet = 0;
    }
    previous = value;
    if (precondition) precondition(g);
    velocity = cfg.momentum * velocity + g;
    theta += cfg.learning_rate * velocity;
    project(theta);
  }
  return out;
}

Vector column_means(const Matrix& X) { return X.colwise().mean().transpose(); }

double initial_intercept(const Matrix& Y, Index k, Link link) {
  const double m = Y.col(k).mean();
  if (link == Link::gaussian) return m;
  const double clipped = std::clamp(m, 1e-3, 1.0 - 1e-3);
  return std::log(clipped / (1.0 - clipped));
}

void check_fit_inputs(const Matrix& X, const Matrix& Y, Index latents, const HeadSpec& spec) {
  if (X.rows() < 2) throw InputError("fit: need at least 2 rows");
  if (latents < 1) throw InputError("fit: latent count must be at least 1");
  if (latents > std::min(X.rows(), X.cols())) throw InputError("fit: latent count exceeds min(N, p)");
  if (Y.rows() != X.rows()) throw InputError("fit: X and y row counts differ");
  if (Y.cols() < 1) throw InputError("fit: no outcome columns");
  if (spec.link == Link::logistic && Y.cols() != 1) throw InputError("fit: logistic link needs exactly one outcome column");
  if (!X.allFinite() || !Y.allFinite()) throw InputError("fit: inputs contain non-finite values");
}

PredictiveHead head_template(const HeadSpec& spec, Index latents, const Matrix& Y) {
  PredictiveHead h = PredictiveHead::zeros(latents, Y.cols(), spec.link, spec.noise_var,
                                           PredictiveHead::mask(latents, spec.mask_first_factor));
  for (Index k = 0; k < Y.cols(); ++k) h.intercept[k] = initial_intercept(Y, k, spec.link);
  return h;
}

InitKind resolve_init(InitKind k, double mu) {
  if (k != InitKind::automatic) return k;
  return mu == 0.0 ? InitKind::pca_warm_start : InitKind::random_gaussian;
}

std::function<void(Vector&)> projector(const Layout& lay, const PredictiveHead& tmpl, double floor) {
  const double log_floor = std::log(floor);
  return [lay, tmpl, log_floor](Vector& theta) {
    auto lv = theta.segment(lay.off_var(), lay.n_var());
    lv = lv.cwiseMax(log_floor);
    for (Index l = 0; l < lay.L; ++l)
      if (!tmpl.supervised[static_cast<std::size_t>(l)])
        for (Index k = 0; k < lay.K; ++k) theta[lay.off_coef() + k * lay.L + l] = 0.0;
    if (lay.encoder) {
      auto ld = theta.segment(lay.off_d(), lay.L);
      ld = ld.cwiseMax(log_floor);
    }
  };
}

}  // namespace

AscentResult gradient_ascent(Vector theta, const ObjectiveFn& objective, const TrainConfig& cfg,
                             const TraceSink& sink) {
  cfg.validate();
  const Evaluator evaluate = [&](const Vector& th, Seed, bool) {
    Evaluation ev{0.0, Vector::Zero(th.size()), {}};
    ev.value = objective(th, ev.grad);
    return ev;
  };
  return momentum_ascent(std::move(theta), evaluate, cfg, 1.0, {}, [](Vector&) {}, sink);
}

std::string to_string(InitKind k) {
  switch (k) {
    case InitKind::pca_warm_start: return "pca";
    case InitKind::random_gaussian: return "random";
    case InitKind::automatic: return "auto";
  }
  return "auto";
}

InitKind init_kind_from_string(const std::string& s) {
  if (s == "pca") return InitKind::pca_warm_start;
  if (s == "random") return InitKind::random_gaussian;
  if (s == "auto") return InitKind::automatic;
  throw InputError("unknown init '" + s + "' (expected pca, random or auto)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InputError("train config: learning_rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InputError("train config: momentum must be in [0, 1)");
  if (!(rel_tol > 0.0)) throw InputError("train config: rel_tol must be positive");
  if (max_iters < 1) throw InputError("train config: max_iters must be at least 1");
  if (patience < 1) throw InputError("train config: patience must be at least 1");
  if (restarts < 1) throw InputError("train config: restarts must be at least 1");
  if (!(variance_floor > 0.0)) throw InputError("train config: variance_floor must be positive");
  if (!(init_scale > 0.0)) throw InputError("train config: init_scale must be positive");
}

double ppca_max_loglik(const Matrix& Xc, Index latents, InitialLoadings* solution) {
  const Index N = Xc.rows();
  const Index p = Xc.cols();
  if (latents >= p) throw InputError("ppca: latent count must be below the dimension");
  Eigen::BDCSVD<Matrix> svd(Xc, Eigen::ComputeThinV);
  const Vector eig = svd.singularValues().array().square() / static_cast<double>(N);
  const double total = Xc.colwise().squaredNorm().sum() / static_cast<double>(N);
  const double top = eig.head(latents).sum();
  const double sigma2 = (total - top) / static_cast<double>(p - latents);
  if (!(sigma2 > 0.0)) throw NumericError("ppca: residual variance is not positive");
  const double Nd = static_cast<double>(N);
  const double ll = -0.5 * Nd *
                    (static_cast<double>(p) * std::log(2.0 * M_PI) + eig.head(latents).array().log().sum() +
                     static_cast<double>(p - latents) * std::log(sigma2) + static_cast<double>(p));
  if (solution) {
    const Vector scale = (eig.head(latents).array() - sigma2).cwiseMax(0.0).sqrt();
    solution->loadings = svd.matrixV().leftCols(latents) * scale.asDiagonal();
    solution->variances = Vector::Constant(p, sigma2);
  }
  return ll;
}

InitialLoadings initialize_loadings(const Matrix& Xc, Index latents, InitKind kind, double scale,
                                    bool isotropic, double floor, Seed seed) {
  const Index p = Xc.cols();
  const double Nd = static_cast<double>(Xc.rows());
  const Vector col_var = Xc.colwise().squaredNorm().transpose() / Nd;
  InitialLoadings init;
  if (kind == InitKind::random_gaussian) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, scale);
    init.loadings.resize(p, latents);
    for (Index l = 0; l < latents; ++l)
      for (Index j = 0; j < p; ++j) init.loadings(j, l) = normal(rng);
    init.variances = isotropic ? Vector::Constant(p, col_var.mean()) : col_var;
  } else {
    Eigen::BDCSVD<Matrix> svd(Xc, Eigen::ComputeThinV);
    const Vector eig = svd.singularValues().array().square() / Nd;
    const double residual =
        latents < p ? (col_var.sum() - eig.head(latents).sum()) / static_cast<double>(p - latents) : floor;
    const double sigma2 = std::max(residual, floor);
    const Vector s = (eig.head(latents).array() - sigma2).cwiseMax(1e-3 * sigma2).sqrt();
    init.loadings = svd.matrixV().leftCols(latents) * s.asDiagonal();
    if (isotropic) {
      init.variances = Vector::Constant(p, sigma2);
    } else {
      const Vector explained = init.loadings.rowwise().squaredNorm();
      init.variances = (col_var - explained).cwiseMax(std::max(floor, 1e-3 * col_var.mean()));
    }
  }
  init.variances = init.variances.cwiseMax(floor);
  // Sign convention: the largest-magnitude entry of each column is positive.
  for (Index l = 0; l < latents; ++l) {
    Index arg = 0;
    init.loadings.col(l).cwiseAbs().maxCoeff(&arg);
    if (init.loadings(arg, l) < 0.0) init.loadings.col(l) *= -1.0;
  }
  return init;
}

namespace {

GpcrFit fit_gpcr_once(const Matrix& X, const Matrix& Y, Index latents, const HeadSpec& spec,
                      const ObjectiveConfig& obj_cfg, const TrainConfig& cfg, const TraceSink& sink) {
  check_fit_inputs(X, Y, latents, spec);
  obj_cfg.validate();
  cfg.validate();
  const Vector mean = column_means(X);
  const Matrix Xc = X.rowwise() - mean.transpose();
  const PredictiveHead tmpl = head_template(spec, latents, Y);
  const InitialLoadings init = initialize_loadings(Xc, latents, resolve_init(cfg.init, obj_cfg.mu), cfg.init_scale,
                                                   cfg.isotropic, cfg.variance_floor, cfg.seed);

  Layout lay{Xc.cols(), latents, Y.cols(), cfg.isotropic, false};
  Vector theta(lay.size());
  Vector log_var = init.variances.array().log().matrix();
  if (cfg.isotropic) log_var = Vector::Constant(1, log_var[0]);
  pack_generative(theta, lay, init.loadings, log_var, tmpl.coef, tmpl.intercept);

  Evaluator evaluate = [&](const Vector& th, Seed draw_seed, bool with_grad) {
    Unpacked u = unpack(th, lay, tmpl, Vector());
    ObjectiveConfig oc = obj_cfg;
    oc.seed = draw_seed;
    GpcrEvaluation ev = gpcr_objective(u.model, u.head, Xc, Y, oc, McPhase::train, with_grad);
    Evaluation out{ev.value, Vector(), ev.terms};
    if (with_grad) {
      out.grad.resize(lay.size());
      pack_generative(out.grad, lay, ev.grad.loadings, ev.grad.log_variances, ev.grad.coef, ev.grad.intercept);
    }
    return out;
  };
  AscentResult res = momentum_ascent(std::move(theta), evaluate, cfg, static_cast<double>(Xc.rows()), {},
                                     projector(lay, tmpl, cfg.variance_floor), sink);
  Unpacked best = unpack(res.best, lay, tmpl, mean);
  return GpcrFit{std::move(best.model), std::move(best.head), std::move(res.trace), res.best_iteration};
}

SvaeFit fit_svae_once(const Matrix& X, const Matrix& Y, Index latents, const HeadSpec& spec,
                      const ObjectiveConfig& obj_cfg, const TrainConfig& cfg, const TraceSink& sink) {
  check_fit_inputs(X, Y, latents, spec);
  obj_cfg.validate();
  cfg.validate();
  const Vector mean = column_means(X);
  const Matrix Xc = X.rowwise() - mean.transpose();
  const PredictiveHead tmpl = head_template(spec, latents, Y);
  const InitialLoadings init = initialize_loadings(Xc, latents, resolve_init(cfg.init, obj_cfg.mu), cfg.init_scale,
                                                   cfg.isotropic, cfg.variance_floor, cfg.seed);

  Layout lay{Xc.cols(), latents, Y.cols(), cfg.isotropic, true};
  Vector theta(lay.size());
  Vector log_var = init.variances.array().log().matrix();
  if (cfg.isotropic) log_var = Vector::Constant(1, log_var[0]);
  pack_generative(theta, lay, init.loadings, log_var, tmpl.coef, tmpl.intercept);
  {
    // Encoder starts at the analytic posterior of the initial model.
    const GaussianPosterior post = posterior(FactorModel(init.loadings, init.variances));
    pack_encoder(theta, lay, post.mean_map, Vector::Zero(latents),
                 post.cov.diagonal().cwiseMax(cfg.variance_floor).array().log().matrix());
  }

  Evaluator evaluate = [&](const Vector& th, Seed draw_seed, bool with_grad) {
    Unpacked u = unpack(th, lay, tmpl, Vector());
    ObjectiveConfig oc = obj_cfg;
    oc.seed = draw_seed;
    SvaeEvaluation ev = svae_objective(u.model, u.head, u.encoder, Xc, Y, oc, McPhase::train, with_grad);
    Evaluation out{ev.value, Vector(), ev.terms};
    if (with_grad) {
      out.grad.resize(lay.size());
      pack_generative(out.grad, lay, ev.grad.loadings, ev.grad.log_variances, ev.grad.coef, ev.grad.intercept);
      pack_encoder(out.grad, lay, ev.encoder_grad.A, ev.encoder_grad.intercept, ev.encoder_grad.log_variances);
    }
    return out;
  };

  std::function<void(Vector&)> precondition;
  if (cfg.precondition_encoder) {
    const Index p = Xc.cols();
    Matrix second = Xc.transpose() * Xc / static_cast<double>(Xc.rows());
    const double ridge = 1e-3 * second.trace() / static_cast<double>(p);
    second.diagonal().array() += ridge;
    Eigen::LLT<Matrix> llt(second);
    if (llt.info() != Eigen::Success) throw NumericError("encoder preconditioner factorization failed");
    Matrix inv = llt.solve(Matrix::Identity(p, p));
    precondition = [lay, inv = std::move(inv)](Vector& g) {
      Eigen::Map<Matrix> gA(g.data() + lay.off_A(), lay.L, lay.p);
      gA = gA * inv;
    };
  }
  AscentResult res = momentum_ascent(std::move(theta), evaluate, cfg, static_cast<double>(Xc.rows()),
                                     precondition, projector(lay, tmpl, cfg.variance_floor), sink);
  Unpacked best = unpack(res.best, lay, tmpl, mean);
  return SvaeFit{std::move(best.model), std::move(best.head), std::move(best.encoder), std::move(res.trace),
                 res.best_iteration};
}

// Runs cfg.restarts independent fits and keeps the one whose objective,
// evaluated with the fixed evaluation draws, is highest. The first restart
// uses cfg.seed unchanged.
template <typename Fit, typename FitOnce, typename Score>
Fit best_of_restarts(const TrainConfig& cfg, const FitOnce& fit_once, const Score& score) {
  std::optional<Fit> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < cfg.restarts; ++r) {
    TrainConfig run = cfg;
    if (r > 0) run.seed = mix_seed(cfg.seed, 0x5eed0000ULL + static_cast<std::uint64_t>(r));
    Fit fit = fit_once(run);
    fit.restart = r;
    const double value = cfg.restarts > 1 ? score(fit) : 0.0;
    if (!best || value > best_score) {
      best_score = value;
      best = std::move(fit);
    }
  }
  return std::move(*best);
}

}  // namespace

GpcrFit fit_gpcr(const Matrix& X, const Matrix& Y, Index latents, const HeadSpec& spec,
                 const ObjectiveConfig& obj_cfg, const TrainConfig& cfg, const TraceSink& sink) {
  cfg.validate();
  return best_of_restarts<GpcrFit>(
      cfg, [&](const TrainConfig& run) { return fit_gpcr_once(X, Y, latents, spec, obj_cfg, run, sink); },
      [&](const GpcrFit& f) {
        return gpcr_objective(f.model, f.head, f.model.demean(X), Y, obj_cfg, McPhase::eval, false).value;
      });
}

SvaeFit fit_svae(const Matrix& X, const Matrix& Y, Index latents, const HeadSpec& spec,
                 const ObjectiveConfig& obj_cfg, const TrainConfig& cfg, const TraceSink& sink) {
  cfg.validate();
  return best_of_restarts<SvaeFit>(
      cfg, [&](const TrainConfig& run) { return fit_svae_once(X, Y, latents, spec, obj_cfg, run, sink); },
      [&](const SvaeFit& f) {
        return svae_objective(f.model, f.head, f.encoder, f.model.demean(X), Y, obj_cfg, McPhase::eval, false)
            .value;
      });
}

GradCheckReport check_gradients(GradObjective objective, const GradCheckInstance& inst, double step) {
  if (inst.dim > 12 || inst.latents > 3 || inst.rows > 25) {
    throw InputError("check_gradients: instance must have p <= 12, L <= 3, N <= 25");
  }
  if (inst.latents > inst.dim) throw InputError("check_gradients: latent count exceeds dimension");
  std::mt19937_64 rng(inst.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  const Index p = inst.dim, L = inst.latents, N = inst.rows;

  Matrix W(p, L);
  for (Index j = 0; j < p; ++j)
    for (Index l = 0; l < L; ++l) W(j, l) = normal(rng);
  Vector log_var(p);
  for (Index j = 0; j < p; ++j) log_var[j] = unif(rng);
  const FactorModel truth(W, log_var.array().exp().matrix());
  const Matrix X = sample(truth, N, inst.seed + 1).X;
  Matrix Y(N, 1);
  for (Index i = 0; i < N; ++i) {
    const double t = X.row(i).head(std::min<Index>(p, 3)).sum() * 0.5 + normal(rng);
    Y(i, 0) = inst.link == Link::logistic ? (t > 0.0 ? 1.0 : 0.0) : t;
  }
  PredictiveHead tmpl = PredictiveHead::zeros(L, 1, inst.link, 0.7, PredictiveHead::mask(L, inst.mask_first_factor));
  for (Index l = 0; l < L; ++l) tmpl.coef(l, 0) = 0.5 * normal(rng);
  tmpl.intercept[0] = 0.3;
  tmpl.apply_mask();

  const bool enc = objective == GradObjective::svae;
  Layout lay{p, L, 1, false, enc};
  Vector theta(lay.size());
  Matrix W0(p, L);
  for (Index j = 0; j < p; ++j)
    for (Index l = 0; l < L; ++l) W0(j, l) = 0.7 * normal(rng);
  Vector lv0(p);
  for (Index j = 0; j < p; ++j) lv0[j] = unif(rng);
  pack_generative(theta, lay, W0, lv0, tmpl.coef, tmpl.intercept);
  if (enc) {
    Matrix A(L, p);
    for (Index l = 0; l < L; ++l)
      for (Index j = 0; j < p; ++j) A(l, j) = 0.2 * normal(rng);
    Vector a(L), ld(L);
    for (Index l = 0; l < L; ++l) {
      a[l] = 0.1 * normal(rng);
      ld[l] = unif(rng) - 1.0;
    }
    pack_encoder(theta, lay, A, a, ld);
  }

  ObjectiveConfig oc;
  oc.mu = inst.mu;
  oc.mc_samples_eval = 16;
  oc.seed = inst.seed + 7;
  auto eval = [&](const Vector& th, bool with_grad) {
    Unpacked u = unpack(th, lay, tmpl, Vector());
    Evaluation out{0.0, Vector(), {}};
    if (enc) {
      SvaeEvaluation ev = svae_objective(u.model, u.head, u.encoder, X, Y, oc, McPhase::eval, with_grad);
      out.value = ev.value;
      if (with_grad) {
        out.grad.resize(lay.size());
        pack_generative(out.grad, lay, ev.grad.loadings, ev.grad.log_variances, ev.grad.coef, ev.grad.intercept);
        pack_encoder(out.grad, lay, ev.encoder_grad.A, ev.encoder_grad.intercept, ev.encoder_grad.log_variances);
      }
    } else {
      GpcrEvaluation ev = gpcr_objective(u.model, u.head, X, Y, oc, McPhase::eval, with_grad);
      out.value = ev.value;
      if (with_grad) {
        out.grad.resize(lay.size());
        pack_generative(out.grad, lay, ev.grad.loadings, ev.grad.log_variances, ev.grad.coef, ev.grad.intercept);
      }
    }
    return out;
  };

  const Vector analytic = eval(theta, true).grad;
  GradCheckReport report;
  report.parameters = lay.size();
  auto name_of = [&](Index k) -> std::string {
    if (k < lay.off_var()) return "loadings[" + std::to_string(k % p) + "," + std::to_string(k / p) + "]";
    if (k < lay.off_coef()) return "log_variances[" + std::to_string(k - lay.off_var()) + "]";
    if (k < lay.off_int()) return "coef[" + std::to_string(k - lay.off_coef()) + "]";
    if (k < lay.off_A()) return "intercept";
    if (k < lay.off_a()) {
      const Index r = k - lay.off_A();
      return "encoder_A[" + std::to_string(r % L) + "," + std::to_string(r / L) + "]";
    }
    if (k < lay.off_d()) return "encoder_intercept[" + std::to_string(k - lay.off_a()) + "]";
    return "encoder_log_variances[" + std::to_string(k - lay.off_d()) + "]";
  };
  for (Index k = 0; k < lay.size(); ++k) {
    // Masked coefficients are not free parameters.
    if (k >= lay.off_coef() && k < lay.off_int() && !tmpl.supervised[static_cast<std::size_t>((k - lay.off_coef()) % L)]) {
      continue;
    }
    Vector up = theta, down = theta;
    up[k] += step;
    down[k] -= step;
    const double fd = (eval(up, false).value - eval(down, false).value) / (2.0 * step);
    const double a = analytic[k];
    const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1.0});
    if (rel > report.max_rel_error || report.worst_parameter.empty()) {
      report.max_rel_error = std::max(rel, report.max_rel_error);
      if (rel >= report.max_rel_error) report.worst_parameter = name_of(k);
    }
  }
  return report;
}

}  // namespace gpcr

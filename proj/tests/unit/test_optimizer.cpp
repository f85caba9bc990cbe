#include <doctest.h>

#include <cmath>

#include <gpcr/baselines.hpp>
#include <gpcr/error.hpp>
#include <gpcr/kernels.hpp>
#include <gpcr/metrics.hpp>
#include <gpcr/optimizer.hpp>
#include <gpcr/synthetic.hpp>

#include "test_helpers.hpp"

using namespace gpcr;
using gpcr::testing::random_matrix;
using gpcr::testing::random_variances;

namespace {

Matrix ppca_data(Index N, Index p, Index L, Seed seed) {
  std::mt19937_64 rng(seed);
  const FactorModel truth(random_matrix(p, L, rng), Vector::Constant(p, 0.5));
  Matrix X = sample(truth, N, seed + 1).X;
  X.rowwise() += random_matrix(1, p, rng).row(0);
  return X;
}

SynthData small_synth(Seed seed) {
  SynthConfig cfg;
  cfg.p = 60;
  cfg.latents = 4;
  cfg.n = 300;
  cfg.block = 15;
  cfg.seed = seed;
  return generate(cfg);
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig t;
  CHECK_NOTHROW(t.validate());
  t.learning_rate = 0.0;
  CHECK_THROWS_AS(t.validate(), InputError);
  t = TrainConfig{};
  t.momentum = 1.0;
  CHECK_THROWS_AS(t.validate(), InputError);
  t = TrainConfig{};
  t.rel_tol = 0.0;
  CHECK_THROWS_AS(t.validate(), InputError);
  CHECK(init_kind_from_string("pca") == InitKind::pca_warm_start);
  CHECK_THROWS_AS(init_kind_from_string("zeros"), InputError);
}

TEST_CASE("unsupervised PPCA fit reaches the closed-form maximum") {
  const Index N = 300, p = 12, L = 2;
  const Matrix X = ppca_data(N, p, L, 3);
  const Matrix Xc = X.rowwise() - X.colwise().mean();
  const double oracle = ppca_max_loglik(Xc, L);
  ObjectiveConfig oc;
  oc.mu = 0.0;
  const HeadSpec head{Link::gaussian, 1.0, false};
  for (InitKind init : {InitKind::pca_warm_start, InitKind::random_gaussian}) {
    TrainConfig t;
    t.isotropic = true;
    t.init = init;
    t.init_scale = 0.5;
    t.learning_rate = 0.05;
    t.max_iters = 4000;
    const GpcrFit f = fit_gpcr(X, Matrix::Zero(N, 1), L, head, oc, t);
    const double ll = marginal_loglik(f.model, f.model.demean(X));
    CHECK(ll <= oracle + 1e-6 * std::abs(oracle));
    CHECK(std::abs(ll - oracle) <= 0.005 * std::abs(oracle));
    CHECK(f.model.isotropic());
  }
}

TEST_CASE("minimal instance fits without numeric failure") {
  Matrix X(2, 2);
  X << 1.0, 2.0, -1.0, 0.5;
  const Matrix Y = (Matrix(2, 1) << 0.0, 1.0).finished();
  ObjectiveConfig oc;
  oc.mu = 2.0;
  TrainConfig t;
  t.max_iters = 200;
  CHECK_NOTHROW(fit_gpcr(X, Y, 1, HeadSpec{Link::logistic, 1.0, true}, oc, t));
  CHECK_NOTHROW(fit_svae(X, Y, 1, HeadSpec{Link::logistic, 1.0, true}, oc, t));
}

TEST_CASE("invalid shapes are input errors") {
  const Matrix X = Matrix::Random(5, 3);
  ObjectiveConfig oc;
  TrainConfig t;
  CHECK_THROWS_AS(fit_gpcr(X, Matrix::Zero(4, 1), 1, HeadSpec{Link::gaussian}, oc, t), InputError);
  CHECK_THROWS_AS(fit_gpcr(X, Matrix::Zero(5, 1), 4, HeadSpec{Link::gaussian}, oc, t), InputError);
  CHECK_THROWS_AS(fit_gpcr(X.topRows(1), Matrix::Zero(1, 1), 1, HeadSpec{Link::gaussian}, oc, t), InputError);
}

TEST_CASE("divergent step sizes raise a numeric error") {
  const SynthData d = small_synth(2);
  ObjectiveConfig oc;
  oc.mu = 10.0;
  TrainConfig t;
  t.learning_rate = 1e6;
  t.max_iters = 50;
  try {
    fit_gpcr(d.X, as_column(d.y_star), 3, HeadSpec{Link::gaussian, 1.0, true}, oc, t);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::numeric);
  }
}

TEST_CASE("fits are bit-reproducible for a fixed seed") {
  const SynthData d = small_synth(5);
  ObjectiveConfig oc;
  oc.mu = 60.0;
  TrainConfig t;
  t.max_iters = 150;
  t.seed = 9;
  t.init = InitKind::random_gaussian;
  const HeadSpec head{Link::logistic, 1.0, true};
  const GpcrFit a = fit_gpcr(d.X, as_column(d.y), 3, head, oc, t);
  const GpcrFit b = fit_gpcr(d.X, as_column(d.y), 3, head, oc, t);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].objective == b.trace[i].objective);
    CHECK(a.trace[i].grad_norm == b.trace[i].grad_norm);
  }
  CHECK(a.model.loadings() == b.model.loadings());
  CHECK(a.head.coef == b.head.coef);
  const SvaeFit c = fit_svae(d.X, as_column(d.y), 3, head, oc, t);
  const SvaeFit e = fit_svae(d.X, as_column(d.y), 3, head, oc, t);
  CHECK(c.encoder.A == e.encoder.A);
  CHECK(c.model.variances() == e.model.variances());
}

TEST_CASE("restarts keep the best evaluation objective") {
  const SynthData d = small_synth(11);
  ObjectiveConfig oc;
  oc.mu = 60.0;
  TrainConfig t;
  t.max_iters = 200;
  t.learning_rate = 3e-3;
  t.init = InitKind::random_gaussian;
  const Matrix Y = as_column(d.y);
  const HeadSpec head{Link::logistic, 1.0, true};
  const GpcrFit single = fit_gpcr(d.X, Y, 3, head, oc, t);
  t.restarts = 3;
  const GpcrFit multi = fit_gpcr(d.X, Y, 3, head, oc, t);
  auto eval = [&](const GpcrFit& f) {
    return gpcr_objective(f.model, f.head, f.model.demean(d.X), Y, oc, McPhase::eval, false).value;
  };
  CHECK(single.restart == 0);
  CHECK(multi.restart >= 0);
  CHECK(multi.restart < 3);
  CHECK(eval(multi) >= eval(single));
  if (multi.restart == 0) CHECK(multi.model.loadings() == single.model.loadings());
  t.restarts = 0;
  CHECK_THROWS_AS(t.validate(), InputError);
}

TEST_CASE("best iterate is returned and the running maximum is monotone") {
  const SynthData d = small_synth(6);
  ObjectiveConfig oc;
  oc.mu = 60.0;
  TrainConfig t;
  t.max_iters = 300;
  t.learning_rate = 3e-3;
  t.init = InitKind::random_gaussian;
  const GpcrFit f = fit_gpcr(d.X, as_column(d.y), 3, HeadSpec{Link::logistic, 1.0, true}, oc, t);
  double running = -1e300;
  double best = -1e300;
  for (const auto& r : f.trace) {
    CHECK(std::max(running, r.objective) >= running);
    running = std::max(running, r.objective);
    best = std::max(best, r.objective);
  }
  CHECK(f.trace[static_cast<std::size_t>(f.best_iteration)].objective == best);
}

TEST_CASE("plain gradient ascent is monotone at a small step") {
  const SynthData d = small_synth(7);
  ObjectiveConfig oc;
  oc.mu = 60.0;
  TrainConfig t;
  t.momentum = 0.0;
  t.learning_rate = 2e-4;
  t.max_iters = 100;
  t.init = InitKind::pca_warm_start;
  // The gaussian head keeps the objective deterministic across iterations.
  const GpcrFit f = fit_gpcr(d.X, as_column(d.y_star), 3, HeadSpec{Link::gaussian, 0.5, true}, oc, t);
  REQUIRE(f.trace.size() == 100);
  for (std::size_t i = 1; i < f.trace.size(); ++i) CHECK(f.trace[i].objective >= f.trace[i - 1].objective);
}

TEST_CASE("warm start never ends below its initial objective") {
  const SynthData d = small_synth(8);
  ObjectiveConfig oc;
  oc.mu = 60.0;
  TrainConfig t;
  t.init = InitKind::pca_warm_start;
  t.max_iters = 400;
  t.learning_rate = 3e-3;
  const Matrix Y = as_column(d.y);
  const GpcrFit f = fit_gpcr(d.X, Y, 3, HeadSpec{Link::logistic, 1.0, true}, oc, t);
  CHECK(f.trace[static_cast<std::size_t>(f.best_iteration)].objective >= f.trace.front().objective);
}

TEST_CASE("unsupervised SVAE encoder matches the analytic posterior map") {
  const Index N = 400, p = 10, L = 2;
  std::mt19937_64 rng(41);
  const FactorModel truth(random_matrix(p, L, rng), random_variances(p, rng, 0.3, 1.0));
  const Matrix X = sample(truth, N, 42).X;
  ObjectiveConfig oc;
  oc.mu = 0.0;
  TrainConfig t;
  t.learning_rate = 0.02;
  t.max_iters = 5000;
  t.init = InitKind::pca_warm_start;
  const SvaeFit f = fit_svae(X, Matrix::Zero(N, 1), L, HeadSpec{Link::gaussian, 1.0, false}, oc, t);
  const Matrix Xc = f.model.demean(X);
  const Matrix enc = f.encoder.means(Xc);
  const Matrix post = posterior_mean_scores(f.model, Xc);
  for (Index l = 0; l < L; ++l) CHECK(pearson(enc.col(l), post.col(l)) >= 0.99);
}

TEST_CASE("more supervision never lowers the fitted predictive log-likelihood") {
  const SynthData d = small_synth(10);
  const Matrix Y = as_column(d.y);
  double previous = -1e300;
  for (double mu : {0.0, 1.0, 10.0, 100.0}) {
    ObjectiveConfig oc;
    oc.mu = mu;
    TrainConfig t;
    t.learning_rate = 3e-3;
    t.max_iters = 1500;
    t.init = InitKind::random_gaussian;
    t.seed = 3;
    const GpcrFit f = fit_gpcr(d.X, Y, 3, HeadSpec{Link::logistic, 1.0, true}, oc, t);
    const Matrix scores = posterior_mean_scores(f.model, f.model.demean(d.X));
    double ll = 0.0;
    for (Index i = 0; i < scores.rows(); ++i)
      ll += head_loglik(f.head, scores.row(i), Y.row(i).transpose());
    MESSAGE("mu = " << mu << ": head log-likelihood " << ll);
    CHECK(ll >= previous);
    previous = ll;
  }
}

TEST_CASE("generic ascent matches Newton logistic regression") {
  std::mt19937_64 rng(43);
  const Index N = 80, p = 4;
  const Matrix X = random_matrix(N, p, rng);
  Vector y(N);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Index i = 0; i < N; ++i) y[i] = u(rng) < kernels::sigmoid(X(i, 0) - 0.5 * X(i, 2) + 0.3) ? 1.0 : 0.0;
  const double penalty = 1.0;
  const RidgeModel newton = fit_ridge(X, as_column(y), penalty, Link::logistic);

  const ObjectiveFn f = [&](const Vector& th, Vector& g) {
    const Vector w = th.head(p);
    const double b = th[p];
    const Vector t = (X * w).array() + b;
    double v = -0.5 * penalty * w.squaredNorm();
    Vector r(N);
    for (Index i = 0; i < N; ++i) {
      v += kernels::log_sigmoid(y[i] == 1.0 ? t[i] : -t[i]);
      r[i] = y[i] - kernels::sigmoid(t[i]);
    }
    g.resize(p + 1);
    g.head(p) = X.transpose() * r - penalty * w;
    g[p] = r.sum();
    return v;
  };
  TrainConfig t;
  t.learning_rate = 2e-3;
  t.max_iters = 20000;
  t.rel_tol = 1e-16;
  t.patience = 200;
  const AscentResult res = gradient_ascent(Vector::Zero(p + 1), f, t);
  CHECK((res.best.head(p) - newton.coef.col(0)).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(std::abs(res.best[p] - newton.intercept[0]) < 1e-5);
}

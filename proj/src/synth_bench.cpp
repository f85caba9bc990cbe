#include <gpcr/synth_bench.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gpcr/error.hpp>

namespace gpcr {

TrainConfig BenchConfig::default_gpcr_train() {
  TrainConfig t;
  t.learning_rate = 3e-3;
  t.max_iters = 3000;
  t.restarts = 3;
  t.init = InitKind::automatic;
  return t;
}

TrainConfig BenchConfig::default_svae_train() {
  TrainConfig t;
  t.learning_rate = 1e-3;
  t.max_iters = 3000;
  t.restarts = 3;
  t.init = InitKind::automatic;
  return t;
}

void split_rows(Index n, double test_fraction, Seed seed, std::vector<Index>& train, std::vector<Index>& test) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InputError("split: test fraction must lie in (0, 1)");
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_test = static_cast<Index>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test < 1 || n_test >= n) throw InputError("split: test fraction leaves an empty split");
  test.assign(idx.begin(), idx.begin() + n_test);
  train.assign(idx.begin() + n_test, idx.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
}

BenchResult run_synth_bench(const BenchConfig& cfg, const TraceSink& gpcr_sink, const TraceSink& svae_sink) {
  SynthData data = generate(cfg.synth);
  const Seed seed = cfg.synth.seed;
  std::vector<Index> train_rows, test_rows;
  split_rows(cfg.synth.n, cfg.test_fraction, seed + 101, train_rows, test_rows);

  const Matrix Xtr = data.X(train_rows, Eigen::all);
  const Matrix Xte = data.X(test_rows, Eigen::all);
  const Vector ytr = data.y(train_rows);
  const Vector yte = data.y(test_rows);
  const Matrix Ytr = as_column(ytr);

  ObjectiveConfig oc = cfg.objective;
  oc.mu = cfg.effective_mu();
  const HeadSpec head{Link::logistic, 1.0, true};

  TrainConfig gt = cfg.gpcr_train;
  gt.seed = seed + 202;
  GpcrFit gpcr = fit_gpcr(Xtr, Ytr, cfg.latents, head, oc, gt, gpcr_sink);

  TrainConfig st = cfg.svae_train;
  st.seed = seed + 303;
  SvaeFit svae = fit_svae(Xtr, Ytr, cfg.latents, head, oc, st, svae_sink);

  BenchResult r{std::move(data), std::move(train_rows), std::move(test_rows), std::move(gpcr), std::move(svae)};
  r.pcr = fit_pcr_cv(Xtr, Ytr, cfg.latents, Link::logistic, cfg.penalty_grid, cfg.cv_folds, seed + 404, &r.pcr_cv);

  auto gpcr_scores = [&](const Matrix& X) {
    return r.gpcr.head.linear_predictor(posterior_mean_scores(r.gpcr.model, r.gpcr.model.demean(X))).col(0).eval();
  };
  const GaussianPosterior svae_post = posterior(r.svae.model);
  auto svae_enc_means = [&](const Matrix& X) { return r.svae.encoder.means(r.svae.model.demean(X)); };
  auto svae_post_means = [&](const Matrix& X) { return (r.svae.model.demean(X) * svae_post.mean_map.transpose()).eval(); };

  const Vector s_gpcr = gpcr_scores(Xte);
  const Vector s_pcr = r.pcr.linear_predictor(Xte).col(0);
  r.svae_encoder_scores = svae_enc_means(Xte);
  r.svae_posterior_scores = svae_post_means(Xte);
  const Vector s_enc = r.svae.head.linear_predictor(r.svae_encoder_scores).col(0);
  const Vector s_post = r.svae.head.linear_predictor(r.svae_posterior_scores).col(0);

  r.roc_gpcr = roc_curve(s_gpcr, yte);
  r.roc_pcr = roc_curve(s_pcr, yte);
  r.roc_svae_encoder = roc_curve(s_enc, yte);
  r.roc_svae_posterior = roc_curve(s_post, yte);
  r.test_auc = {r.roc_gpcr.auc, r.roc_pcr.auc, r.roc_svae_encoder.auc, r.roc_svae_posterior.auc};

  r.train_auc.gpcr = auc(gpcr_scores(Xtr), ytr);
  r.train_auc.pcr = auc(r.pcr.linear_predictor(Xtr).col(0), ytr);
  r.train_auc.svae_encoder = auc(r.svae.head.linear_predictor(svae_enc_means(Xtr)).col(0), ytr);
  r.train_auc.svae_posterior = auc(r.svae.head.linear_predictor(svae_post_means(Xtr)).col(0), ytr);

  {
    // Reference ceiling: posterior mean of z_1 under the generating model.
    const Vector resp = stim_response(r.data);
    r.bayes_test_auc = auc(Xte * resp, yte);
  }

  r.discrepancy_test = discrepancy_report(r.svae.encoder, svae_post, r.svae.head, r.svae.model.demean(Xte), yte);

  r.saliency_gpcr = loading_saliency(r.gpcr.model, r.gpcr.head);
  r.saliency_svae = loading_saliency(r.svae.model, r.svae.head);
  r.saliency_pcr = pcr_saliency(r.pcr);
  const Seed stim_seed = seed + 505;
  r.stim_gpcr = stim_efficacy(r.data, select_targets(r.saliency_gpcr, cfg.k_pool, cfg.k_stim, cfg.n_stims, stim_seed),
                              cfg.delta, "gpcr");
  r.stim_svae = stim_efficacy(r.data, select_targets(r.saliency_svae, cfg.k_pool, cfg.k_stim, cfg.n_stims, stim_seed),
                              cfg.delta, "svae");
  r.stim_pcr = stim_efficacy(r.data, select_targets(r.saliency_pcr, cfg.k_pool, cfg.k_stim, cfg.n_stims, stim_seed),
                             cfg.delta, "pcr");
  return r;
}

}  // namespace gpcr

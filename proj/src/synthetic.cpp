#include <gpcr/synthetic.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gpcr/error.hpp>

namespace gpcr {

void SynthConfig::validate() const {
  if (p < 1 || latents < 1 || n < 1 || block < 1) throw InputError("synth config: counts must be positive");
  if (block > p) throw InputError("synth config: block exceeds p");
  if (latents > p) throw InputError("synth config: latents exceeds p");
  if (!(lambda1 > 0.0 && lambda1 < 1.0)) throw InputError("synth config: lambda1 must lie in (0, 1)");
  if (!(sigma2 > 0.0)) throw InputError("synth config: sigma2 must be positive");
  if (!(tau > 0.0)) throw InputError("synth config: tau must be positive");
}

Vector SynthConfig::prior_variances() const {
  Vector v = Vector::Ones(latents);
  v[0] = lambda1;
  return v;
}

SynthData generate(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SynthData d;
  d.config = cfg;
  d.W_true = Matrix::Zero(cfg.p, cfg.latents);
  d.W_true.col(0).head(cfg.block).setOnes();
  for (Index l = 1; l < cfg.latents; ++l)
    for (Index j = 0; j < cfg.p; ++j) d.W_true(j, l) = normal(rng);

  const Vector sd_z = cfg.prior_variances().cwiseSqrt();
  const double sd_x = std::sqrt(cfg.sigma2);
  const double sd_y = std::sqrt(cfg.tau);
  d.Z.resize(cfg.n, cfg.latents);
  d.X.resize(cfg.n, cfg.p);
  d.y.resize(cfg.n);
  d.y_star.resize(cfg.n);
  for (Index i = 0; i < cfg.n; ++i) {
    for (Index l = 0; l < cfg.latents; ++l) d.Z(i, l) = sd_z[l] * normal(rng);
    for (Index j = 0; j < cfg.p; ++j) d.X(i, j) = sd_x * normal(rng);
    d.y_star[i] = d.Z(i, 0) + sd_y * normal(rng);
    d.y[i] = d.y_star[i] > 0.0 ? 1.0 : 0.0;
  }
  d.X.noalias() += d.Z * d.W_true.transpose();
  return d;
}

std::vector<std::vector<Index>> select_targets(const Vector& weights, Index k_pool, Index k_stim, Index n_stims,
                                               Seed seed) {
  if (!weights.allFinite()) throw InputError("select_targets: weights contain non-finite values");
  if (k_stim > k_pool) throw InputError("select_targets: k_stim exceeds k_pool");
  if (k_pool > weights.size()) throw InputError("select_targets: k_pool exceeds the number of covariates");
  if (k_stim < 1 || n_stims < 1) throw InputError("select_targets: counts must be positive");
  std::vector<Index> order(static_cast<std::size_t>(weights.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return std::abs(weights[a]) > std::abs(weights[b]); });
  const std::vector<Index> pool(order.begin(), order.begin() + k_pool);

  std::mt19937_64 rng(seed);
  std::vector<std::vector<Index>> out;
  out.reserve(static_cast<std::size_t>(n_stims));
  std::vector<Index> scratch = pool;
  for (Index s = 0; s < n_stims; ++s) {
    // Partial Fisher-Yates over the pool.
    for (Index k = 0; k < k_stim; ++k) {
      std::uniform_int_distribution<Index> pick(k, k_pool - 1);
      std::swap(scratch[static_cast<std::size_t>(k)], scratch[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<Index> chosen(scratch.begin(), scratch.begin() + k_stim);
    std::sort(chosen.begin(), chosen.end());
    out.push_back(std::move(chosen));
  }
  return out;
}

Vector stim_response(const SynthData& data) {
  const SynthConfig& c = data.config;
  Matrix M = data.W_true.transpose() * data.W_true / c.sigma2;
  M.diagonal() += c.prior_variances().cwiseInverse();
  Eigen::LLT<Matrix> llt(M);
  if (llt.info() != Eigen::Success) throw NumericError("stim_response: true capacitance is not positive definite");
  Vector e1 = Vector::Zero(c.latents);
  e1[0] = 1.0;
  return data.W_true * llt.solve(e1) / c.sigma2;
}

StimResult stim_efficacy(const SynthData& data, const std::vector<std::vector<Index>>& targets, double delta,
                         const std::string& model_tag) {
  if (targets.empty()) throw InputError("stim_efficacy: no stimulations");
  const Vector r = stim_response(data);
  StimResult res;
  res.model_tag = model_tag;
  for (const auto& set : targets) {
    double shift = 0.0;
    for (Index j : set) {
      if (j < 0 || j >= r.size()) throw InputError("stim_efficacy: target index out of range");
      shift += delta * r[j];
    }
    res.per_stim_shift.push_back(shift);
  }
  res.mean_shift = std::accumulate(res.per_stim_shift.begin(), res.per_stim_shift.end(), 0.0) /
                   static_cast<double>(res.per_stim_shift.size());
  return res;
}

Vector loading_saliency(const FactorModel& model, const PredictiveHead& head) {
  for (Index l = 0; l < model.latents(); ++l)
    if (head.supervised[static_cast<std::size_t>(l)]) return model.loadings().col(l).cwiseAbs();
  throw InputError("saliency: head has no supervised factor");
}

Vector pcr_saliency(const PcrModel& model) { return model.effective_coef().col(0).cwiseAbs(); }

}  // namespace gpcr

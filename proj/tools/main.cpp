// gpcr command-line entry point.
//
//   gpcr fit           fit gpcr | svae | pcr | ridge on a CSV
//   gpcr predict       apply a saved model to a CSV
//   gpcr impute        gaussian-head prediction of a column block
//   gpcr synth-bench   full synthetic experiment with figure tables
//   gpcr svae-compare  encoder-vs-posterior diagnostics on a CSV
//   gpcr check-grads   finite-difference gradient verification
//
// Exit codes: 0 success, 2 input/config error, 3 numeric failure, 4 I/O error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <gpcr/baselines.hpp>
#include <gpcr/data_io.hpp>
#include <gpcr/error.hpp>
#include <gpcr/metrics.hpp>
#include <gpcr/model_io.hpp>
#include <gpcr/optimizer.hpp>
#include <gpcr/synth_bench.hpp>

#include "config_file.hpp"
#include "run_context.hpp"

namespace gpcr::cli {
namespace {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------- options

struct DataOptions {
  std::string data;
  std::vector<std::string> targets;
  std::string target_prefix;
  std::string group_column;
  std::vector<std::string> drop;
  bool standardize = false;

  void add(CLI::App* app, bool targets_required) {
    app->add_option("--data", data, "Input CSV with a header row")->required();
    auto* t = app->add_option("--target", targets, "Outcome column(s); comma separated or repeated")->delimiter(',');
    app->add_option("--target-prefix", target_prefix, "Every column starting with this prefix is an outcome");
    app->add_option("--group-column", group_column, "Column holding group labels (e.g. animal IDs)");
    app->add_option("--drop-column", drop, "Columns to ignore")->delimiter(',');
    app->add_flag("--standardize", standardize, "Standardize covariates with training statistics");
    if (!targets_required) t->description("Outcome column(s), used for metrics when present");
  }

  CsvSpec spec(bool optional) const { return CsvSpec{targets, target_prefix, group_column, drop, optional}; }
};

struct ModelOptions {
  Index latents = 5;
  double mu = -1.0;
  std::string link = "auto";
  bool mask_first_factor = true;
  bool ppca = false;
  int mc_samples = 8;
  int mc_samples_eval = 256;
  double lr = 1e-3;
  double momentum = 0.9;
  int max_iters = 5000;
  double rel_tol = 1e-7;
  int patience = 50;
  int restarts = 1;
  Seed seed = 0;
  std::string init = "auto";
  double init_scale = 0.1;
  double variance_floor = 1e-6;
  bool precondition_encoder = true;
  double noise_var = 1.0;

  void add(CLI::App* app) {
    app->add_option("--latents", latents, "Latent count L")->capture_default_str();
    app->add_option("--mu", mu, "Supervision weight; negative means the covariate count p")->capture_default_str();
    app->add_option("--link", link, "gaussian | logistic | auto (logistic for 0/1 outcomes)")->capture_default_str();
    app->add_option("--mask-first-factor", mask_first_factor, "Supervise only the first factor (true/false)")
        ->capture_default_str();
    app->add_flag("--ppca", ppca, "Isotropic noise restriction");
    app->add_option("--mc-samples", mc_samples, "Monte Carlo draws per step (logistic link)")->capture_default_str();
    app->add_option("--mc-samples-eval", mc_samples_eval, "Monte Carlo draws for reported objectives")
        ->capture_default_str();
    app->add_option("--learning-rate,--lr", lr, "Step size")->capture_default_str();
    app->add_option("--momentum", momentum)->capture_default_str();
    app->add_option("--max-iters", max_iters)->capture_default_str();
    app->add_option("--rel-tol", rel_tol)->capture_default_str();
    app->add_option("--patience", patience)->capture_default_str();
    app->add_option("--restarts", restarts, "Independent random starts; the best evaluation objective wins")
        ->capture_default_str();
    app->add_option("--seed", seed)->capture_default_str();
    app->add_option("--init", init, "pca | random | auto")->capture_default_str();
    app->add_option("--init-scale", init_scale, "Standard deviation of random initial loadings")->capture_default_str();
    app->add_option("--variance-floor", variance_floor)->capture_default_str();
    app->add_option("--precondition-encoder", precondition_encoder)->capture_default_str();
    app->add_option("--noise-var", noise_var, "Outcome noise variance of a gaussian head")->capture_default_str();
  }

  Link resolve_link(const Dataset& ds) const {
    if (link == "auto") return ds.binary_target ? Link::logistic : Link::gaussian;
    return link_from_string(link);
  }

  ObjectiveConfig objective(Index p) const {
    ObjectiveConfig c;
    c.mu = mu < 0.0 ? static_cast<double>(p) : mu;
    c.mc_samples_train = mc_samples;
    c.mc_samples_eval = mc_samples_eval;
    c.seed = seed;
    return c;
  }

  TrainConfig train() const {
    TrainConfig t;
    t.learning_rate = lr;
    t.momentum = momentum;
    t.max_iters = max_iters;
    t.rel_tol = rel_tol;
    t.patience = patience;
    t.restarts = restarts;
    t.seed = seed;
    t.init = init_kind_from_string(init);
    t.init_scale = init_scale;
    t.isotropic = ppca;
    t.variance_floor = variance_floor;
    t.precondition_encoder = precondition_encoder;
    return t;
  }
};

// ---------------------------------------------------------------- helpers

json config_echo(const CLI::App* app) {
  json out = json::object();
  std::istringstream in(app->config_to_str(true, false));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || line[0] == '[' || line[0] == '#') continue;
    std::string v = line.substr(eq + 1);
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    out[line.substr(0, eq)] = v;
  }
  return out;
}

Matrix trace_matrix(const std::vector<TraceRecord>& trace) {
  Matrix m(static_cast<Index>(trace.size()), 3);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    m(static_cast<Index>(i), 0) = trace[i].iteration;
    m(static_cast<Index>(i), 1) = trace[i].objective;
    m(static_cast<Index>(i), 2) = trace[i].grad_norm;
  }
  return m;
}

Matrix roc_matrix(const RocCurve& roc) {
  Matrix m(static_cast<Index>(roc.tpr.size()), 3);
  for (std::size_t i = 0; i < roc.tpr.size(); ++i) {
    m(static_cast<Index>(i), 0) = roc.thresholds[i];
    m(static_cast<Index>(i), 1) = roc.fpr[i];
    m(static_cast<Index>(i), 2) = roc.tpr[i];
  }
  return m;
}

std::vector<std::string> numbered(const std::string& prefix, Index n) {
  std::vector<std::string> out;
  for (Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

Matrix hstack(const std::vector<Matrix>& blocks) {
  Index cols = 0;
  for (const auto& b : blocks) cols += b.cols();
  Matrix out(blocks.empty() ? 0 : blocks.front().rows(), cols);
  Index c = 0;
  for (const auto& b : blocks) {
    out.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  return out;
}

/// Metrics of predictions against truth: AUC for binary logistic outcomes,
/// MSE and per-target Pearson otherwise.
json score_predictions(const Matrix& linear, const Matrix& response, const Matrix& truth, Link link) {
  json m = json::object();
  if (link == Link::logistic) {
    m["auc"] = auc(linear.col(0), truth.col(0));
  } else {
    m["mse"] = mse(response, truth);
    json per = json::array();
    for (Index k = 0; k < truth.cols(); ++k) {
      const Vector t = truth.col(k);
      const Vector pr = response.col(k);
      const bool varies = (t.array() != t[0]).any() && (pr.array() != pr[0]).any();
      per.push_back(varies ? json(pearson(pr, t)) : json(nullptr));
    }
    m["pearson"] = per;
  }
  return m;
}

struct PreparedData {
  Dataset train;
  Dataset test;  ///< empty when no split was requested
  std::optional<StandardizerState> standardizer;
  bool has_test = false;
};

PreparedData prepare(const DataOptions& d, double test_fraction, Seed seed) {
  PreparedData out;
  Dataset ds = load_csv(d.data, d.spec(false));
  if (ds.Y.cols() == 0) throw InputError("no outcome columns selected; use --target or --target-prefix");
  if (test_fraction > 0.0) {
    if (!ds.groups.empty()) {
      std::tie(out.train, out.test) = split_by_group(ds, test_fraction, seed);
    } else {
      std::vector<Index> tr, te;
      split_rows(ds.rows(), test_fraction, seed, tr, te);
      out.train = subset_rows(ds, tr);
      out.test = subset_rows(ds, te);
    }
    out.has_test = true;
  } else {
    out.train = std::move(ds);
  }
  if (d.standardize) {
    auto [state, t] = standardize(out.train);
    out.train = std::move(t);
    if (out.has_test) out.test = apply(state, out.test);
    out.standardizer = std::move(state);
  }
  return out;
}

void check_feature_names(const ModelArtifacts& a, const Dataset& ds) {
  if (a.feature_names.empty() || a.feature_names == ds.feature_names) return;
  const std::set<std::string> want(a.feature_names.begin(), a.feature_names.end());
  const std::set<std::string> have(ds.feature_names.begin(), ds.feature_names.end());
  std::string missing, extra;
  for (const auto& f : want)
    if (!have.count(f)) missing += (missing.empty() ? "" : ", ") + f;
  for (const auto& f : have)
    if (!want.count(f)) extra += (extra.empty() ? "" : ", ") + f;
  std::string msg = "feature names differ from the model's";
  if (!missing.empty()) msg += "; missing: " + missing;
  if (!extra.empty()) msg += "; unexpected: " + extra;
  if (missing.empty() && extra.empty()) msg += "; same names in a different order";
  throw InputError(msg);
}

// ---------------------------------------------------------------- fit

struct FitOptions {
  DataOptions data;
  ModelOptions model;
  std::string model_type = "gpcr";
  double penalty = -1.0;
  int cv_folds = 5;
  double test_fraction = 0.0;
  std::string out_dir;
};

int cmd_fit(const FitOptions& o, const CLI::App* app, const std::vector<std::string>& argv) {
  RunContext ctx("fit", argv, o.out_dir);
  ctx.config() = config_echo(app);
  ctx.set_seed(o.model.seed);
  const ModelTag tag = model_tag_from_string(o.model_type);
  const PreparedData pd = prepare(o.data, o.test_fraction, o.model.seed);
  const Dataset& tr = pd.train;
  const Link link = o.model.resolve_link(tr);
  const Index p = tr.X.cols();

  ModelArtifacts a;
  a.tag = tag;
  a.feature_names = tr.feature_names;
  a.target_names = tr.target_names;
  a.standardizer = pd.standardizer;
  for (const auto& [k, v] : ctx.config().items()) a.config.emplace_back(k, v.get<std::string>());

  std::vector<TraceRecord> trace;
  json fit_info = json::object();
  const HeadSpec head{link, o.model.noise_var, o.model.mask_first_factor};
  const ObjectiveConfig oc = o.model.objective(p);
  ctx.prepare_output();
  switch (tag) {
    case ModelTag::gpcr: {
      GpcrFit f = fit_gpcr(tr.X, tr.Y, o.model.latents, head, oc, o.model.train());
      const Matrix Xc = f.model.demean(tr.X);
      fit_info["marginal_loglik"] = marginal_loglik(f.model, Xc);
      fit_info["objective"] = gpcr_objective(f.model, f.head, Xc, tr.Y, oc, McPhase::eval, false).value;
      fit_info["best_iteration"] = f.best_iteration;
      if (o.model.ppca && oc.mu == 0.0 && o.model.latents < p) fit_info["ppca_mle_loglik"] = ppca_max_loglik(Xc, o.model.latents);
      trace = std::move(f.trace);
      a.model = std::move(f.model);
      a.head = std::move(f.head);
      break;
    }
    case ModelTag::svae: {
      SvaeFit f = fit_svae(tr.X, tr.Y, o.model.latents, head, oc, o.model.train());
      const Matrix Xc = f.model.demean(tr.X);
      fit_info["marginal_loglik"] = marginal_loglik(f.model, Xc);
      fit_info["objective"] = svae_objective(f.model, f.head, f.encoder, Xc, tr.Y, oc, McPhase::eval, false).value;
      fit_info["best_iteration"] = f.best_iteration;
      trace = std::move(f.trace);
      a.model = std::move(f.model);
      a.head = std::move(f.head);
      a.encoder = std::move(f.encoder);
      break;
    }
    case ModelTag::pcr: {
      CvResult cv;
      a.pcr = o.penalty >= 0.0 ? fit_pcr(tr.X, tr.Y, o.model.latents, link, o.penalty)
                               : fit_pcr_cv(tr.X, tr.Y, o.model.latents, link, default_penalty_grid(), o.cv_folds,
                                            o.model.seed, &cv);
      fit_info["penalty"] = a.pcr->penalty;
      break;
    }
    case ModelTag::ridge: {
      CvResult cv;
      a.ridge = o.penalty >= 0.0 ? fit_ridge(tr.X, tr.Y, o.penalty, link)
                                 : fit_ridge_cv(tr.X, tr.Y, link, default_penalty_grid(), o.cv_folds, o.model.seed, &cv);
      fit_info["penalty"] = a.ridge->penalty;
      break;
    }
  }

  // Predictions are computed on already standardized data, so apply the
  // model without its standardizer here.
  ModelArtifacts raw = a;
  raw.standardizer.reset();
  auto evaluate = [&](const Dataset& ds) {
    return score_predictions(predict_linear(raw, ds.X), predict_response(raw, ds.X), ds.Y, link);
  };
  ctx.metrics()["fit"] = fit_info;
  ctx.metrics()["train"] = evaluate(tr);
  if (pd.has_test) ctx.metrics()["test"] = evaluate(pd.test);
  if (tag == ModelTag::svae && link == Link::logistic) {
    const Matrix Xc = a.model->demean(tr.X);
    const DiscrepancyReport d = discrepancy_report(*a.encoder, posterior(*a.model), *a.head, Xc, tr.Y.col(0));
    ctx.metrics()["train"]["auc_encoder"] = d.auc_encoder;
    ctx.metrics()["train"]["auc_posterior"] = d.auc_posterior;
  }

  save_model(ctx.output("model.gpcr"), a);
  if (!trace.empty()) ctx.write_table("trace.csv", {"iteration", "objective", "grad_norm"}, trace_matrix(trace));
  ctx.finish();
  std::cout << ctx.metrics().dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------- predict / impute

struct PredictOptions {
  std::string model;
  std::string data;
  std::string group_column;
  std::vector<std::string> drop;
  std::string score_source = "posterior";
  std::string out_dir;
};

int cmd_predict(const PredictOptions& o, bool impute, const CLI::App* app, const std::vector<std::string>& argv) {
  RunContext ctx(impute ? "impute" : "predict", argv, o.out_dir);
  ctx.config() = config_echo(app);
  const ModelArtifacts a = load_model(o.model);
  CsvSpec spec{a.target_names, "", o.group_column, o.drop, true};
  const Dataset ds = load_csv(o.data, spec);
  check_feature_names(a, ds);
  ScoreSource source = ScoreSource::posterior;
  if (o.score_source == "encoder") source = ScoreSource::encoder;
  else if (o.score_source != "posterior") throw InputError("--score-source must be posterior or encoder");

  Link link = Link::gaussian;
  if (a.head) link = a.head->link;
  if (a.pcr) link = a.pcr->head.link;
  if (a.ridge) link = a.ridge->link;
  if (impute && link != Link::gaussian) throw InputError("impute needs a model with a gaussian head");

  const Matrix lin = predict_linear(a, ds.X, source);
  const Matrix resp = predict_response(a, ds.X, source);
  ctx.prepare_output();
  std::vector<std::string> header;
  for (Index k = 0; k < resp.cols(); ++k)
    header.push_back("pred_" + (k < static_cast<Index>(a.target_names.size()) ? a.target_names[static_cast<std::size_t>(k)]
                                                                              : std::to_string(k + 1)));
  ctx.write_table("predictions.csv", header, resp);
  if (a.tag == ModelTag::gpcr || a.tag == ModelTag::svae) {
    const Matrix scores = latent_scores(a, ds.X, source);
    ctx.write_table("latent_scores.csv", numbered("z", scores.cols()), scores);
  }
  const bool have_truth = ds.Y.cols() == static_cast<Index>(a.target_names.size()) && ds.Y.cols() > 0;
  if (have_truth) {
    json m = score_predictions(lin, resp, ds.Y, link);
    if (impute) {
      const Matrix centered = ds.Y.rowwise() - ds.Y.colwise().mean();
      m["baseline_mse"] = centered.squaredNorm() / static_cast<double>(ds.Y.size());
    }
    ctx.metrics() = m;
  } else {
    ctx.metrics()["absent"] = "truth columns not present in the data";
  }
  ctx.finish();
  std::cout << ctx.metrics().dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------- synth-bench

struct SynthOptions {
  BenchConfig bench;
  int max_iters = -1;
  int restarts = -1;
  double gpcr_lr = -1.0;
  double svae_lr = -1.0;
  bool write_data = false;
  std::string out_dir;
};

int cmd_synth_bench(SynthOptions o, const CLI::App* app, const std::vector<std::string>& argv) {
  RunContext ctx("synth-bench", argv, o.out_dir);
  ctx.config() = config_echo(app);
  ctx.set_seed(o.bench.synth.seed);
  BenchConfig& c = o.bench;
  if (o.max_iters > 0) c.gpcr_train.max_iters = c.svae_train.max_iters = o.max_iters;
  if (o.restarts > 0) c.gpcr_train.restarts = c.svae_train.restarts = o.restarts;
  if (o.gpcr_lr > 0.0) c.gpcr_train.learning_rate = o.gpcr_lr;
  if (o.svae_lr > 0.0) c.svae_train.learning_rate = o.svae_lr;
  c.synth.validate();
  ctx.prepare_output();
  const BenchResult r = run_synth_bench(c);
  const Index p = c.synth.p, L = c.latents;

  json& m = ctx.metrics();
  m["test_auc"] = {{"gpcr", r.test_auc.gpcr},
                   {"pcr", r.test_auc.pcr},
                   {"svae_encoder", r.test_auc.svae_encoder},
                   {"svae_posterior", r.test_auc.svae_posterior}};
  m["train_auc"] = {{"gpcr", r.train_auc.gpcr},
                    {"pcr", r.train_auc.pcr},
                    {"svae_encoder", r.train_auc.svae_encoder},
                    {"svae_posterior", r.train_auc.svae_posterior}};
  m["bayes_test_auc"] = r.bayes_test_auc;
  m["mean_shift"] = {{"gpcr", r.stim_gpcr.mean_shift}, {"svae", r.stim_svae.mean_shift}, {"pcr", r.stim_pcr.mean_shift}};
  m["svae_factor_correlation"] = r.discrepancy_test.per_factor_corr;
  m["pcr_penalty"] = r.pcr.penalty;
  m["chosen_restart"] = {{"gpcr", r.gpcr.restart}, {"svae", r.svae.restart}};
  m["efficacy_definition"] =
      "change in the true-model posterior mean of z1 (equal to the change in E[y*]) when the selected covariates are "
      "shifted by delta";

  Matrix summary(3, 3);
  summary << r.test_auc.gpcr, r.train_auc.gpcr, r.stim_gpcr.mean_shift, r.test_auc.svae_encoder,
      r.train_auc.svae_encoder, r.stim_svae.mean_shift, r.test_auc.pcr, r.train_auc.pcr, r.stim_pcr.mean_shift;
  ctx.write_text("summary.csv",
                 "model,test_auc,train_auc,mean_shift\n"
                 "gpcr," + format_double(summary(0, 0)) + "," + format_double(summary(0, 1)) + "," + format_double(summary(0, 2)) + "\n"
                 "svae," + format_double(summary(1, 0)) + "," + format_double(summary(1, 1)) + "," + format_double(summary(1, 2)) + "\n"
                 "svae_posterior," + format_double(r.test_auc.svae_posterior) + "," + format_double(r.train_auc.svae_posterior) + ",\n"
                 "pcr," + format_double(summary(2, 0)) + "," + format_double(summary(2, 1)) + "," + format_double(summary(2, 2)) + "\n");

  ctx.write_table("loadings_true.csv", numbered("w", r.data.W_true.cols()), r.data.W_true);
  ctx.write_table("loadings_gpcr.csv", numbered("w", L), r.gpcr.model.loadings());
  ctx.write_table("loadings_svae.csv", numbered("w", L), r.svae.model.loadings());
  ctx.write_table("coef_pcr.csv", {"coef"}, r.pcr.effective_coef().col(0));
  ctx.write_table("saliency.csv", {"gpcr", "svae", "pcr"}, hstack({r.saliency_gpcr, r.saliency_svae, r.saliency_pcr}));
  ctx.write_table("svae_scores_test.csv", [&] {
    std::vector<std::string> h = numbered("encoder_z", L);
    const auto post = numbered("posterior_z", L);
    h.insert(h.end(), post.begin(), post.end());
    return h;
  }(), hstack({r.svae_encoder_scores, r.svae_posterior_scores}));
  {
    Matrix corr(L, 1);
    for (Index l = 0; l < L; ++l) corr(l, 0) = r.discrepancy_test.per_factor_corr[static_cast<std::size_t>(l)];
    ctx.write_table("svae_factor_correlation.csv", {"correlation"}, corr);
  }
  const std::vector<std::string> roc_header{"threshold", "fpr", "tpr"};
  ctx.write_table("roc_gpcr.csv", roc_header, roc_matrix(r.roc_gpcr));
  ctx.write_table("roc_pcr.csv", roc_header, roc_matrix(r.roc_pcr));
  ctx.write_table("roc_svae_encoder.csv", roc_header, roc_matrix(r.roc_svae_encoder));
  ctx.write_table("roc_svae_posterior.csv", roc_header, roc_matrix(r.roc_svae_posterior));
  {
    const auto n = static_cast<Index>(r.stim_gpcr.per_stim_shift.size());
    Matrix s(n, 3);
    for (Index i = 0; i < n; ++i) {
      s(i, 0) = r.stim_gpcr.per_stim_shift[static_cast<std::size_t>(i)];
      s(i, 1) = r.stim_svae.per_stim_shift[static_cast<std::size_t>(i)];
      s(i, 2) = r.stim_pcr.per_stim_shift[static_cast<std::size_t>(i)];
    }
    ctx.write_table("stim_shifts.csv", {"gpcr", "svae", "pcr"}, s);
  }
  ctx.write_table("trace_gpcr.csv", {"iteration", "objective", "grad_norm"}, trace_matrix(r.gpcr.trace));
  ctx.write_table("trace_svae.csv", {"iteration", "objective", "grad_norm"}, trace_matrix(r.svae.trace));
  if (o.write_data) {
    std::vector<std::string> h = numbered("x", p);
    h.push_back("y");
    h.push_back("split");
    Matrix split = Matrix::Zero(c.synth.n, 1);
    for (Index i : r.test_rows) split(i, 0) = 1.0;
    ctx.write_table("data.csv", h, hstack({r.data.X, r.data.y, split}));
  }
  ctx.finish();
  std::cout << m.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------- svae-compare

struct CompareOptions {
  DataOptions data;
  ModelOptions model;
  double test_fraction = 0.5;
  std::string out_dir;
};

int cmd_svae_compare(const CompareOptions& o, const CLI::App* app, const std::vector<std::string>& argv) {
  RunContext ctx("svae-compare", argv, o.out_dir);
  ctx.config() = config_echo(app);
  ctx.set_seed(o.model.seed);
  const PreparedData pd = prepare(o.data, o.test_fraction, o.model.seed);
  if (!pd.train.binary_target || pd.train.Y.cols() != 1) throw InputError("svae-compare needs one binary outcome column");
  const Dataset& tr = pd.train;
  const Dataset& te = pd.has_test ? pd.test : pd.train;
  const HeadSpec head{Link::logistic, 1.0, o.model.mask_first_factor};
  const ObjectiveConfig oc = o.model.objective(tr.X.cols());
  ctx.prepare_output();

  const SvaeFit svae = fit_svae(tr.X, tr.Y, o.model.latents, head, oc, o.model.train());
  const GpcrFit gp = fit_gpcr(tr.X, tr.Y, o.model.latents, head, oc, o.model.train());
  const Matrix Xc_svae = svae.model.demean(te.X);
  const GaussianPosterior post = posterior(svae.model);
  const DiscrepancyReport d = discrepancy_report(svae.encoder, post, svae.head, Xc_svae, te.Y.col(0));
  const Matrix enc = svae.encoder.means(Xc_svae);
  const Matrix pm = Xc_svae * post.mean_map.transpose();
  const Vector gscore = gp.head.linear_predictor(posterior_mean_scores(gp.model, gp.model.demean(te.X))).col(0);

  json report;
  report["per_factor_corr"] = d.per_factor_corr;
  report["auc_encoder"] = d.auc_encoder;
  report["auc_posterior"] = d.auc_posterior;
  report["auc_gpcr"] = auc(gscore, te.Y.col(0));
  ctx.metrics() = report;
  ctx.write_text("discrepancy.json", report.dump(2) + "\n");
  const std::vector<std::string> roc_header{"threshold", "fpr", "tpr"};
  ctx.write_table("roc_svae_encoder.csv", roc_header, roc_matrix(roc_curve(svae.head.linear_predictor(enc).col(0), te.Y.col(0))));
  ctx.write_table("roc_svae_posterior.csv", roc_header, roc_matrix(roc_curve(svae.head.linear_predictor(pm).col(0), te.Y.col(0))));
  ctx.write_table("roc_gpcr.csv", roc_header, roc_matrix(roc_curve(gscore, te.Y.col(0))));
  std::vector<std::string> h = numbered("encoder_z", o.model.latents);
  const auto ph = numbered("posterior_z", o.model.latents);
  h.insert(h.end(), ph.begin(), ph.end());
  ctx.write_table("svae_scores.csv", h, hstack({enc, pm}));
  ctx.finish();
  std::cout << report.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------- check-grads

struct GradOptions {
  std::string objective = "all";
  std::string link = "all";
  int instances = 20;
  Seed seed = 0;
  std::string out_dir;
};

int cmd_check_grads(const GradOptions& o, const CLI::App* app, const std::vector<std::string>& argv) {
  RunContext ctx("check-grads", argv, o.out_dir);
  ctx.config() = config_echo(app);
  ctx.set_seed(o.seed);
  std::vector<GradObjective> objectives;
  if (o.objective == "gpcr" || o.objective == "all") objectives.push_back(GradObjective::gpcr);
  if (o.objective == "svae" || o.objective == "all") objectives.push_back(GradObjective::svae);
  if (objectives.empty()) throw InputError("--objective must be gpcr, svae or all");
  std::vector<Link> links;
  if (o.link == "gaussian" || o.link == "all") links.push_back(Link::gaussian);
  if (o.link == "logistic" || o.link == "all") links.push_back(Link::logistic);
  if (links.empty()) throw InputError("--link must be gaussian, logistic or all");
  if (o.instances < 1) throw InputError("--instances must be positive");
  ctx.prepare_output();

  std::string rows = "objective,link,instance,max_rel_error,worst_parameter,threshold\n";
  bool ok = true;
  for (GradObjective obj : objectives) {
    for (Link link : links) {
      const double threshold = (obj == GradObjective::gpcr && link == Link::gaussian) ? 1e-4 : 1e-3;
      double worst = 0.0;
      for (int k = 0; k < o.instances; ++k) {
        GradCheckInstance inst;
        inst.link = link;
        inst.seed = o.seed + static_cast<Seed>(k);
        inst.mask_first_factor = k % 2 == 1;
        const GradCheckReport rep = check_gradients(obj, inst);
        worst = std::max(worst, rep.max_rel_error);
        const std::string name = obj == GradObjective::gpcr ? "gpcr" : "svae";
        rows += name + "," + to_string(link) + "," + std::to_string(k) + "," + format_double(rep.max_rel_error) + "," +
                rep.worst_parameter + "," + format_double(threshold) + "\n";
      }
      const std::string key = std::string(obj == GradObjective::gpcr ? "gpcr" : "svae") + "_" + to_string(link);
      ctx.metrics()[key] = {{"max_rel_error", worst}, {"threshold", threshold}, {"pass", worst < threshold}};
      ok = ok && worst < threshold;
    }
  }
  ctx.write_text("grad_check.csv", rows);
  ctx.finish();
  std::cout << ctx.metrics().dump() << "\n";
  if (!ok) throw NumericError("gradient check exceeded its threshold");
  return 0;
}

int run(int argc, char** argv) {
  std::vector<std::string> raw(argv + 1, argv + argc);
  const std::vector<std::string> args = expand_config(raw);
  std::vector<std::string> echo{argv[0]};
  echo.insert(echo.end(), raw.begin(), raw.end());

  CLI::App app{"Generative principal component regression"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit gpcr, svae, pcr or ridge on a CSV");
  fit.data.add(fit_cmd, true);
  fit.model.add(fit_cmd);
  fit_cmd->add_option("--model-type", fit.model_type, "gpcr | svae | pcr | ridge")->capture_default_str();
  fit_cmd->add_option("--penalty", fit.penalty, "Ridge penalty for pcr/ridge; negative selects it by cross-validation")
      ->capture_default_str();
  fit_cmd->add_option("--cv-folds", fit.cv_folds)->capture_default_str();
  fit_cmd->add_option("--test-fraction", fit.test_fraction,
                      "Hold out this fraction (of groups when --group-column is given) for evaluation")
      ->capture_default_str();
  fit_cmd->add_option("--out-dir", fit.out_dir, "Output directory")->required();

  PredictOptions pred;
  auto* pred_cmd = app.add_subcommand("predict", "Apply a saved model to a CSV");
  PredictOptions imp;
  auto* imp_cmd = app.add_subcommand("impute", "Impute a column block with a gaussian-head model");
  for (auto [cmd, opt] : {std::pair{pred_cmd, &pred}, std::pair{imp_cmd, &imp}}) {
    cmd->add_option("--model", opt->model, "Model file")->required();
    cmd->add_option("--data", opt->data, "Input CSV")->required();
    cmd->add_option("--group-column", opt->group_column, "Non-numeric group column to ignore");
    cmd->add_option("--drop-column", opt->drop, "Columns to ignore")->delimiter(',');
    cmd->add_option("--score-source", opt->score_source, "posterior | encoder (svae models)")->capture_default_str();
    cmd->add_option("--out-dir", opt->out_dir, "Output directory")->required();
  }

  SynthOptions syn;
  auto* syn_cmd = app.add_subcommand("synth-bench", "Run the synthetic benchmark and write figure tables");
  {
    BenchConfig& b = syn.bench;
    syn_cmd->add_option("--p", b.synth.p)->capture_default_str();
    syn_cmd->add_option("--latents-true", b.synth.latents)->capture_default_str();
    syn_cmd->add_option("--n", b.synth.n)->capture_default_str();
    syn_cmd->add_option("--sigma2", b.synth.sigma2)->capture_default_str();
    syn_cmd->add_option("--lambda1", b.synth.lambda1)->capture_default_str();
    syn_cmd->add_option("--tau", b.synth.tau)->capture_default_str();
    syn_cmd->add_option("--block", b.synth.block)->capture_default_str();
    syn_cmd->add_option("--seed", b.synth.seed)->capture_default_str();
    syn_cmd->add_option("--latents", b.latents)->capture_default_str();
    syn_cmd->add_option("--mu", b.mu, "Negative means p")->capture_default_str();
    syn_cmd->add_option("--test-fraction", b.test_fraction)->capture_default_str();
    syn_cmd->add_option("--mc-samples", b.objective.mc_samples_train)->capture_default_str();
    syn_cmd->add_option("--mc-samples-eval", b.objective.mc_samples_eval)->capture_default_str();
    syn_cmd->add_option("--max-iters", syn.max_iters, "Overrides both models' iteration caps");
    syn_cmd->add_option("--restarts", syn.restarts, "Overrides both models' restart counts (default 3)");
    syn_cmd->add_option("--gpcr-lr", syn.gpcr_lr, "gPCR learning rate");
    syn_cmd->add_option("--svae-lr", syn.svae_lr, "SVAE learning rate");
    syn_cmd->add_option("--cv-folds", b.cv_folds)->capture_default_str();
    syn_cmd->add_option("--k-pool", b.k_pool)->capture_default_str();
    syn_cmd->add_option("--k-stim", b.k_stim)->capture_default_str();
    syn_cmd->add_option("--n-stims", b.n_stims)->capture_default_str();
    syn_cmd->add_option("--delta", b.delta)->capture_default_str();
    syn_cmd->add_flag("--write-data", syn.write_data, "Also write the generated data as data.csv");
    syn_cmd->add_option("--out-dir", syn.out_dir, "Output directory")->required();
  }

  CompareOptions cmp;
  auto* cmp_cmd = app.add_subcommand("svae-compare", "Encoder-vs-posterior diagnostics for SVAE and gPCR");
  cmp.data.add(cmp_cmd, true);
  cmp.model.add(cmp_cmd);
  cmp_cmd->add_option("--test-fraction", cmp.test_fraction)->capture_default_str();
  cmp_cmd->add_option("--out-dir", cmp.out_dir, "Output directory")->required();

  GradOptions grad;
  auto* grad_cmd = app.add_subcommand("check-grads", "Finite-difference gradient verification");
  grad_cmd->add_option("--objective", grad.objective, "gpcr | svae | all")->capture_default_str();
  grad_cmd->add_option("--link", grad.link, "gaussian | logistic | all")->capture_default_str();
  grad_cmd->add_option("--instances", grad.instances)->capture_default_str();
  grad_cmd->add_option("--seed", grad.seed)->capture_default_str();
  grad_cmd->add_option("--out-dir", grad.out_dir, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    throw InputError(e.what());
  }

  if (fit_cmd->parsed()) return cmd_fit(fit, fit_cmd, echo);
  if (pred_cmd->parsed()) return cmd_predict(pred, false, pred_cmd, echo);
  if (imp_cmd->parsed()) return cmd_predict(imp, true, imp_cmd, echo);
  if (syn_cmd->parsed()) return cmd_synth_bench(syn, syn_cmd, echo);
  if (cmp_cmd->parsed()) return cmd_svae_compare(cmp, cmp_cmd, echo);
  if (grad_cmd->parsed()) return cmd_check_grads(grad, grad_cmd, echo);
  return 0;
}

}  // namespace
}  // namespace gpcr::cli

int main(int argc, char** argv) {
  try {
    return gpcr::cli::run(argc, argv);
  } catch (const gpcr::Error& e) {
    std::cerr << "error code=" << gpcr::error_code_name(e.code()) << ": " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error code=IO: " << e.what() << "\n";
    return static_cast<int>(gpcr::ErrorCode::io);
  } catch (const std::exception& e) {
    std::cerr << "error code=NUMERIC: " << e.what() << "\n";
    return static_cast<int>(gpcr::ErrorCode::numeric);
  }
}

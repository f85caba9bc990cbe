#include <gpcr/metrics.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <gpcr/error.hpp>

namespace gpcr {

namespace {

void check_binary(const Vector& scores, const Vector& labels, Index& positives, Index& negatives) {
  if (scores.size() != labels.size()) throw InputError("auc: scores and labels differ in length");
  positives = negatives = 0;
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1.0) ++positives;
    else if (labels[i] == 0.0) ++negatives;
    else throw InputError("auc: label at row " + std::to_string(i) + " is not 0 or 1");
  }
  if (positives == 0 || negatives == 0) throw InputError("auc: labels contain a single class");
  if (!scores.allFinite()) throw InputError("auc: scores contain non-finite values");
}

}  // namespace

RocCurve roc_curve(const Vector& scores, const Vector& labels) {
  Index pos = 0, neg = 0;
  check_binary(scores, labels, pos, neg);
  std::vector<Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.thresholds.push_back(std::numeric_limits<double>::infinity());
  roc.tpr.push_back(0.0);
  roc.fpr.push_back(0.0);
  Index tp = 0, fp = 0;
  std::size_t k = 0;
  while (k < order.size()) {
    const double t = scores[order[k]];
    while (k < order.size() && scores[order[k]] == t) {
      if (labels[order[k]] == 1.0) ++tp;
      else ++fp;
      ++k;
    }
    roc.thresholds.push_back(t);
    roc.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
    roc.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
  }
  double area = 0.0;
  for (std::size_t i = 1; i < roc.tpr.size(); ++i) {
    area += (roc.fpr[i] - roc.fpr[i - 1]) * 0.5 * (roc.tpr[i] + roc.tpr[i - 1]);
  }
  roc.auc = area;
  return roc;
}

double auc(const Vector& scores, const Vector& labels) {
  Index pos = 0, neg = 0;
  check_binary(scores, labels, pos, neg);
  // Rank-sum form of the Mann-Whitney statistic with midranks for ties.
  std::vector<Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t k = 0;
  while (k < order.size()) {
    std::size_t end = k;
    while (end < order.size() && scores[order[end]] == scores[order[k]]) ++end;
    const double midrank = 0.5 * static_cast<double>(k + 1 + end);
    for (std::size_t j = k; j < end; ++j)
      if (labels[order[j]] == 1.0) rank_sum += midrank;
    k = end;
  }
  const double P = static_cast<double>(pos), Nn = static_cast<double>(neg);
  return (rank_sum - P * (P + 1.0) / 2.0) / (P * Nn);
}

double pearson(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw InputError("pearson: inputs differ in length");
  if (a.size() < 2) throw InputError("pearson: need at least two values");
  const Vector da = a.array() - a.mean();
  const Vector db = b.array() - b.mean();
  const double va = da.squaredNorm(), vb = db.squaredNorm();
  if (!(va > 0.0) || !(vb > 0.0)) throw InputError("pearson: input has zero variance");
  return std::clamp(da.dot(db) / std::sqrt(va * vb), -1.0, 1.0);
}

double mse(const Matrix& pred, const Matrix& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) {
    throw InputError("mse: shape mismatch (" + std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()) +
                     " vs " + std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()) + ")");
  }
  if (pred.size() == 0) throw InputError("mse: empty input");
  return (pred - truth).squaredNorm() / static_cast<double>(pred.size());
}

DiscrepancyReport discrepancy_report(const LinearEncoder& enc, const GaussianPosterior& post,
                                     const PredictiveHead& head, const Matrix& X, const Vector& y) {
  const Matrix enc_means = enc.means(X);
  const Matrix post_means = X * post.mean_map.transpose();
  DiscrepancyReport r;
  for (Index l = 0; l < enc_means.cols(); ++l) r.per_factor_corr.push_back(pearson(enc_means.col(l), post_means.col(l)));
  r.auc_encoder = auc(head.linear_predictor(enc_means).col(0), y);
  r.auc_posterior = auc(head.linear_predictor(post_means).col(0), y);
  return r;
}

}  // namespace gpcr

#pragma once

// ROC/AUC, Pearson correlation, MSE, and the encoder-vs-posterior
// discrepancy report.

#include <vector>

#include <gpcr/factor_model.hpp>
#include <gpcr/objectives.hpp>
#include <gpcr/types.hpp>

namespace gpcr {

struct RocCurve {
  std::vector<double> thresholds;  ///< descending; the first entry is +inf
  std::vector<double> tpr;
  std::vector<double> fpr;
  double auc = 0.0;
};

/// Labels must be 0 or 1 with both classes present.
RocCurve roc_curve(const Vector& scores, const Vector& labels);

/// Mann-Whitney statistic with ties counted as one half.
double auc(const Vector& scores, const Vector& labels);

double pearson(const Vector& a, const Vector& b);

double mse(const Matrix& pred, const Matrix& truth);

struct DiscrepancyReport {
  std::vector<double> per_factor_corr;
  double auc_encoder = 0.0;
  double auc_posterior = 0.0;
};

/// X is demeaned. The head's first output is scored against binary y.
DiscrepancyReport discrepancy_report(const LinearEncoder& enc, const GaussianPosterior& post,
                                     const PredictiveHead& head, const Matrix& X, const Vector& y);

}  // namespace gpcr

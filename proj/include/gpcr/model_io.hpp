#pragma once

// Text model files, format "gpcr-model/1": a key/value header followed by
// named matrix blocks, all numbers written with 17 significant digits so a
// save/load round trip is exact.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <gpcr/baselines.hpp>
#include <gpcr/data_io.hpp>
#include <gpcr/factor_model.hpp>
#include <gpcr/objectives.hpp>

namespace gpcr {

inline constexpr const char* kModelFormat = "gpcr-model/1";

enum class ModelTag { gpcr, svae, pcr, ridge };

std::string to_string(ModelTag tag);
ModelTag model_tag_from_string(const std::string& s);

struct ModelArtifacts {
  ModelTag tag = ModelTag::gpcr;
  std::optional<FactorModel> model;       ///< gpcr, svae
  std::optional<PredictiveHead> head;     ///< gpcr, svae
  std::optional<LinearEncoder> encoder;   ///< svae
  std::optional<PcrModel> pcr;            ///< pcr
  std::optional<RidgeModel> ridge;        ///< ridge
  std::optional<StandardizerState> standardizer;
  std::vector<std::string> feature_names;
  std::vector<std::string> target_names;
  std::vector<std::pair<std::string, std::string>> config;  ///< echo of the fit settings

  void validate() const;
};

enum class ScoreSource { posterior, encoder };

/// Latent scores for raw covariate rows (gpcr and svae only).
Matrix latent_scores(const ModelArtifacts& a, const Matrix& X_raw, ScoreSource source = ScoreSource::posterior);

/// Linear predictor and mean response for raw covariate rows. SVAE models
/// score through `source`.
Matrix predict_linear(const ModelArtifacts& a, const Matrix& X_raw, ScoreSource source = ScoreSource::posterior);
Matrix predict_response(const ModelArtifacts& a, const Matrix& X_raw, ScoreSource source = ScoreSource::posterior);

std::string serialize_model(const ModelArtifacts& a);
ModelArtifacts parse_model(const std::string& text);

void save_model(const std::string& path, const ModelArtifacts& a);
ModelArtifacts load_model(const std::string& path);

}  // namespace gpcr

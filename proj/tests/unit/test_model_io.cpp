#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

#include <gpcr/error.hpp>
#include <gpcr/model_io.hpp>

#include "test_helpers.hpp"

namespace fs = std::filesystem;
using namespace gpcr;
using gpcr::testing::random_matrix;

namespace {

ModelArtifacts svae_artifacts() {
  std::mt19937_64 rng(81);
  const Index p = 5, L = 2;
  ModelArtifacts a;
  a.tag = ModelTag::svae;
  a.model.emplace(random_matrix(p, L, rng), Vector::LinSpaced(p, 0.1, 1.0 / 3.0), random_matrix(p, 1, rng).col(0));
  PredictiveHead h = PredictiveHead::zeros(L, 1, Link::logistic, 1.0, PredictiveHead::mask(L, true));
  h.coef(0, 0) = 0.123456789012345678;
  h.intercept[0] = -1e-17;
  a.head = h;
  a.encoder = LinearEncoder{random_matrix(L, p, rng), random_matrix(L, 1, rng).col(0), Vector::Constant(L, 0.3)};
  a.standardizer = StandardizerState{random_matrix(p, 1, rng).col(0), Vector::Constant(p, 2.0)};
  for (Index j = 0; j < p; ++j) a.feature_names.push_back("f" + std::to_string(j));
  a.target_names = {"y"};
  a.config = {{"mu", "5"}, {"seed", "0"}};
  return a;
}

std::string replace_first(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

}  // namespace

TEST_CASE("model files round-trip exactly") {
  const ModelArtifacts a = svae_artifacts();
  const std::string text = serialize_model(a);
  CHECK(text.rfind("format gpcr-model/1\n", 0) == 0);
  const ModelArtifacts b = parse_model(text);
  CHECK(b.tag == ModelTag::svae);
  CHECK(b.model->loadings() == a.model->loadings());
  CHECK(b.model->variances() == a.model->variances());
  CHECK(b.model->mean_offset() == a.model->mean_offset());
  CHECK(b.head->coef == a.head->coef);
  CHECK(b.head->intercept == a.head->intercept);
  CHECK(b.head->supervised == a.head->supervised);
  CHECK(b.head->link == Link::logistic);
  CHECK(b.encoder->A == a.encoder->A);
  CHECK(b.standardizer->means == a.standardizer->means);
  CHECK(b.feature_names == a.feature_names);
  CHECK(b.config == a.config);
  CHECK(serialize_model(b) == text);

  std::mt19937_64 rng(82);
  const Matrix X = random_matrix(7, 5, rng);
  for (ScoreSource s : {ScoreSource::posterior, ScoreSource::encoder})
    CHECK(predict_response(a, X, s) == predict_response(b, X, s));
}

TEST_CASE("baseline artifacts round-trip") {
  std::mt19937_64 rng(83);
  const Matrix X = random_matrix(30, 4, rng);
  const Matrix Y = random_matrix(30, 2, rng);
  ModelArtifacts a;
  a.tag = ModelTag::pcr;
  a.pcr = fit_pcr(X, Y, 2, Link::gaussian, 0.5);
  a.feature_names = {"a", "b", "c", "d"};
  a.target_names = {"u", "v"};
  const ModelArtifacts b = parse_model(serialize_model(a));
  CHECK(predict_response(b, X) == predict_response(a, X));

  ModelArtifacts r;
  r.tag = ModelTag::ridge;
  r.ridge = fit_ridge(X, Y, 0.25);
  r.feature_names = a.feature_names;
  r.target_names = a.target_names;
  const ModelArtifacts rb = parse_model(serialize_model(r));
  CHECK(rb.ridge->penalty == 0.25);
  CHECK(predict_response(rb, X) == predict_response(r, X));
}

TEST_CASE("malformed model files are rejected with the right error class") {
  const std::string text = serialize_model(svae_artifacts());
  CHECK_THROWS_AS(parse_model(replace_first(text, "gpcr-model/1", "gpcr-model/2")), InputError);
  try {
    parse_model(replace_first(text, "tag svae", "tag forest"));
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("forest") != std::string::npos);
  }
  const std::string truncated = text.substr(0, text.size() / 2);
  CHECK_THROWS_AS(parse_model(truncated), IoError);
  CHECK_THROWS_AS(parse_model(text.substr(0, text.rfind("end"))), IoError);
  CHECK_THROWS_AS(parse_model(""), IoError);
  CHECK_THROWS_AS(load_model((fs::temp_directory_path() / "gpcr_absent_model").string()), IoError);
}

TEST_CASE("save and load through the filesystem") {
  const fs::path p = fs::temp_directory_path() / "gpcr_model_io_test.gpcr";
  const ModelArtifacts a = svae_artifacts();
  save_model(p.string(), a);
  const ModelArtifacts b = load_model(p.string());
  CHECK(b.encoder->variances == a.encoder->variances);
  fs::remove(p);
}

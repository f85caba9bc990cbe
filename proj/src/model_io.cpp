#include <gpcr/model_io.hpp>

#include <map>
#include <sstream>

#include <gpcr/error.hpp>
#include <gpcr/kernels.hpp>

namespace gpcr {

namespace {

void put_matrix(std::ostringstream& out, const std::string& name, const Matrix& m) {
  out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

std::string bool_list(const std::vector<bool>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += v[i] ? '1' : '0';
  }
  return s;
}

// Splits "key rest of line" at the first space.
std::pair<std::string, std::string> key_value(const std::string& line) {
  const auto sp = line.find(' ');
  if (sp == std::string::npos) return {line, ""};
  return {line.substr(0, sp), line.substr(sp + 1)};
}

double parse_number(const std::string& text, const std::string& where) {
  double v = 0.0;
  if (!parse_double(text, v)) throw IoError("model file: cannot parse '" + text + "' in " + where);
  return v;
}

Index parse_count(const std::string& text, const std::string& where) {
  const double v = parse_number(text, where);
  if (v < 0 || v != static_cast<double>(static_cast<Index>(v))) throw IoError("model file: bad count in " + where);
  return static_cast<Index>(v);
}

struct ParsedFile {
  std::map<std::string, std::string> header;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::string> features, targets;
  std::map<std::string, Matrix> matrices;
};

ParsedFile read_blocks(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("model file: empty");
  {
    const auto [k, v] = key_value(line);
    if (k != "format") throw IoError("model file: first line must declare the format");
    if (v != kModelFormat)
      throw InputError("model file: unsupported format version '" + v + "' (expected " + kModelFormat + ")");
  }
  ParsedFile pf;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line == "end") {
      ended = true;
      break;
    }
    const auto [key, value] = key_value(line);
    if (key == "config") {
      const auto [ck, cv] = key_value(value);
      pf.config.emplace_back(ck, cv);
    } else if (key == "feature") {
      pf.features.push_back(value);
    } else if (key == "target") {
      pf.targets.push_back(value);
    } else if (key == "matrix") {
      std::istringstream hs(value);
      std::string name, rs, cs;
      if (!(hs >> name >> rs >> cs)) throw IoError("model file: malformed matrix header '" + line + "'");
      const Index rows = parse_count(rs, "matrix " + name);
      const Index cols = parse_count(cs, "matrix " + name);
      Matrix m(rows, cols);
      for (Index i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw IoError("model file: truncated in matrix " + name);
        std::istringstream rsx(line);
        std::string cell;
        Index j = 0;
        while (rsx >> cell) {
          if (j >= cols) throw IoError("model file: too many values in matrix " + name + " row " + std::to_string(i));
          m(i, j++) = parse_number(cell, "matrix " + name);
        }
        if (j != cols) throw IoError("model file: truncated row " + std::to_string(i) + " in matrix " + name);
      }
      pf.matrices[name] = std::move(m);
    } else {
      pf.header[key] = value;
    }
  }
  if (!ended) throw IoError("model file: truncated (missing end marker)");
  return pf;
}

const Matrix& need(const ParsedFile& pf, const std::string& name) {
  const auto it = pf.matrices.find(name);
  if (it == pf.matrices.end()) throw IoError("model file: missing matrix '" + name + "'");
  return it->second;
}

const std::string& need_key(const ParsedFile& pf, const std::string& key) {
  const auto it = pf.header.find(key);
  if (it == pf.header.end()) throw IoError("model file: missing key '" + key + "'");
  return it->second;
}

Vector as_vector(const Matrix& m, const std::string& name) {
  if (m.cols() != 1) throw IoError("model file: matrix '" + name + "' must have one column");
  return m.col(0);
}

std::vector<bool> parse_bools(const std::string& s) {
  std::vector<bool> out;
  std::istringstream in(s);
  std::string t;
  while (in >> t) {
    if (t != "0" && t != "1") throw IoError("model file: bad supervised flag '" + t + "'");
    out.push_back(t == "1");
  }
  return out;
}

Matrix standardize_if_needed(const ModelArtifacts& a, const Matrix& X) {
  if (!a.feature_names.empty() && static_cast<Index>(a.feature_names.size()) != X.cols())
    throw InputError("predict: data has " + std::to_string(X.cols()) + " covariates, model expects " +
                     std::to_string(a.feature_names.size()));
  return a.standardizer ? a.standardizer->apply(X) : X;
}

}  // namespace

std::string to_string(ModelTag tag) {
  switch (tag) {
    case ModelTag::gpcr: return "gpcr";
    case ModelTag::svae: return "svae";
    case ModelTag::pcr: return "pcr";
    case ModelTag::ridge: return "ridge";
  }
  return "gpcr";
}

ModelTag model_tag_from_string(const std::string& s) {
  if (s == "gpcr") return ModelTag::gpcr;
  if (s == "svae") return ModelTag::svae;
  if (s == "pcr") return ModelTag::pcr;
  if (s == "ridge") return ModelTag::ridge;
  throw InputError("unknown model tag '" + s + "' (expected gpcr, svae, pcr or ridge)");
}

void ModelArtifacts::validate() const {
  switch (tag) {
    case ModelTag::svae:
      if (!encoder) throw InputError("svae artifacts need an encoder");
      [[fallthrough]];
    case ModelTag::gpcr:
      if (!model || !head) throw InputError(to_string(tag) + " artifacts need a factor model and head");
      if (head->latents() != model->latents()) throw InputError("head latent count does not match the model");
      break;
    case ModelTag::pcr:
      if (!pcr) throw InputError("pcr artifacts missing");
      break;
    case ModelTag::ridge:
      if (!ridge) throw InputError("ridge artifacts missing");
      break;
  }
}

Matrix latent_scores(const ModelArtifacts& a, const Matrix& X_raw, ScoreSource source) {
  a.validate();
  if (a.tag != ModelTag::gpcr && a.tag != ModelTag::svae) throw InputError("latent scores need a gpcr or svae model");
  const Matrix X = standardize_if_needed(a, X_raw);
  if (X.cols() != a.model->dim()) throw InputError("predict: covariate count does not match the model");
  const Matrix Xc = a.model->demean(X);
  if (a.tag == ModelTag::svae && source == ScoreSource::encoder) return a.encoder->means(Xc);
  return posterior_mean_scores(*a.model, Xc);
}

Matrix predict_linear(const ModelArtifacts& a, const Matrix& X_raw, ScoreSource source) {
  a.validate();
  switch (a.tag) {
    case ModelTag::gpcr:
    case ModelTag::svae: return a.head->linear_predictor(latent_scores(a, X_raw, source));
    case ModelTag::pcr: return a.pcr->linear_predictor(standardize_if_needed(a, X_raw));
    case ModelTag::ridge: return a.ridge->linear_predictor(standardize_if_needed(a, X_raw));
  }
  return {};
}

Matrix predict_response(const ModelArtifacts& a, const Matrix& X_raw, ScoreSource source) {
  Matrix t = predict_linear(a, X_raw, source);
  Link link = Link::gaussian;
  if (a.head) link = a.head->link;
  if (a.pcr) link = a.pcr->head.link;
  if (a.ridge) link = a.ridge->link;
  if (link == Link::logistic) t = t.unaryExpr([](double v) { return kernels::sigmoid(v); });
  return t;
}

std::string serialize_model(const ModelArtifacts& a) {
  a.validate();
  std::ostringstream out;
  out << "format " << kModelFormat << '\n';
  out << "tag " << to_string(a.tag) << '\n';
  for (const auto& [k, v] : a.config) out << "config " << k << ' ' << v << '\n';
  for (const auto& f : a.feature_names) out << "feature " << f << '\n';
  for (const auto& t : a.target_names) out << "target " << t << '\n';
  auto put_head = [&](const PredictiveHead& h) {
    out << "link " << to_string(h.link) << '\n';
    out << "noise_var " << format_double(h.noise_var) << '\n';
    out << "supervised " << bool_list(h.supervised) << '\n';
  };
  switch (a.tag) {
    case ModelTag::gpcr:
    case ModelTag::svae:
      put_head(*a.head);
      out << "isotropic " << (a.model->isotropic() ? 1 : 0) << '\n';
      put_matrix(out, "loadings", a.model->loadings());
      put_matrix(out, "variances", a.model->variances());
      put_matrix(out, "mean_offset", a.model->mean_offset());
      put_matrix(out, "coef", a.head->coef);
      put_matrix(out, "intercept", a.head->intercept);
      if (a.tag == ModelTag::svae) {
        put_matrix(out, "encoder_A", a.encoder->A);
        put_matrix(out, "encoder_intercept", a.encoder->intercept);
        put_matrix(out, "encoder_variances", a.encoder->variances);
      }
      break;
    case ModelTag::pcr:
      put_head(a.pcr->head);
      out << "penalty " << format_double(a.pcr->penalty) << '\n';
      put_matrix(out, "components", a.pcr->components);
      put_matrix(out, "mean_offset", a.pcr->mean_offset);
      put_matrix(out, "coef", a.pcr->head.coef);
      put_matrix(out, "intercept", a.pcr->head.intercept);
      break;
    case ModelTag::ridge:
      out << "link " << to_string(a.ridge->link) << '\n';
      out << "penalty " << format_double(a.ridge->penalty) << '\n';
      put_matrix(out, "coef", a.ridge->coef);
      put_matrix(out, "intercept", a.ridge->intercept);
      break;
  }
  if (a.standardizer) {
    put_matrix(out, "standardizer_means", a.standardizer->means);
    put_matrix(out, "standardizer_stds", a.standardizer->stds);
  }
  out << "end\n";
  return out.str();
}

ModelArtifacts parse_model(const std::string& text) {
  const ParsedFile pf = read_blocks(text);
  ModelArtifacts a;
  a.tag = model_tag_from_string(need_key(pf, "tag"));
  a.config = pf.config;
  a.feature_names = pf.features;
  a.target_names = pf.targets;
  auto read_head = [&](Index latents) {
    PredictiveHead h;
    h.link = link_from_string(need_key(pf, "link"));
    h.noise_var = parse_number(need_key(pf, "noise_var"), "noise_var");
    h.supervised = parse_bools(need_key(pf, "supervised"));
    h.coef = need(pf, "coef");
    h.intercept = as_vector(need(pf, "intercept"), "intercept");
    if (static_cast<Index>(h.supervised.size()) != latents || h.coef.rows() != latents)
      throw IoError("model file: head shape does not match the latent count");
    h.validate();
    return h;
  };
  switch (a.tag) {
    case ModelTag::gpcr:
    case ModelTag::svae: {
      const bool iso = need_key(pf, "isotropic") == "1";
      a.model.emplace(need(pf, "loadings"), as_vector(need(pf, "variances"), "variances"),
                      as_vector(need(pf, "mean_offset"), "mean_offset"), iso);
      a.head = read_head(a.model->latents());
      if (a.tag == ModelTag::svae) {
        LinearEncoder e;
        e.A = need(pf, "encoder_A");
        e.intercept = as_vector(need(pf, "encoder_intercept"), "encoder_intercept");
        e.variances = as_vector(need(pf, "encoder_variances"), "encoder_variances");
        e.validate();
        a.encoder = std::move(e);
      }
      break;
    }
    case ModelTag::pcr: {
      PcrModel m;
      m.components = need(pf, "components");
      m.mean_offset = as_vector(need(pf, "mean_offset"), "mean_offset");
      m.penalty = parse_number(need_key(pf, "penalty"), "penalty");
      m.head = read_head(m.components.cols());
      a.pcr = std::move(m);
      break;
    }
    case ModelTag::ridge: {
      RidgeModel r;
      r.link = link_from_string(need_key(pf, "link"));
      r.penalty = parse_number(need_key(pf, "penalty"), "penalty");
      r.coef = need(pf, "coef");
      r.intercept = as_vector(need(pf, "intercept"), "intercept");
      a.ridge = std::move(r);
      break;
    }
  }
  if (pf.matrices.count("standardizer_means")) {
    StandardizerState s;
    s.means = as_vector(need(pf, "standardizer_means"), "standardizer_means");
    s.stds = as_vector(need(pf, "standardizer_stds"), "standardizer_stds");
    a.standardizer = std::move(s);
  }
  a.validate();
  return a;
}

void save_model(const std::string& path, const ModelArtifacts& a) { atomic_write(path, serialize_model(a)); }

ModelArtifacts load_model(const std::string& path) { return parse_model(read_file(path)); }

}  // namespace gpcr

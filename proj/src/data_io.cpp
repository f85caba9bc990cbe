#include <gpcr/data_io.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unistd.h>

#include <gpcr/error.hpp>

namespace gpcr {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

void Dataset::validate() const {
  if (Y.rows() != X.rows()) throw InputError("dataset: X and Y row counts differ");
  if (!groups.empty() && static_cast<Index>(groups.size()) != X.rows())
    throw InputError("dataset: group label count differs from row count");
  if (static_cast<Index>(feature_names.size()) != X.cols()) throw InputError("dataset: feature name count mismatch");
  if (static_cast<Index>(target_names.size()) != Y.cols()) throw InputError("dataset: target name count mismatch");
  if (!X.allFinite() || !Y.allFinite()) throw InputError("dataset: non-finite entries");
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path dir = target.has_parent_path() ? target.parent_path() : fs::path(".");
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("output directory '" + dir.string() + "' does not exist");
  const fs::path tmp = dir / ("." + target.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out << content;
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw IoError("error writing '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path + "'");
  }
}

Dataset load_csv(const std::string& path, const CsvSpec& spec) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": missing header row");
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);
  std::map<std::string, Index> where;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) throw InputError(path + ": empty column name at position " + std::to_string(c + 1));
    if (!where.emplace(header[c], static_cast<Index>(c)).second)
      throw InputError(path + ": duplicate column '" + header[c] + "'");
  }
  auto require = [&](const std::string& name, const char* role) {
    if (!where.count(name)) throw InputError(path + ": " + role + " column '" + name + "' not found");
  };

  std::set<Index> target_set, dropped;
  std::vector<Index> target_cols;
  for (const auto& t : spec.target_columns) {
    if (!where.count(t)) {
      if (spec.targets_optional) continue;
      require(t, "target");
    }
    if (target_set.insert(where[t]).second) target_cols.push_back(where[t]);
  }
  if (!spec.target_prefix.empty()) {
    bool any = false;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c].rfind(spec.target_prefix, 0) == 0) {
        any = true;
        if (target_set.insert(static_cast<Index>(c)).second) target_cols.push_back(static_cast<Index>(c));
      }
    }
    if (!any && !spec.targets_optional)
      throw InputError(path + ": no column starts with target prefix '" + spec.target_prefix + "'");
  }
  Index group_col = -1;
  if (!spec.group_column.empty()) {
    require(spec.group_column, "group");
    group_col = where[spec.group_column];
  }
  for (const auto& d : spec.drop_columns)
    if (where.count(d)) dropped.insert(where[d]);

  std::vector<Index> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto ci = static_cast<Index>(c);
    if (!target_set.count(ci) && ci != group_col && !dropped.count(ci)) feature_cols.push_back(ci);
  }

  std::vector<std::vector<double>> values;
  std::vector<std::string> groups;
  Index row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty() || line == "\r") continue;
    ++row;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw InputError(path + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " cells, expected " + std::to_string(header.size()));
    }
    std::vector<double> parsed(header.size(), 0.0);
    for (std::size_t c = 0; c < header.size(); ++c) {
      const auto ci = static_cast<Index>(c);
      if (ci == group_col || dropped.count(ci)) continue;
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        throw InputError(path + ": row " + std::to_string(row) + ", column '" + header[c] + "': cannot parse '" +
                         trim(cells[c]) + "' as a number");
      }
      if (!std::isfinite(v)) {
        throw InputError(path + ": row " + std::to_string(row) + ", column '" + header[c] +
                         "': non-finite value '" + trim(cells[c]) + "'");
      }
      parsed[c] = v;
    }
    if (group_col >= 0) groups.push_back(trim(cells[static_cast<std::size_t>(group_col)]));
    values.push_back(std::move(parsed));
  }
  if (in.bad()) throw IoError("error reading '" + path + "'");
  if (values.empty()) throw InputError(path + ": no data rows");

  Dataset ds;
  const auto N = static_cast<Index>(values.size());
  ds.X.resize(N, static_cast<Index>(feature_cols.size()));
  ds.Y.resize(N, static_cast<Index>(target_cols.size()));
  for (Index i = 0; i < N; ++i) {
    const auto& r = values[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < feature_cols.size(); ++k)
      ds.X(i, static_cast<Index>(k)) = r[static_cast<std::size_t>(feature_cols[k])];
    for (std::size_t k = 0; k < target_cols.size(); ++k)
      ds.Y(i, static_cast<Index>(k)) = r[static_cast<std::size_t>(target_cols[k])];
  }
  for (Index c : feature_cols) ds.feature_names.push_back(header[static_cast<std::size_t>(c)]);
  for (Index c : target_cols) ds.target_names.push_back(header[static_cast<std::size_t>(c)]);
  ds.groups = std::move(groups);
  ds.binary_target = ds.Y.cols() > 0 && (ds.Y.array() == 0.0 || ds.Y.array() == 1.0).all();
  return ds;
}

void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& values) {
  if (static_cast<Index>(header.size()) != values.cols()) throw InputError("write_csv: header width mismatch");
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out += ',';
    out += header[c];
  }
  out += '\n';
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      if (j) out += ',';
      out += format_double(values(i, j));
    }
    out += '\n';
  }
  atomic_write(path, out);
}

Matrix StandardizerState::apply(const Matrix& X) const {
  if (X.cols() != means.size()) throw InputError("standardizer: column count mismatch");
  return (X.rowwise() - means.transpose()).array().rowwise() / stds.transpose().array();
}

StandardizerState fit_standardizer(const Dataset& train) {
  if (train.rows() < 1) throw InputError("standardize: empty training set");
  StandardizerState s;
  s.means = train.X.colwise().mean().transpose();
  const Matrix centered = train.X.rowwise() - s.means.transpose();
  s.stds = (centered.colwise().squaredNorm().transpose() / static_cast<double>(train.rows())).cwiseSqrt();
  std::string bad;
  for (Index j = 0; j < s.stds.size(); ++j) {
    if (!(s.stds[j] > 0.0)) {
      if (!bad.empty()) bad += ", ";
      bad += j < static_cast<Index>(train.feature_names.size()) ? train.feature_names[static_cast<std::size_t>(j)]
                                                                : std::to_string(j);
    }
  }
  if (!bad.empty()) throw InputError("standardize: zero-variance columns: " + bad);
  return s;
}

Dataset apply(const StandardizerState& state, const Dataset& ds) {
  Dataset out = ds;
  out.X = state.apply(ds.X);
  return out;
}

std::pair<StandardizerState, Dataset> standardize(const Dataset& train) {
  StandardizerState s = fit_standardizer(train);
  Dataset t = apply(s, train);
  return {std::move(s), std::move(t)};
}

Dataset subset_rows(const Dataset& ds, const std::vector<Index>& idx) {
  Dataset out;
  out.X = ds.X(idx, Eigen::all);
  out.Y = ds.Y(idx, Eigen::all);
  if (!ds.groups.empty())
    for (Index i : idx) out.groups.push_back(ds.groups[static_cast<std::size_t>(i)]);
  out.feature_names = ds.feature_names;
  out.target_names = ds.target_names;
  out.binary_target = ds.binary_target;
  return out;
}

std::pair<Dataset, Dataset> split_by_group(const Dataset& ds, double test_fraction, Seed seed) {
  if (ds.groups.empty()) throw InputError("split_by_group: dataset has no group column");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InputError("split_by_group: test fraction must lie in (0, 1)");
  std::vector<std::string> unique;
  {
    std::set<std::string> seen;
    for (const auto& g : ds.groups)
      if (seen.insert(g).second) unique.push_back(g);
  }
  if (unique.size() < 2) throw InputError("split_by_group: need at least 2 distinct groups");
  std::sort(unique.begin(), unique.end());
  std::mt19937_64 rng(seed);
  std::shuffle(unique.begin(), unique.end(), rng);
  const auto total = static_cast<long long>(unique.size());
  const long long n_test = std::clamp(std::llround(test_fraction * static_cast<double>(total)), 1LL, total - 1);
  const std::set<std::string> test_groups(unique.begin(), unique.begin() + n_test);
  std::vector<Index> tr, te;
  for (Index i = 0; i < ds.rows(); ++i) (test_groups.count(ds.groups[static_cast<std::size_t>(i)]) ? te : tr).push_back(i);
  return {subset_rows(ds, tr), subset_rows(ds, te)};
}

}  // namespace gpcr

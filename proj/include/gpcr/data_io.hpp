#pragma once

// CSV ingestion, standardization, group-wise splitting, and atomic file
// output.

#include <string>
#include <utility>
#include <vector>

#include <gpcr/types.hpp>

namespace gpcr {

struct Dataset {
  Matrix X;                                ///< N x p covariates
  Matrix Y;                                ///< N x K outcomes (K may be 0)
  std::vector<std::string> groups;         ///< N group labels, empty if none
  std::vector<std::string> feature_names;  ///< p
  std::vector<std::string> target_names;   ///< K
  bool binary_target = false;              ///< every outcome value is 0 or 1

  Index rows() const { return X.rows(); }
  void validate() const;
};

struct CsvSpec {
  std::vector<std::string> target_columns;  ///< explicit outcome columns
  std::string target_prefix;                ///< every column starting with this is an outcome
  std::string group_column;                 ///< optional, read as text
  std::vector<std::string> drop_columns;    ///< ignored entirely
  /// When set, missing target columns are tolerated (prediction on data
  /// without truth).
  bool targets_optional = false;
};

/// Header row required. Data cells must parse as finite decimals, except in
/// the group column. Errors name the 1-based data row and the column.
Dataset load_csv(const std::string& path, const CsvSpec& spec);

/// Write a numeric table with a header row; 17 significant digits.
void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& values);

struct StandardizerState {
  Vector means;
  Vector stds;  ///< population (divisor N) standard deviations

  Matrix apply(const Matrix& X) const;
};

/// Fit on the covariates of `train`; zero-variance columns are an input error
/// naming every offending column.
StandardizerState fit_standardizer(const Dataset& train);
std::pair<StandardizerState, Dataset> standardize(const Dataset& train);
Dataset apply(const StandardizerState& state, const Dataset& ds);

/// Rows restricted to `idx`, preserving order.
Dataset subset_rows(const Dataset& ds, const std::vector<Index>& idx);

/// Disjoint group sets; the test side holds round(test_fraction * groups)
/// groups, at least one and at most all but one.
std::pair<Dataset, Dataset> split_by_group(const Dataset& ds, double test_fraction, Seed seed);

/// Write through a temporary file in the same directory, then rename.
void atomic_write(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

/// Shortest text that parses back to the same double (17 significant digits).
std::string format_double(double v);

/// Strict full-string decimal parse.
bool parse_double(const std::string& text, double& out);

}  // namespace gpcr

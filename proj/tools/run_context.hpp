#pragma once

// Per-command bookkeeping: output directory, file inventory, metrics, and
// the JSON manifest written last.

#include <string>
#include <vector>

#include <json.hpp>

#include <gpcr/types.hpp>

namespace gpcr::cli {

class RunContext {
 public:
  RunContext(std::string command, std::vector<std::string> argv, std::string out_dir);

  /// Creates the output directory; call only once all inputs are loaded.
  void prepare_output();

  /// Full path for an output file, recorded in the inventory.
  std::string output(const std::string& name);

  void write_text(const std::string& name, const std::string& content);
  void write_table(const std::string& name, const std::vector<std::string>& header, const Matrix& values);

  nlohmann::ordered_json& metrics() { return metrics_; }
  nlohmann::ordered_json& config() { return config_; }
  void set_seed(Seed s) { seed_ = s; }

  /// Writes manifest.json listing every recorded output.
  void finish();

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::string out_dir_;
  std::string started_;
  Seed seed_ = 0;
  std::vector<std::string> outputs_;
  nlohmann::ordered_json metrics_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json config_ = nlohmann::ordered_json::object();
};

std::string utc_timestamp();

}  // namespace gpcr::cli

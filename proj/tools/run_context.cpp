#include "run_context.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>

#include <gpcr/data_io.hpp>
#include <gpcr/error.hpp>

namespace gpcr::cli {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunContext::RunContext(std::string command, std::vector<std::string> argv, std::string out_dir)
    : command_(std::move(command)), argv_(std::move(argv)), out_dir_(std::move(out_dir)), started_(utc_timestamp()) {}

void RunContext::prepare_output() {
  std::error_code ec;
  std::filesystem::create_directories(out_dir_, ec);
  if (ec || !std::filesystem::is_directory(out_dir_)) throw IoError("cannot create output directory '" + out_dir_ + "'");
}

std::string RunContext::output(const std::string& name) {
  outputs_.push_back(name);
  return (std::filesystem::path(out_dir_) / name).string();
}

void RunContext::write_text(const std::string& name, const std::string& content) {
  atomic_write(output(name), content);
}

void RunContext::write_table(const std::string& name, const std::vector<std::string>& header, const Matrix& values) {
  write_csv(output(name), header, values);
}

void RunContext::finish() {
  nlohmann::ordered_json m;
  m["command"] = command_;
  m["argv"] = argv_;
  m["config"] = config_;
  m["seed"] = seed_;
  m["started_utc"] = started_;
  m["finished_utc"] = utc_timestamp();
  m["outputs"] = outputs_;
  m["metrics"] = metrics_;
  atomic_write((std::filesystem::path(out_dir_) / "manifest.json").string(), m.dump(2) + "\n");
}

}  // namespace gpcr::cli

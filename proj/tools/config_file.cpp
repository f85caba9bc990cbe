#include "config_file.hpp"

#include <fstream>
#include <set>

#include <gpcr/error.hpp>

namespace gpcr::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string flag_name(const std::string& arg) {
  if (arg.rfind("--", 0) != 0) return "";
  const auto eq = arg.find('=');
  return arg.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
}

}  // namespace

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  // args[0] is the subcommand; the rest are its arguments.
  std::string path;
  std::vector<std::string> explicit_args;
  std::set<std::string> given;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw InputError("--config needs a file path");
      path = args[++i];
      continue;
    }
    if (a.rfind("--config=", 0) == 0) {
      path = a.substr(9);
      continue;
    }
    const std::string name = flag_name(a);
    if (!name.empty()) given.insert(name);
    explicit_args.push_back(a);
  }
  if (path.empty()) return explicit_args;

  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::vector<std::string> injected;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw InputError(path + ":" + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key = key.substr(2);
    if (key.empty()) throw InputError(path + ":" + std::to_string(line_no) + ": empty key");
    if (key == "config") throw InputError(path + ":" + std::to_string(line_no) + ": nested config files are not supported");
    if (given.count(key)) continue;
    injected.push_back("--" + key + "=" + value);
  }
  if (explicit_args.empty()) return injected;
  std::vector<std::string> out;
  out.push_back(explicit_args.front());
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), explicit_args.begin() + 1, explicit_args.end());
  return out;
}

}  // namespace gpcr::cli

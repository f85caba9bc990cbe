#pragma once

#include <string>
#include <vector>

namespace gpcr::cli {

/// Expands `--config FILE` (or `--config=FILE`) into `--key=value` arguments
/// for every `key=value` line of FILE whose flag is not already given on the
/// command line. Blank lines and lines starting with '#' are ignored. The
/// injected arguments are placed before the explicit ones.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

}  // namespace gpcr::cli

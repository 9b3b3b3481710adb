#pragma once

// INI-style experiment configuration: `[section]` headers, `key = value`
// lines, `#` or `;` comments. Lists are comma separated.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "streamrobust/bench.hpp"

namespace streamrobust {

/// Carries every problem found in a configuration, one message per entry.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/// Parses and validates. Unknown sections or keys, malformed values, missing
/// required keys and semantic violations are all collected before throwing.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Inverse of parse_config for the fields it reads.
void write_config(std::ostream& out, const ExperimentConfig& config);

}  // namespace streamrobust

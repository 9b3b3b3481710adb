#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace streamrobust::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

struct VerifyFlags {
  std::optional<std::string> only;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

struct ExperimentFlags {
  std::filesystem::path config;
  std::filesystem::path out = "out";
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  bool svg = false;
};

/// Seed precedence: --seed, then STREAMROBUST_SEED, then `fallback`.
/// Throws std::invalid_argument if the environment value is not a u64.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback,
                           std::string* source = nullptr);

int cmd_verify(const VerifyFlags& flags, std::ostream& out, std::ostream& err);
int cmd_convergence(const ExperimentFlags& flags, std::ostream& out, std::ostream& err);
int cmd_breakdown(const ExperimentFlags& flags, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace streamrobust::cli

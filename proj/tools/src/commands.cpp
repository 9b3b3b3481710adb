#include "commands.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <system_error>
#include <vector>

#include <CLI11.hpp>

#include "streamrobust/bench.hpp"
#include "streamrobust/config.hpp"
#include "streamrobust/parallel.hpp"
#include "streamrobust/svg.hpp"
#include "streamrobust/verify.hpp"

namespace streamrobust::cli {

namespace {

constexpr const char* kSeedEnv = "STREAMROBUST_SEED";

/// Thrown for problems the user must fix (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw UsageError("cannot create output directory '" + dir.string() + "'");
  }
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << contents;
  f.close();
  if (!f) throw std::runtime_error("failed to write '" + path.string() + "'");
}

template <class Writer>
std::string render(Writer&& writer) {
  std::ostringstream s;
  writer(s);
  return s.str();
}

ExperimentConfig load_with_seed(const ExperimentFlags& flags, std::string& seed_source) {
  ExperimentConfig config = load_config(flags.config);
  config.seed = resolve_seed(flags.seed, config.seed, &seed_source);
  return config;
}

struct Manifest {
  std::string command;
  const ExperimentConfig* config = nullptr;
  std::string seed_source;
  std::vector<std::string> files;
  std::vector<std::pair<std::string, std::string>> extras;
  std::vector<CellSeed> seeds;

  std::string text() const {
    std::ostringstream m;
    m << "# reproduce with: streamrobust " << command << " --config config.ini\n"
      << "tool_version=" << tool_version() << '\n'
      << "command=" << command << '\n'
      << "config_digest=" << config->digest() << '\n'
      << "master_seed=" << config->seed << '\n'
      << "seed_source=" << seed_source << '\n';
    for (const auto& f : files) m << "file=" << f << '\n';
    for (const auto& [k, v] : extras) m << k << '=' << v << '\n';
    for (const auto& s : seeds) m << "cell_seed[" << s.cell << "]=" << s.seed << '\n';
    return m.str();
  }
};

void finish_experiment(const ExperimentFlags& flags, Manifest& manifest) {
  write_file(flags.out / "config.ini", render([&](std::ostream& o) {
               write_config(o, *manifest.config);
             }));
  manifest.files.insert(manifest.files.begin(), "config.ini");
  write_file(flags.out / "manifest.txt", manifest.text());
}

/// Maps exceptions to exit codes and messages.
template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}

}  // namespace

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::uint64_t fallback,
                           std::string* source) {
  if (flag) {
    if (source) *source = "flag";
    return *flag;
  }
  if (const char* env = std::getenv(kSeedEnv); env != nullptr && *env != '\0') {
    const std::string_view text(env);
    std::uint64_t value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
      throw std::invalid_argument(std::string(kSeedEnv) + " must be an unsigned 64-bit integer, got '" +
                                  std::string(text) + "'");
    }
    if (source) *source = "env";
    return value;
  }
  if (source) *source = "config";
  return fallback;
}

int cmd_verify(const VerifyFlags& flags, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    VerifyOptions options;
    options.only = flags.only;
    options.seed = resolve_seed(flags.seed, options.seed);
    options.jobs = flags.jobs;
    const auto results = run_verify_suite(options);
    write_report(out, results);
    std::size_t failed = 0, warned = 0;
    for (const auto& r : results) {
      failed += r.status == CheckStatus::Fail;
      warned += r.status == CheckStatus::Warn;
      if (r.status != CheckStatus::Pass && !r.detail.empty()) {
        err << r.name << ": " << r.detail << '\n';
      }
    }
    err << "# " << results.size() << " checks, " << failed << " failed, " << warned
        << " warnings (seed " << options.seed << ")\n";
    return suite_passed(results) ? kExitOk : kExitCheckFailed;
  });
}

int cmd_convergence(const ExperimentFlags& flags, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::string seed_source;
    const ExperimentConfig config = load_with_seed(flags, seed_source);
    ensure_directory(flags.out);
    const auto result = convergence_experiment(config, flags.jobs);

    Manifest manifest{"convergence", &config, seed_source, {}, {}, result.seeds};
    for (const auto& table : result.tables) {
      const std::string name = "convergence_" + table.estimator + "_" + table.covariance + ".csv";
      write_file(flags.out / name,
                 render([&](std::ostream& o) { write_convergence_table(o, table, config); }));
      manifest.files.push_back(name);
      out << name << ": final mean err_H " << format_double(table.mean_err_h.back());
      try {
        const auto fit = fit_rate_slope(table.n, table.mean_err_h);
        out << ", slope " << format_double(fit.slope);
        manifest.extras.push_back({"slope[" + table.estimator + "/" + table.covariance + "]",
                                   format_double(fit.slope)});
      } catch (const std::invalid_argument&) {
        out << ", slope unavailable";
      }
      out << '\n';
    }
    for (std::size_t c = 0; c < result.tau_opt.size(); ++c) {
      manifest.extras.push_back(
          {"tau_opt[" + std::string(covariance_name(config.covariances[c])) + "]",
           format_double(result.tau_opt[c])});
    }
    if (flags.svg) {
      for (auto covariance : config.covariances) {
        const std::string cov(covariance_name(covariance));
        std::vector<SvgSeries> series;
        for (const auto& t : result.tables) {
          if (t.covariance != cov) continue;
          SvgSeries s{t.estimator, {}, t.mean_err_h};
          for (auto n : t.n) s.x.push_back(static_cast<double>(n));
          series.push_back(std::move(s));
        }
        const std::string name = "convergence_" + cov + ".svg";
        write_file(flags.out / name, render([&](std::ostream& o) {
                     write_loglog_svg(o, "mean err_H, covariance " + cov, series, "n",
                                      "err_H");
                   }));
        manifest.files.push_back(name);
      }
    }
    finish_experiment(flags, manifest);
    return kExitOk;
  });
}

int cmd_breakdown(const ExperimentFlags& flags, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::string seed_source;
    const ExperimentConfig config = load_with_seed(flags, seed_source);
    if (config.eta_grid.empty()) throw UsageError("breakdown.eta_grid must not be empty");
    ensure_directory(flags.out);
    const auto result = breakdown_experiment(config, flags.jobs);

    Manifest manifest{"breakdown", &config, seed_source, {"breakdown.csv"}, {}, result.seeds};
    const std::string table =
        render([&](std::ostream& o) { write_breakdown_table(o, result, config); });
    write_file(flags.out / "breakdown.csv", table);
    out << table;
    for (const auto& row : result.rows) {
      manifest.extras.push_back({"tau_opt[eta=" + format_double(row.eta) + "]",
                                 format_double(row.tau_opt)});
    }
    if (flags.svg) {
      std::vector<SvgSeries> series;
      for (std::size_t e = 0; e < result.estimators.size(); ++e) {
        SvgSeries s{result.estimators[e], {}, {}};
        for (const auto& row : result.rows) {
          s.x.push_back(row.eta);
          s.y.push_back(row.final_err_h[e]);
        }
        series.push_back(std::move(s));
      }
      write_file(flags.out / "breakdown.svg", render([&](std::ostream& o) {
                   write_loglog_svg(o, "final err_H versus eta", series, "eta", "err_H");
                 }));
      manifest.files.push_back("breakdown.svg");
    }
    finish_experiment(flags, manifest);
    return kExitOk;
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust streaming regression with averaged l1 SGD: verification and experiments",
               "streamrobust"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tool_version()));

  const std::size_t default_jobs_value = default_jobs();

  VerifyFlags verify;
  verify.jobs = default_jobs_value;
  auto* verify_cmd = app.add_subcommand("verify", "Run the numerical verification suite");
  verify_cmd->add_option("--only", verify.only, "Run a single named check");
  verify_cmd->add_option("--seed", verify.seed, "Master seed (overrides STREAMROBUST_SEED)");
  verify_cmd->add_option("--jobs", verify.jobs, "Parallel workers")->check(CLI::PositiveNumber);

  ExperimentFlags experiment;
  experiment.jobs = default_jobs_value;
  auto add_experiment_flags = [&experiment](CLI::App* cmd) {
    cmd->add_option("--config", experiment.config, "Experiment configuration (INI)")
        ->required();
    cmd->add_option("--out", experiment.out, "Output directory")->capture_default_str();
    cmd->add_option("--seed", experiment.seed, "Master seed (overrides config and environment)");
    cmd->add_option("--jobs", experiment.jobs, "Parallel sweep cells")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--svg", experiment.svg, "Also write log-log SVG charts");
  };
  auto* convergence_cmd =
      app.add_subcommand("convergence", "Convergence curves per loss and covariance");
  add_experiment_flags(convergence_cmd);
  auto* breakdown_cmd = app.add_subcommand("breakdown", "Final error across an eta grid");
  add_experiment_flags(breakdown_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (verify_cmd->parsed()) {
    if (verify.only) {
      const auto& names = verify_check_names();
      if (std::find(names.begin(), names.end(), *verify.only) == names.end()) {
        err << "error: unknown check '" << *verify.only << "'; known checks:";
        for (const auto& n : names) err << ' ' << n;
        err << '\n';
        return kExitUsage;
      }
    }
    return cmd_verify(verify, out, err);
  }
  if (convergence_cmd->parsed()) return cmd_convergence(experiment, out, err);
  return cmd_breakdown(experiment, out, err);
}

}  // namespace streamrobust::cli

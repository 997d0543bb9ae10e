// mfkl <kind> --config path.json [--seed u64] [--out dir] [--threads k]
// mfkl report <dir>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mfkl/mfkl.hpp"

namespace {

using namespace mfkl;
using namespace mfkl::harness;

constexpr int kExitSchema = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitNonConvergence = 4;

std::size_t resolve_threads(std::optional<std::size_t> flag) {
  if (flag) {
    if (*flag == 0) throw ConfigError("--threads must be >= 1");
    return *flag;
  }
  const char* env = std::getenv("MFKL_THREADS");
  if (!env || !*env) return 1;
  std::size_t pos = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(env, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != std::string(env).size() || v == 0) throw ConfigError("MFKL_THREADS must be a positive integer");
  return v;
}

int run_kind(const std::string& kind, const std::string& config_path, std::optional<std::uint64_t> seed,
             std::optional<std::string> out, std::optional<std::size_t> threads_flag) {
  ExperimentConfig cfg = parse_config(read_json_file(config_path), kind);
  if (seed) {
    cfg.chain.master_seed = *seed;
    cfg.resolved["chain"]["seed"] = *seed;
  }
  const std::size_t threads = resolve_threads(threads_flag);
  const std::filesystem::path dir = out ? *out : cfg.output_dir;
  const auto res = run_experiment(cfg, dir, threads);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& c : res.checks) std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  std::cout << "wrote " << res.files.size() << " files to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic Langevin Monte Carlo for mean-field particle systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
  for (const char* k : kKinds) {
    auto* sub = app.add_subcommand(k, std::string("run the '") + k + "' experiment");
    sub->add_option("--config", config_path, "experiment JSON")->required();
    sub->add_option("--seed", seed, "override chain.seed");
    sub->add_option("--out", out, "output directory (default: config output_dir)");
    sub->add_option("--threads", threads, "worker threads (default: MFKL_THREADS, else 1)");
  }
  std::string report_dir;
  auto* report = app.add_subcommand("report", "print PASS/FAIL per check and write index.json");
  report->add_option("dir", report_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitSchema;
  }

  try {
    if (report->parsed()) return emit_report(report_dir, std::cout, std::cerr);
    for (const auto* sub : app.get_subcommands()) return run_kind(sub->get_name(), config_path, seed, out, threads);
  } catch (const NonConvergenceError& e) {
    std::cerr << "error: " << e.what() << " (last residual " << format_number(e.last_residual()) << ")\n";
    return kExitNonConvergence;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const CapabilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InvariantError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

// geoest command-line front end: scenario simulation, filter runtime
// comparison, batch benchmarking, and IMU log replay.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "geoest/harness.hpp"
#include "geoest/io.hpp"
#include "geoest/scenario.hpp"

namespace fs = std::filesystem;
using namespace geoest;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

struct OutputOptions {
  std::string out_dir = ".";
  std::string format = "csv";
};

void write_outputs(const RunResult& result, const std::string& stem,
                   const OutputOptions& opts) {
  fs::create_directories(opts.out_dir);
  const std::string base = (fs::path(opts.out_dir) / stem).string();
  if (opts.format == "csv" || opts.format == "both") {
    export_csv(result, base + ".csv");
    std::cout << "wrote " << base << ".csv\n";
  }
  if (opts.format == "svg" || opts.format == "both") {
    render_svg(result, base + ".svg");
    std::cout << "wrote " << base << ".svg\n";
  }
}

int exit_code_for_result(const RunResult& result) {
  bool all_failed = !result.filters.empty();
  for (const FilterSeries& s : result.filters) {
    if (!s.failed) all_failed = false;
  }
  return all_failed ? kExitNumerical : kExitOk;
}

void print_summary(const RunResult& result) {
  for (const FilterSeries& s : result.filters) {
    std::printf("%-18s phi_end=%10.4g rad  wall=%8.4f s%s%s%s\n",
                s.name.c_str(), s.phi.empty() ? 0.0 : s.phi.back(), s.wall_s,
                s.converged ? "  [converged]" : "",
                s.singular ? "  [singular]" : "", s.failed ? "  [failed]" : "");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geoest - geometric rigid-body state estimation toolbox"};
  app.require_subcommand(1);

  OutputOptions out_opts;
  std::string scenario_path;
  std::string overrides_path;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  int repeats = 5;
  std::string scenarios_dir = "scenarios";
  std::string imu_path;

  auto* sim = app.add_subcommand("simulate", "run one scenario");
  sim->add_option("scenario", scenario_path, "scenario .cfg file")->required();
  sim->add_option("--seed", seed_override, "override the scenario seed")
      ->each([&](const std::string&) { seed_set = true; });
  sim->add_option("--out", out_opts.out_dir, "output directory");
  sim->add_option("--format", out_opts.format, "csv|svg|both")
      ->check(CLI::IsMember({"csv", "svg", "both"}));

  auto* cmp = app.add_subcommand("compare", "time the configured filters");
  cmp->add_option("scenario", scenario_path, "scenario .cfg file")->required();
  cmp->add_option("--repeats", repeats, "timing repeats");
  cmp->add_option("--out", out_opts.out_dir, "output directory");

  auto* bench = app.add_subcommand("bench", "run every shipped scenario");
  bench->add_option("--scenarios", scenarios_dir, "scenario directory");
  bench->add_option("--out", out_opts.out_dir, "output directory");

  auto* rep = app.add_subcommand("replay", "replay an IMU log");
  rep->add_option("imu", imu_path, "IMU CSV log")->required();
  rep->add_option("--scenario", overrides_path, "replay overrides .cfg");
  rep->add_option("--out", out_opts.out_dir, "output directory");
  rep->add_option("--format", out_opts.format, "csv|svg|both")
      ->check(CLI::IsMember({"csv", "svg", "both"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      Scenario sc = Scenario::load(scenario_path);
      if (seed_set) sc.seed = seed_override;
      const RunResult result = run_scenario(sc);
      print_summary(result);
      write_outputs(result, sc.name, out_opts);
      return exit_code_for_result(result);
    }
    if (cmp->parsed()) {
      const Scenario sc = Scenario::load(scenario_path);
      const BenchmarkReport report = compare_filters(sc, repeats);
      for (std::size_t i = 0; i < report.entries.size(); ++i) {
        const BenchmarkEntry& e = report.entries[i];
        std::printf("%zu. %-18s total=%9.5f s  per-step=%8.3g s\n", i + 1,
                    e.name.c_str(), e.total_s, e.per_step_mean_s);
      }
      fs::create_directories(out_opts.out_dir);
      const std::string path =
          (fs::path(out_opts.out_dir) / (sc.name + "_bench.csv")).string();
      export_benchmark_csv(report, path);
      std::cout << "wrote " << path << "\n";
      return kExitOk;
    }
    if (bench->parsed()) {
      std::vector<fs::path> cfgs;
      for (const auto& entry : fs::directory_iterator(scenarios_dir)) {
        if (entry.path().extension() == ".cfg") cfgs.push_back(entry.path());
      }
      std::sort(cfgs.begin(), cfgs.end());
      if (cfgs.empty()) {
        std::cerr << "no .cfg scenarios under " << scenarios_dir << "\n";
        return kExitIo;
      }
      fs::create_directories(out_opts.out_dir);
      const std::string path =
          (fs::path(out_opts.out_dir) / "bench_report.csv").string();
      std::ofstream out(path);
      out << "scenario,filter,total_s,per_step_mean_s,converged,singular\n";
      for (const fs::path& cfg : cfgs) {
        const Scenario sc = Scenario::load(cfg.string());
        std::cout << "running " << sc.name << "...\n";
        const RunResult result = run_scenario(sc);
        for (const FilterSeries& s : result.filters) {
          out << sc.name << ',' << s.name << ',' << s.wall_s << ','
              << (s.steps_timed > 0 ? s.wall_s / s.steps_timed : 0.0) << ','
              << (s.converged ? 1 : 0) << ',' << (s.singular ? 1 : 0) << "\n";
        }
      }
      std::cout << "wrote " << path << "\n";
      return kExitOk;
    }
    if (rep->parsed()) {
      Config overrides;
      const Config* overrides_ptr = nullptr;
      if (!overrides_path.empty()) {
        overrides = Config::parse_file(overrides_path);
        overrides_ptr = &overrides;
      }
      const RunResult result = replay_imu(imu_path, overrides_ptr);
      print_summary(result);
      write_outputs(result, "replay", out_opts);
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NonMonotoneTimestamps& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

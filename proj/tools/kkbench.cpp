#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kkf/bench.hpp"
#include "kkf/error.hpp"
#include "kkf/models.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAllDiverged = 3;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw kkf::ConfigError("cannot open output file: " + path);
  return out;
}

struct CommonArgs {
  std::string scenario = "ungm";
  int realizations = 1;
  std::uint64_t seed = 42;
  double lambda = 1e-3;
  double kappa = 1e-3;
  std::optional<int> horizon;
  int workers = 0;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--scenario", a.scenario, "ungm | bot-cv | bot-ct")->required();
  cmd->add_option("--realizations", a.realizations, "Monte Carlo realizations")->required();
  cmd->add_option("--seed", a.seed, "base seed")->required();
  cmd->add_option("--lambda", a.lambda, "embedding regularizer");
  cmd->add_option("--kappa", a.kappa, "update regularizer");
  cmd->add_option("--horizon", a.horizon, "time steps per realization");
  cmd->add_option("--workers", a.workers, "worker threads (0 = all cores)");
  cmd->add_option("--out", a.out, "output CSV path")->required();
}

kkf::bench::ScenarioConfig base_config(const CommonArgs& a) {
  kkf::bench::ScenarioConfig cfg;
  cfg.scenario = kkf::bench::parse_scenario(a.scenario);
  cfg.realizations = a.realizations;
  cfg.seed = a.seed;
  cfg.lambda = a.lambda;
  cfg.kappa = a.kappa;
  cfg.horizon = a.horizon;
  cfg.workers = a.workers;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kernel Kalman filter benchmark"};
  app.require_subcommand(1);

  CommonArgs run_args;
  std::string run_filter;
  int run_particles = 20;
  std::string run_summary;
  CLI::App* run = app.add_subcommand("run", "Monte Carlo runs of one filter; writes per-run CSV");
  add_common(run, run_args);
  run->add_option("--filter", run_filter, "akkf-quadratic | akkf-quartic | akkf-gaussian | pf | gpf | ukf")
      ->required();
  run->add_option("--particles", run_particles, "particle count")->required();
  run->add_option("--summary", run_summary, "optional summary CSV path");

  CommonArgs sweep_args;
  std::string sweep_filters;
  std::string sweep_particles;
  std::string sweep_runs;
  CLI::App* sw = app.add_subcommand("sweep", "filters x particle counts; writes summary CSV");
  add_common(sw, sweep_args);
  sw->add_option("--filters", sweep_filters, "comma-separated filter list")->required();
  sw->add_option("--particles", sweep_particles, "comma-separated particle counts")->required();

  std::string sim_scenario = "ungm";
  std::uint64_t sim_seed = 42;
  std::optional<int> sim_horizon;
  std::string sim_out;
  CLI::App* sim = app.add_subcommand("simulate", "one trajectory as CSV");
  sim->add_option("--scenario", sim_scenario, "ungm | bot-cv | bot-ct")->required();
  sim->add_option("--seed", sim_seed, "seed");
  sim->add_option("--horizon", sim_horizon, "time steps");
  sim->add_option("--out", sim_out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      kkf::bench::ScenarioConfig cfg = base_config(run_args);
      cfg.filter = kkf::bench::parse_filter(run_filter);
      cfg.particles = run_particles;
      cfg.validate();
      std::ofstream out = open_out(run_args.out);
      const kkf::bench::McResult res = kkf::bench::run_mc(cfg);
      kkf::bench::write_runs_csv(out, cfg, res.records);
      if (!run_summary.empty()) {
        std::ofstream sout = open_out(run_summary);
        kkf::bench::write_summary_csv(sout, {{cfg.scenario, cfg.filter, cfg.particles, res.summary}});
      }
      std::cerr << kkf::bench::to_string(cfg.scenario) << ' ' << kkf::bench::to_string(cfg.filter)
                << " M=" << cfg.particles << " metric_mean=" << res.summary.metric_mean
                << " diverged=" << res.summary.diverged_count << '/' << cfg.realizations << '\n';
      return res.summary.runs == 0 ? kExitAllDiverged : 0;
    }
    if (*sw) {
      kkf::bench::ScenarioConfig cfg = base_config(sweep_args);
      std::vector<kkf::bench::FilterKind> filters;
      for (const auto& f : split_list(sweep_filters)) filters.push_back(kkf::bench::parse_filter(f));
      std::vector<int> grid;
      for (const auto& m : split_list(sweep_particles)) {
        try {
          grid.push_back(std::stoi(m));
        } catch (const std::exception&) {
          throw kkf::ConfigError("bad particle count: " + m);
        }
      }
      if (filters.empty() || grid.empty()) throw kkf::ConfigError("sweep needs non-empty filter and particle lists");
      for (auto f : filters)
        for (int m : grid) {
          kkf::bench::ScenarioConfig c = cfg;
          c.filter = f;
          c.particles = m;
          c.validate();
        }
      std::ofstream out = open_out(sweep_args.out);
      const auto rows = kkf::bench::sweep(cfg, grid, filters);
      kkf::bench::write_summary_csv(out, rows);
      bool all_diverged = true;
      for (const auto& r : rows) all_diverged = all_diverged && r.summary.runs == 0;
      return all_diverged ? kExitAllDiverged : 0;
    }
    if (*sim) {
      const auto scenario = kkf::bench::parse_scenario(sim_scenario);
      kkf::bench::ScenarioConfig cfg;
      cfg.scenario = scenario;
      cfg.horizon = sim_horizon;
      if (sim_horizon && *sim_horizon < 1) throw kkf::ConfigError("horizon must be >= 1");
      const int horizon = cfg.effective_horizon();
      const auto model = kkf::bench::make_model(scenario, horizon);
      kkf::Rng rng = kkf::derive_stream(sim_seed, 0, 0);
      const kkf::Trajectory traj = kkf::simulate(*model, horizon, rng);
      std::ofstream out = open_out(sim_out);
      kkf::write_trajectory_csv(out, traj);
      return 0;
    }
  } catch (const kkf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

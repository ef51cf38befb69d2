#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kkf/akkf.hpp"
#include "kkf/models.hpp"

namespace kkf::bench {

enum class Scenario { Ungm, BotCv, BotCt };
enum class FilterKind { AkkfQuadratic, AkkfQuartic, AkkfGaussian, Pf, Gpf, Ukf };

std::string to_string(Scenario s);
std::string to_string(FilterKind f);
Scenario parse_scenario(const std::string& s);
FilterKind parse_filter(const std::string& s);

struct ScenarioConfig {
  Scenario scenario = Scenario::Ungm;
  FilterKind filter = FilterKind::Pf;
  int particles = 20;
  int realizations = 1;
  std::uint64_t seed = 42;
  double lambda = 1e-3;
  double kappa = 1e-3;
  std::optional<int> horizon;
  int workers = 0;  // 0 = hardware concurrency

  void validate() const;
  int effective_horizon() const;
};

struct RunRecord {
  int realization = 0;
  Eigen::MatrixXd estimates;  // d_x x N; empty when the filter failed
  double metric = 0.0;        // MSE (ungm) or LMSE (bot-*)
  double runtime_s = 0.0;
  bool diverged = false;
  std::string failure;  // reason when diverged
};

/// Mean and sample standard deviation over non-diverged runs.
struct MetricsSummary {
  double metric_mean = 0.0;
  double metric_std = 0.0;
  int diverged_count = 0;
  double runtime_mean_s = 0.0;
  int runs = 0;
};

struct McResult {
  std::vector<RunRecord> records;
  MetricsSummary summary;
};

struct SweepRow {
  Scenario scenario;
  FilterKind filter;
  int particles;
  MetricsSummary summary;
};

/// (1/N) sum (x_n - x_hat_n)^2.
double mse(const Eigen::VectorXd& truth, const Eigen::VectorXd& est);

/// Natural log of the time-averaged Euclidean position error; -inf when the
/// error is exactly zero. Inputs are 2 x N position sequences.
double lmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& est);

/// Scenario metric on full state sequences: MSE of the scalar state for UNGM,
/// LMSE of the (xi, eta) components for the tracking scenarios.
double scenario_metric(Scenario s, const Eigen::MatrixXd& truth, const Eigen::MatrixXd& est);

ModelPtr make_model(Scenario s, int horizon);

AkkfConfig akkf_config(FilterKind f, int particles, double lambda, double kappa);

/// Runs one filter over an observation sequence; returns d_x x N estimates.
Eigen::MatrixXd run_filter(FilterKind f, const StateSpaceModel& model, const Eigen::MatrixXd& observations,
                           int particles, double lambda, double kappa, Rng& rng);

/// One Monte Carlo realization. The trajectory and the filter use streams keyed
/// by (seed, realization), so the result does not depend on scheduling.
RunRecord run_realization(const ScenarioConfig& cfg, int realization);

MetricsSummary summarize(const std::vector<RunRecord>& records);

McResult run_mc(const ScenarioConfig& cfg);

/// Cross product of filters and particle counts; rows sorted by (filter name, M).
std::vector<SweepRow> sweep(const ScenarioConfig& base, const std::vector<int>& particle_grid,
                            const std::vector<FilterKind>& filters);

inline constexpr const char* kRunsHeader = "scenario,filter,particles,realization,metric,runtime_s,diverged";
inline constexpr const char* kSummaryHeader =
    "scenario,filter,particles,metric_mean,metric_std,diverged_count,runtime_mean_s";

void write_runs_csv(std::ostream& out, const ScenarioConfig& cfg, const std::vector<RunRecord>& records,
                    bool header = true);
void write_summary_csv(std::ostream& out, const std::vector<SweepRow>& rows, bool header = true);

/// Parses a per-run CSV back into (metric, runtime, diverged) records.
std::vector<RunRecord> read_runs_csv(std::istream& in);

}  // namespace kkf::bench

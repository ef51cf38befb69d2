#include "kkf/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include "kkf/baselines.hpp"

namespace kkf::bench {

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Ungm: return "ungm";
    case Scenario::BotCv: return "bot-cv";
    case Scenario::BotCt: return "bot-ct";
  }
  return "unknown";
}

std::string to_string(FilterKind f) {
  switch (f) {
    case FilterKind::AkkfQuadratic: return "akkf-quadratic";
    case FilterKind::AkkfQuartic: return "akkf-quartic";
    case FilterKind::AkkfGaussian: return "akkf-gaussian";
    case FilterKind::Pf: return "pf";
    case FilterKind::Gpf: return "gpf";
    case FilterKind::Ukf: return "ukf";
  }
  return "unknown";
}

Scenario parse_scenario(const std::string& s) {
  for (Scenario v : {Scenario::Ungm, Scenario::BotCv, Scenario::BotCt})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown scenario: " + s);
}

FilterKind parse_filter(const std::string& s) {
  for (FilterKind v : {FilterKind::AkkfQuadratic, FilterKind::AkkfQuartic, FilterKind::AkkfGaussian,
                       FilterKind::Pf, FilterKind::Gpf, FilterKind::Ukf})
    if (to_string(v) == s) return v;
  throw ConfigError("unknown filter: " + s);
}

namespace {

bool is_akkf(FilterKind f) {
  return f == FilterKind::AkkfQuadratic || f == FilterKind::AkkfQuartic || f == FilterKind::AkkfGaussian;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (realizations < 1) throw ConfigError("realizations must be >= 1");
  if (particles < 1) throw ConfigError("particles must be >= 1");
  if (is_akkf(filter) && particles < 2) throw ConfigError("akkf filters need at least 2 particles");
  if (!(lambda > 0.0) || !(kappa > 0.0)) throw ConfigError("lambda and kappa must be > 0");
  if (horizon && *horizon < 1) throw ConfigError("horizon must be >= 1");
  if (workers < 0) throw ConfigError("workers must be >= 0");
}

int ScenarioConfig::effective_horizon() const {
  if (horizon) return *horizon;
  return scenario == Scenario::Ungm ? 100 : 30;
}

double mse(const Eigen::VectorXd& truth, const Eigen::VectorXd& est) {
  if (truth.size() != est.size() || truth.size() == 0) throw DimensionMismatch("mse: length mismatch");
  return (truth - est).squaredNorm() / static_cast<double>(truth.size());
}

double lmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& est) {
  if (truth.rows() != 2 || est.rows() != 2 || truth.cols() != est.cols() || truth.cols() == 0)
    throw DimensionMismatch("lmse: expected equal-length 2 x N position sequences");
  const double mean_err = (truth - est).colwise().norm().mean();
  if (mean_err == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(mean_err);
}

double scenario_metric(Scenario s, const Eigen::MatrixXd& truth, const Eigen::MatrixXd& est) {
  if (s == Scenario::Ungm) return mse(truth.row(0).transpose(), est.row(0).transpose());
  Eigen::MatrixXd tp(2, truth.cols());
  Eigen::MatrixXd ep(2, est.cols());
  tp << truth.row(0), truth.row(2);
  ep << est.row(0), est.row(2);
  return lmse(tp, ep);
}

ModelPtr make_model(Scenario s, int horizon) {
  switch (s) {
    case Scenario::Ungm: return make_ungm();
    case Scenario::BotCv: return make_bot_cv();
    case Scenario::BotCt: return make_bot_ct(horizon);
  }
  throw ConfigError("unknown scenario");
}

AkkfConfig akkf_config(FilterKind f, int particles, double lambda, double kappa) {
  AkkfConfig cfg;
  switch (f) {
    case FilterKind::AkkfQuadratic: cfg.state_kernel = KernelSpec::quadratic(); break;
    case FilterKind::AkkfQuartic: cfg.state_kernel = KernelSpec::quartic(); break;
    case FilterKind::AkkfGaussian: cfg.state_kernel = KernelSpec::gaussian_median(); break;
    default: throw ConfigError("not an akkf filter: " + to_string(f));
  }
  cfg.obs_kernel = KernelSpec::gaussian_median();
  cfg.particles = particles;
  cfg.lambda_tilde = lambda;
  cfg.kappa = kappa;
  return cfg;
}

Eigen::MatrixXd run_filter(FilterKind f, const StateSpaceModel& model, const Eigen::MatrixXd& observations,
                           int particles, double lambda, double kappa, Rng& rng) {
  const Eigen::Index horizon = observations.cols();
  Eigen::MatrixXd est(model.state_dim(), horizon);
  switch (f) {
    case FilterKind::AkkfQuadratic:
    case FilterKind::AkkfQuartic:
    case FilterKind::AkkfGaussian: {
      const AkkfConfig cfg = akkf_config(f, particles, lambda, kappa);
      AkkfState state = akkf::init(model, cfg, rng);
      for (Eigen::Index n = 0; n < horizon; ++n)
        est.col(n) = akkf::step(state, observations.col(n), model, cfg, rng).mean;
      break;
    }
    case FilterKind::Pf: {
      PfState state = pf_init(model, particles, rng);
      for (Eigen::Index n = 0; n < horizon; ++n) est.col(n) = pf_step(state, observations.col(n), model, rng).mean;
      break;
    }
    case FilterKind::Gpf: {
      GaussianBelief belief{model.prior_mean(), model.prior_cov()};
      for (Eigen::Index n = 0; n < horizon; ++n) {
        belief = gpf_step(belief, observations.col(n), static_cast<int>(n + 1), model, particles, rng);
        est.col(n) = belief.mean;
      }
      break;
    }
    case FilterKind::Ukf: {
      UkfState state = ukf_init(model);
      for (Eigen::Index n = 0; n < horizon; ++n) {
        ukf_step(state, observations.col(n), model);
        est.col(n) = state.belief.mean;
      }
      break;
    }
  }
  return est;
}

RunRecord run_realization(const ScenarioConfig& cfg, int realization) {
  const int horizon = cfg.effective_horizon();
  const ModelPtr model = make_model(cfg.scenario, horizon);
  const auto r = static_cast<std::uint64_t>(realization);
  Rng traj_rng = derive_stream(cfg.seed, r, 0);
  Rng filter_rng = derive_stream(cfg.seed, r, 1);

  RunRecord rec;
  rec.realization = realization;
  const Trajectory truth = simulate(*model, horizon, traj_rng);

  const auto start = std::chrono::steady_clock::now();
  try {
    rec.estimates = run_filter(cfg.filter, *model, truth.observations, cfg.particles, cfg.lambda, cfg.kappa,
                               filter_rng);
  } catch (const Error& e) {
    rec.diverged = true;
    rec.failure = e.what();
  }
  rec.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!rec.diverged && !rec.estimates.allFinite()) {
    rec.diverged = true;
    rec.failure = "non-finite estimate";
  }
  if (rec.diverged) {
    rec.metric = std::numeric_limits<double>::quiet_NaN();
    return rec;
  }
  rec.metric = scenario_metric(cfg.scenario, truth.states, rec.estimates);
  if (!std::isfinite(rec.metric)) {
    rec.diverged = true;
    rec.failure = "non-finite metric";
  } else if (cfg.scenario != Scenario::Ungm && rec.metric > 0.0) {
    // Mean position error above one scene unit: the track is lost.
    rec.diverged = true;
    rec.failure = "track lost (lmse > 0)";
  }
  return rec;
}

MetricsSummary summarize(const std::vector<RunRecord>& records) {
  MetricsSummary s;
  double sum = 0.0;
  double runtime = 0.0;
  for (const auto& r : records) {
    if (r.diverged) {
      ++s.diverged_count;
      continue;
    }
    sum += r.metric;
    runtime += r.runtime_s;
    ++s.runs;
  }
  if (s.runs == 0) {
    s.metric_mean = std::numeric_limits<double>::quiet_NaN();
    s.metric_std = std::numeric_limits<double>::quiet_NaN();
    s.runtime_mean_s = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.metric_mean = sum / s.runs;
  s.runtime_mean_s = runtime / s.runs;
  double ss = 0.0;
  for (const auto& r : records)
    if (!r.diverged) ss += (r.metric - s.metric_mean) * (r.metric - s.metric_mean);
  s.metric_std = s.runs > 1 ? std::sqrt(ss / (s.runs - 1)) : 0.0;
  return s;
}

McResult run_mc(const ScenarioConfig& cfg) {
  cfg.validate();
  McResult out;
  out.records.resize(static_cast<std::size_t>(cfg.realizations));
  unsigned workers = cfg.workers > 0 ? static_cast<unsigned>(cfg.workers) : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min(workers, static_cast<unsigned>(cfg.realizations)));

  std::atomic<int> next{0};
  auto work = [&] {
    for (int r = next++; r < cfg.realizations; r = next++)
      out.records[static_cast<std::size_t>(r)] = run_realization(cfg, r);
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
  }
  out.summary = summarize(out.records);
  return out;
}

std::vector<SweepRow> sweep(const ScenarioConfig& base, const std::vector<int>& particle_grid,
                            const std::vector<FilterKind>& filters) {
  if (particle_grid.empty() || filters.empty()) throw ConfigError("sweep needs non-empty grids");
  std::vector<std::pair<FilterKind, int>> cells;
  for (FilterKind f : filters)
    for (int m : particle_grid) cells.emplace_back(f, m);
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
    return std::make_tuple(to_string(a.first), a.second) < std::make_tuple(to_string(b.first), b.second);
  });
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

  std::vector<SweepRow> rows;
  for (const auto& [f, m] : cells) {
    ScenarioConfig cfg = base;
    cfg.filter = f;
    cfg.particles = m;
    rows.push_back({cfg.scenario, f, m, run_mc(cfg).summary});
  }
  return rows;
}

namespace {

void put_real(std::ostream& out, double v) {
  if (std::isnan(v)) {
    out << "nan";
  } else if (std::isinf(v)) {
    out << (v > 0 ? "inf" : "-inf");
  } else {
    out << v;
  }
}

double parse_real(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

}  // namespace

void write_runs_csv(std::ostream& out, const ScenarioConfig& cfg, const std::vector<RunRecord>& records,
                    bool header) {
  const auto old = out.precision(17);
  if (header) out << kRunsHeader << '\n';
  for (const auto& r : records) {
    out << to_string(cfg.scenario) << ',' << to_string(cfg.filter) << ',' << cfg.particles << ','
        << r.realization << ',';
    put_real(out, r.metric);
    out << ',';
    put_real(out, r.runtime_s);
    out << ',' << (r.diverged ? 1 : 0) << '\n';
  }
  out.precision(old);
}

void write_summary_csv(std::ostream& out, const std::vector<SweepRow>& rows, bool header) {
  const auto old = out.precision(17);
  if (header) out << kSummaryHeader << '\n';
  for (const auto& row : rows) {
    out << to_string(row.scenario) << ',' << to_string(row.filter) << ',' << row.particles << ',';
    put_real(out, row.summary.metric_mean);
    out << ',';
    put_real(out, row.summary.metric_std);
    out << ',' << row.summary.diverged_count << ',';
    put_real(out, row.summary.runtime_mean_s);
    out << '\n';
  }
  out.precision(old);
}

std::vector<RunRecord> read_runs_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRunsHeader) throw ConfigError("runs csv: unexpected header");
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 7) throw ConfigError("runs csv: expected 7 columns");
    RunRecord r;
    r.realization = std::stoi(cells[3]);
    r.metric = parse_real(cells[4]);
    r.runtime_s = parse_real(cells[5]);
    r.diverged = cells[6] == "1";
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace kkf::bench

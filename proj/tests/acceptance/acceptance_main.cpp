// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed constants below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lettuce/errors.hpp"
#include "lettuce/pipeline.hpp"
#include "oracles/finite_difference.hpp"
#include "oracles/physics_field.hpp"
#include "oracles/reference_integrator.hpp"

namespace fs = std::filesystem;
using namespace lettuce;

namespace {

// Criterion 1
constexpr double kPhysicsRelTol = 1e-6;
constexpr double kReferenceTol = 1e-10;
constexpr double kOrderLo = 3.5, kOrderHi = 4.5;
constexpr double kPhysicsSeconds = 5.0;
// Criterion 2
constexpr int kRandomCases = 1000;
constexpr double kTrivialTol = 1e-12;
// Criterion 3
constexpr double kMomentTol = 1e-10;
constexpr double kReconstructionTol = 1e-10;
// Criterion 4
constexpr double kGradientRelTol = 1e-5;
// Criterion 5
constexpr double kLossRatioMax = 0.2;
constexpr double kNormalizedRmseMax = 0.5;
constexpr double kCoverage99Min = 0.9;
constexpr double kPipelineSeconds = 600.0;
// Criterion 6
constexpr double kZeroSpreadTol = 1e-12;
constexpr double kGaussianCoverageLo = 0.95, kGaussianCoverageHi = 1.0;
// Criterion 7
constexpr double kOracleStepTol = 1e-10;
// Criterion 9
constexpr std::size_t kFullParameterCount = 68;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string vec4(const Vec4& v, const char* f = "%.3g") {
  return "[" + fmt(f, v[0]) + ", " + fmt(f, v[1]) + ", " + fmt(f, v[2]) + ", " + fmt(f, v[3]) + "]";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double max_rel(const Vec4& a, const Vec4& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < 4; ++i) e = std::max(e, std::abs(a[i] - b[i]) / std::abs(b[i]));
  return e;
}

// RK4 with `sub` equal substeps per held input sample.
std::vector<GreenhouseState> rk4_substeps(const Scenario& s, const ModelParameters& p, int sub) {
  std::vector<GreenhouseState> out{s.states[0]};
  for (std::size_t k = 0; k < s.steps(); ++k) {
    GreenhouseState x = out.back();
    for (int i = 0; i < sub; ++i)
      x = rk4_step(x, s.controls[k], s.disturbances[k], p, s.period_s / sub);
    out.push_back(x);
  }
  return out;
}

Outcome physics_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const ModelParameters p = ModelParameters::nominal();
  const Scenario s = generate_scenarios(1, 1, 1800, 20240501, p, nominal_initial_state()).front();
  const auto ref = oracle::reference_trajectory(s.states[0], s.controls, s.disturbances, p,
                                                s.period_s, kReferenceTol);
  auto worst = [&](const std::vector<GreenhouseState>& traj) {
    double e = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k)
      e = std::max(e, max_rel(traj[k].to_array(), ref[k].to_array()));
    return e;
  };
  const auto h1 = rk4_substeps(s, p, 1), h2 = rk4_substeps(s, p, 2), h4 = rk4_substeps(s, p, 4);
  const double e1 = worst(h1), e2 = worst(h2), e4 = worst(h4);
  const double order = std::log2(max_rel(h1.back().to_array(), ref.back().to_array()) /
                                 max_rel(h2.back().to_array(), ref.back().to_array()));
  const double elapsed = seconds_since(t0);

  Outcome o;
  o.pass = e1 < kPhysicsRelTol && order >= kOrderLo && order <= kOrderHi && elapsed < kPhysicsSeconds;
  o.detail = "max rel err h=1800: " + fmt("%.2e", e1) + " (< " + fmt("%.0e", kPhysicsRelTol) +
             "), order " + fmt("%.2f", order) + " in [" + fmt("%.1f", kOrderLo) + ", " +
             fmt("%.1f", kOrderHi) + "], " + fmt("%.2f", elapsed) + " s; for reference h=900: " +
             fmt("%.2e", e2) + ", h=450: " + fmt("%.2e", e4);
  return o;
}

Outcome trivial_zero_suite() {
  const ModelParameters p = ModelParameters::nominal();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> x1(0.0, 0.3), x2(1e-4, 0.4), x3(5.0, 40.0),
      x4(1e-3, 0.03), rad(0.0, 400.0), co2(3e-4, 1e-3), temp(-5.0, 25.0), hum(1e-3, 1e-2),
      u1(0.0, 40.0), u3(0.0, 150.0);
  std::bernoulli_distribution vent(0.5);

  double worst = 0.0;
  int failures = 0;
  auto expect_zero = [&](double v) {
    worst = std::max(worst, std::abs(v));
    if (!(std::abs(v) <= kTrivialTol)) ++failures;
  };
  for (int i = 0; i < kRandomCases; ++i) {
    const Disturbance d{rad(rng), co2(rng), temp(rng), hum(rng)};
    const ControlInput u{u1(rng), vent(rng) ? 0.1 : 0.0, u3(rng)};
    const GreenhouseState x{x1(rng), x2(rng), x3(rng), x4(rng)};

    expect_zero(canopy_fluxes({0.0, x.indoor_co2, x.indoor_temp, x.indoor_humidity}, u, d, p).phot);
    expect_zero(canopy_fluxes({x.dry_weight, d.outdoor_co2, x.indoor_temp, x.indoor_humidity}, u, d, p).vent_co2);
    expect_zero(canopy_fluxes({x.dry_weight, x.indoor_co2, x.indoor_temp, d.outdoor_humidity}, u, d, p).vent_h2o);
    if (d.radiation > 0.0)
      expect_zero(canopy_fluxes({x.dry_weight, p(8), x.indoor_temp, x.indoor_humidity}, u, d, p).phot);

    const Disturbance dark{0.0, d.outdoor_co2, d.outdoor_temp, d.outdoor_humidity};
    const GreenhouseState eq{0.0, dark.outdoor_co2, dark.outdoor_temp, dark.outdoor_humidity};
    for (double v : derivatives(eq, {0, 0, 0}, dark, p)) expect_zero(v);
    const double heat = u3(rng);
    expect_zero(derivatives(eq, {0, 0, heat}, dark, p)[2] - heat / p(16));

    const GreenhouseState same = rk4_step(x, u, d, p, 0.0);
    for (std::size_t c = 0; c < 4; ++c) expect_zero(same.to_array()[c] - x.to_array()[c]);
    const auto one = simulate(x, std::span(&u, 1), std::span(&d, 1), p, 600.0);
    const GreenhouseState step = rk4_step(x, u, d, p, 600.0);
    for (std::size_t c = 0; c < 4; ++c) expect_zero(one[1].to_array()[c] - step.to_array()[c]);
  }
  return {failures == 0, std::to_string(kRandomCases) + " random cases, " +
                             std::to_string(failures) + " violations, worst |residual| " +
                             fmt("%.1e", worst) + " (<= " + fmt("%.0e", kTrivialTol) + ")"};
}

Outcome data_pipeline(const std::vector<Scenario>& scenarios, double h) {
  const NormStats st = compute_stats(scenarios, h);
  const Dataset ds = build_matrices(scenarios, st, h);
  std::size_t rows = 0;
  for (const auto& s : scenarios) rows += s.steps();
  const bool shapes = ds.rows() == rows && ds.features().size() == rows * kFeatureWidth &&
                      ds.targets().size() == rows * kTargetWidth;

  double worst_mean = 0.0, worst_std = 0.0;
  auto moments = [&](const std::vector<double>& m, std::size_t width) {
    for (std::size_t c = 0; c < width; ++c) {
      double mean = 0.0, ss = 0.0;
      for (std::size_t r = 0; r < ds.rows(); ++r) mean += m[r * width + c];
      mean /= static_cast<double>(ds.rows());
      for (std::size_t r = 0; r < ds.rows(); ++r) ss += std::pow(m[r * width + c] - mean, 2);
      const double sd = std::sqrt(ss / static_cast<double>(ds.rows() - 1));
      worst_mean = std::max(worst_mean, std::abs(mean));
      worst_std = std::max(worst_std, std::abs(sd - 1.0));
    }
  };
  moments(ds.features(), kFeatureWidth);
  moments(ds.targets(), kTargetWidth);

  double worst_recon = 0.0;
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    const auto [j, k] = ds.row_index()[r];
    Vec4 t;
    for (std::size_t c = 0; c < 4; ++c) t[c] = ds.target_row(r)[c];
    const Vec4 dx = denormalize(t, st.mean_dx, st.std_dx);
    const Vec4 a = scenarios[j].states[k].to_array(), b = scenarios[j].states[k + 1].to_array();
    for (std::size_t c = 0; c < 4; ++c) worst_recon = std::max(worst_recon, std::abs(dx[c] * h - (b[c] - a[c])));
  }
  Outcome o;
  o.pass = shapes && worst_mean <= kMomentTol && worst_std <= kMomentTol && worst_recon <= kReconstructionTol;
  o.detail = std::to_string(ds.rows()) + " x " + std::to_string(kFeatureWidth) + " / " +
             std::to_string(kTargetWidth) + (shapes ? " shapes exact" : " SHAPE MISMATCH") +
             ", max |mean| " + fmt("%.1e", worst_mean) + ", max |std-1| " + fmt("%.1e", worst_std) +
             ", max reconstruction gap " + fmt("%.1e", worst_recon) + " (tol " +
             fmt("%.0e", kMomentTol) + ")";
  return o;
}

Outcome gradient_correctness() {
  std::string detail;
  bool pass = true;
  NetLayout toy;
  toy.input_dim = 2;
  toy.hidden = {{2, Activation::Tanh}};
  toy.output_dim = 1;
  const std::pair<const char*, NetLayout> layouts[] = {{"2-2-1", toy}, {"11-4-4", NetLayout{}}};
  for (const auto& [name, layout] : layouts) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> n(0.0, 1.0);
    BayesianMLP net = oracle::random_network(layout, 5);
    const std::size_t rows = 3;
    std::vector<double> x(rows * layout.input_dim), y(rows * layout.output_dim);
    for (double& v : x) v = n(rng);
    for (double& v : y) v = n(rng);
    const RegressionData data{x, layout.input_dim, y, layout.output_dim};
    const std::vector<std::size_t> batch{0, 1, 2};
    std::vector<std::vector<double>> eps(3, std::vector<double>(net.mu.size()));
    for (auto& e : eps)
      for (double& v : e) v = n(rng);
    const auto c = oracle::check_gradient(net, data, batch, eps, {1e-4, 5.0, 1.0});
    pass = pass && c.max_rel_error < kGradientRelTol && c.masked_entries_zero;
    detail += std::string(detail.empty() ? "" : ", ") + name + " max rel err " + fmt("%.1e", c.max_rel_error);
  }
  return {pass, detail + " (< " + fmt("%.0e", kGradientRelTol) + ", grad_mu and grad_rho)"};
}

struct DeskRun {
  RunConfig config;
  nlohmann::ordered_json report;
  Checkpoint checkpoint;
  ForecastOutcome forecast;
  double seconds = 0.0;
};

DeskRun desk_run(const fs::path& dir) {
  DeskRun r;
  r.config.output_dir = dir;
  const auto t0 = std::chrono::steady_clock::now();
  r.report = cmd_evaluate(r.config);
  r.seconds = seconds_since(t0);
  r.checkpoint = load_checkpoint(dir / "checkpoint.json");
  r.forecast = run_forecast(r.config, r.checkpoint);
  return r;
}

struct ProtocolCheck {
  bool loss = false, rmse = false, coverage = false;
  double ratio = 0.0, max_rmse = 0.0, min_cov = 0.0;
  Vec4 nrmse{}, cov99{};
};

ProtocolCheck protocol_check(const DeskRun& r) {
  ProtocolCheck c;
  c.ratio = r.report["training"]["data_loss_ratio"].get<double>();
  c.nrmse = normalized_rmse(r.forecast.score, r.checkpoint.stats);
  const auto& levels = r.forecast.score.levels;
  const auto it = std::find(levels.begin(), levels.end(), 0.99);
  if (it != levels.end()) c.cov99 = r.forecast.score.coverage[static_cast<std::size_t>(it - levels.begin())];
  c.max_rmse = *std::max_element(c.nrmse.begin(), c.nrmse.end());
  c.min_cov = *std::min_element(c.cov99.begin(), c.cov99.end());
  c.loss = c.ratio <= kLossRatioMax;
  c.rmse = c.max_rmse <= kNormalizedRmseMax;
  c.coverage = it != levels.end() && c.min_cov >= kCoverage99Min;
  return c;
}

Outcome end_to_end(const DeskRun& r) {
  const ProtocolCheck c = protocol_check(r);
  Outcome o;
  o.pass = c.loss && c.rmse && c.coverage && r.seconds <= kPipelineSeconds;
  o.detail = "(a) loss ratio " + fmt("%.3f", c.ratio) + " <= " + fmt("%.1f", kLossRatioMax) +
             (c.loss ? "" : " FAIL") + "; (b) normalized RMSE " + vec4(c.nrmse) + " <= " +
             fmt("%.1f", kNormalizedRmseMax) + (c.rmse ? "" : " FAIL") + "; (c) 99% coverage " +
             vec4(c.cov99) + " >= " + fmt("%.2f", kCoverage99Min) + (c.coverage ? "" : " FAIL") +
             "; " + fmt("%.1f", r.seconds) + " s";
  return o;
}

Outcome uncertainty_mechanics(const DeskRun& r) {
  // Zero-spread posterior: every member is the deterministic rollout at mu.
  Checkpoint zero = r.checkpoint;
  for (double& rho : zero.net.rho) rho = -60.0;
  const ForecastOutcome f = run_forecast(r.config, zero);
  const Scenario holdout = holdout_scenario(r.config);
  const std::size_t start = f.ensemble.start_step, H = f.ensemble.horizon();
  const ParamSample mean{zero.net.mean_values(), std::vector<double>(zero.net.mu.size(), 0.0)};
  const auto det = euler_rollout(mean, zero.net.layout, zero.stats, holdout.states[start],
                                 std::span(holdout.controls).subspan(start, H),
                                 std::span(holdout.disturbances).subspan(start, H), r.config.period_s);
  double worst_zero = 0.0;
  for (std::size_t k = 0; k <= H; ++k)
    for (std::size_t c = 0; c < 4; ++c) {
      const double scale = std::max(1.0, std::abs(det[k].to_array()[c]));
      for (std::size_t l = 0; l < f.summary.levels.size(); ++l) {
        worst_zero = std::max(worst_zero, std::abs(f.summary.lower[l][k][c] - det[k].to_array()[c]) / scale);
        worst_zero = std::max(worst_zero, std::abs(f.summary.upper[l][k][c] - det[k].to_array()[c]) / scale);
      }
    }

  // Nesting on the trained forecast.
  const ForecastSummary& s = r.forecast.summary;
  std::size_t i95 = 0, i99 = 0;
  for (std::size_t l = 0; l < s.levels.size(); ++l) {
    if (s.levels[l] == 0.95) i95 = l;
    if (s.levels[l] == 0.99) i99 = l;
  }
  std::size_t nest_violations = 0;
  for (std::size_t k = 0; k < s.mean.size(); ++k)
    for (std::size_t c = 0; c < 4; ++c)
      if (s.lower[i99][k][c] > s.lower[i95][k][c] || s.upper[i99][k][c] < s.upper[i95][k][c])
        ++nest_violations;

  // Synthetic Gaussian ensemble around a known truth.
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  constexpr std::size_t kSteps = 150, kMembers = 200;
  ForecastEnsemble e;
  std::vector<GreenhouseState> truth;
  for (std::size_t k = 0; k < kSteps; ++k) {
    const double v = std::sin(0.1 * static_cast<double>(k));
    truth.push_back({v, v, v, v});
  }
  for (std::size_t m = 0; m < kMembers; ++m) {
    std::vector<GreenhouseState> t;
    for (const auto& x : truth) {
      Vec4 a = x.to_array();
      for (double& c : a) c += n(rng);
      t.push_back(GreenhouseState::from_array(a));
    }
    e.trajectories.push_back(t);
  }
  const std::vector<double> levels{0.99};
  const ForecastScore g = score(summarize(e, levels), truth);
  const double gmin = *std::min_element(g.coverage[0].begin(), g.coverage[0].end());
  const double gmax = *std::max_element(g.coverage[0].begin(), g.coverage[0].end());

  Outcome o;
  o.pass = worst_zero <= kZeroSpreadTol && nest_violations == 0 && gmin >= kGaussianCoverageLo &&
           gmax <= kGaussianCoverageHi;
  o.detail = "zero-spread band deviation " + fmt("%.1e", worst_zero) + " (<= " +
             fmt("%.0e", kZeroSpreadTol) + "), nesting violations " +
             std::to_string(nest_violations) + ", synthetic 99% coverage " + vec4(g.coverage[0]) +
             " in [" + fmt("%.2f", kGaussianCoverageLo) + ", " + fmt("%.2f", kGaussianCoverageHi) + "]";
  return o;
}

Outcome oracle_substitution(const RunConfig& config) {
  const ModelParameters p = config.params;
  const auto train = training_scenarios(config);
  const NormStats st = compute_stats(train, config.period_s);
  const auto scenarios = generate_scenarios(3, config.days_train, config.period_s, 777, p, config.x0);
  double worst = 0.0;
  for (const auto& s : scenarios) {
    const auto mine = euler_rollout(oracle::physics_field(p, st), st, s.states[0], s.controls,
                                    s.disturbances, s.period_s);
    for (std::size_t k = 0; k < s.steps(); ++k) {
      // One step from the same state on both sides.
      const auto a = euler_rollout(oracle::physics_field(p, st), st, mine[k],
                                   std::span(s.controls).subspan(k, 1),
                                   std::span(s.disturbances).subspan(k, 1), s.period_s)[1];
      const auto b = oracle::forward_euler(mine[k], std::span(s.controls).subspan(k, 1),
                                           std::span(s.disturbances).subspan(k, 1), p, s.period_s)[1];
      worst = std::max(worst, max_rel(a.to_array(), b.to_array()));
    }
    const auto full = oracle::forward_euler(s.states[0], s.controls, s.disturbances, p, s.period_s);
    worst = std::max(worst, max_rel(mine.back().to_array(), full.back().to_array()));
  }
  return {worst <= kOracleStepTol, "3 scenarios x " + std::to_string(scenarios[0].steps()) +
                                       " steps, max rel deviation " + fmt("%.1e", worst) + " (<= " +
                                       fmt("%.0e", kOracleStepTol) + ")"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), dir).string(), slurp(e.path()));
  std::sort(files.begin(), files.end());
  return files;
}

Outcome reproducibility(const fs::path& dir) {
  const std::string cli = LETTUCE_CLI_PATH;
  const std::string out = " --out " + dir.string() + " --serial";
  const char* commands[] = {"simulate", "train", "forecast", "evaluate"};
  std::size_t compared = 0;
  std::string mismatches;
  for (const char* cmd : commands) {
    fs::remove_all(dir);
    const std::string line = cli + " " + cmd + out + " >/dev/null 2>&1";
    // forecast needs a checkpoint from a prior train run.
    if (std::string(cmd) == "forecast" &&
        std::system((cli + " train" + out + " >/dev/null 2>&1").c_str()) != 0)
      return {false, "train (setup for forecast) exited nonzero"};
    if (std::system(line.c_str()) != 0) return {false, std::string(cmd) + " exited nonzero"};
    const auto first = snapshot(dir);
    if (std::system(line.c_str()) != 0) return {false, std::string(cmd) + " rerun exited nonzero"};
    const auto second = snapshot(dir);
    if (first != second) mismatches += std::string(" ") + cmd;
    compared += first.size();
  }
  fs::remove_all(dir);
  return {mismatches.empty(), "simulate/train/forecast/evaluate rerun with --serial, " +
                                  std::to_string(compared) + " artifacts compared" +
                                  (mismatches.empty() ? ", all byte-identical" : ", differ:" + mismatches)};
}

Outcome sparsity(const DeskRun& r) {
  const ProtocolCheck c = protocol_check(r);
  const std::size_t active = r.checkpoint.net.active_count();
  Outcome o;
  o.pass = active < kFullParameterCount && c.rmse && c.coverage &&
           r.config.train.sparsity_lambda == 1e-4 && r.config.train.prune_every > 0;
  o.detail = "lambda " + fmt("%g", r.config.train.sparsity_lambda) + ", prune every " +
             std::to_string(r.config.train.prune_every) + " epochs: active " +
             std::to_string(active) + " < " + std::to_string(kFullParameterCount) +
             ", 5(b) " + (c.rmse ? "holds" : "FAILS") + ", 5(c) " + (c.coverage ? "holds" : "FAILS");
  return o;
}

}  // namespace

int main() {
  int failed = 0;
  auto line = [&](int id, const char* name, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("[%s] %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  };

  const fs::path work = fs::temp_directory_path() / "lettuce_acceptance";
  fs::remove_all(work);

  line(1, "physics fidelity", physics_fidelity);
  line(2, "trivial-zero suite", trivial_zero_suite);
  line(3, "data pipeline", [] {
    const RunConfig c;
    return data_pipeline(training_scenarios(c), c.period_s);
  });
  line(4, "gradient correctness", gradient_correctness);

  std::optional<DeskRun> desk;
  std::string desk_error;
  try {
    desk = desk_run(work / "desk");
  } catch (const std::exception& e) {
    desk_error = e.what();
  }
  auto with_desk = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!desk) return {false, "desk-scale run failed: " + desk_error};
      return fn(*desk);
    };
  };
  line(5, "end-to-end protocol", with_desk(end_to_end));
  line(6, "uncertainty mechanics", with_desk(uncertainty_mechanics));
  line(7, "oracle substitution", [] { return oracle_substitution(RunConfig{}); });
  line(8, "reproducibility", [&] { return reproducibility(work / "repro"); });
  line(9, "sparsity mechanics", with_desk(sparsity));

  fs::remove_all(work);
  std::printf("%d of 9 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}

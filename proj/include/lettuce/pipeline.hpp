#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lettuce/bnn.hpp"
#include "lettuce/datagen.hpp"
#include "lettuce/forecast.hpp"
#include "lettuce/trainer.hpp"

namespace lettuce {

struct ForecastSettings {
  std::size_t n_samples = 100;
  std::vector<double> levels{0.95, 0.99};
  RolloutSpace space = RolloutSpace::Physical;
  BandMethod bands = BandMethod::Empirical;
};

/// Everything a run needs: generate -> train -> forecast -> evaluate.
struct RunConfig {
  ModelParameters params = ModelParameters::nominal();
  GreenhouseState x0 = nominal_initial_state();
  WeatherProfile weather;
  std::optional<std::filesystem::path> weather_csv;
  std::size_t n_scenarios = 8;
  std::size_t days_train = 11;
  std::size_t days_forecast = 3;
  double period_s = 1800.0;
  NetLayout layout;
  TrainConfig train;
  bool train_seed_explicit = false;
  ForecastSettings forecast;
  std::uint64_t seed = 20240501;
  std::filesystem::path output_dir = "lettuce_out";

  void validate() const;

  std::size_t steps_per_day() const;
  std::uint64_t train_seed() const;
  std::uint64_t forecast_seed() const;
};

/// Missing fields take defaults; unknown fields are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json run_config_to_json(const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

/// Hash of the canonical JSON form, excluding the output directory.
std::string config_hash(const RunConfig& c);

/// The N_s training scenarios, days_train long.
std::vector<Scenario> training_scenarios(const RunConfig& c);
/// The held-out scenario (index N_s), days_train + days_forecast long.
Scenario holdout_scenario(const RunConfig& c);

struct TrainOutcome {
  Checkpoint checkpoint;
  TrainHistory history;
};

struct ForecastOutcome {
  ForecastEnsemble ensemble;
  ForecastSummary summary;
  ForecastScore score;
  std::vector<GreenhouseState> truth;
};

/// Writes <out>/scenarios/scenario_NNN.csv and manifest.json.
std::vector<Scenario> cmd_simulate(const RunConfig& c);

/// Writes <out>/checkpoint.json, <out>/history.csv and <out>/dataset/.
TrainOutcome cmd_train(const RunConfig& c);

/// Forecasts the held-out continuation; writes <out>/forecast.csv and
/// <out>/metrics.json.
ForecastOutcome cmd_forecast(const RunConfig& c, const std::filesystem::path& checkpoint);

/// Runs the three commands above and writes <out>/report.json.
nlohmann::ordered_json cmd_evaluate(const RunConfig& c);

/// Forecast core without file output, for tests and the acceptance suite.
ForecastOutcome run_forecast(const RunConfig& c, const Checkpoint& checkpoint);

}  // namespace lettuce

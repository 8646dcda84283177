#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lettuce/physics.hpp"
#include "lettuce/weather.hpp"

namespace lettuce {

/// One simulated sequence of {x(k), u(k), d(k)}.
struct Scenario {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double period_s = 0.0;
  std::vector<GreenhouseState> states;     // N + 1
  std::vector<ControlInput> controls;      // N
  std::vector<Disturbance> disturbances;   // N

  std::size_t steps() const { return controls.size(); }
};

/// Radiation-driven rule-based controller: CO2 dosing and heating grow with
/// radiation, ventilation only when it is (almost) dark.
ControlInput control_policy(const Disturbance& d);

/// Rolls the true model under control_policy for a given weather stream.
Scenario simulate_scenario(std::size_t index, std::uint64_t seed, const WeatherSeries& weather,
                           const ModelParameters& p, const GreenhouseState& x0);

/// Scenario j is driven by synthetic weather seeded with derive_seed(root_seed, j).
/// Scenarios are independent and may be generated concurrently.
std::vector<Scenario> generate_scenarios(std::size_t n_scenarios, std::size_t days,
                                         double period_s, std::uint64_t root_seed,
                                         const ModelParameters& p, const GreenhouseState& x0,
                                         const WeatherProfile& profile = {});

/// Same, but scenario j uses window j (each `window_days` long) of a measured
/// series, truncated to `days`.
std::vector<Scenario> scenarios_from_weather(const WeatherSeries& weather,
                                             std::size_t n_scenarios, std::size_t days,
                                             std::size_t window_days, std::size_t first_index,
                                             const ModelParameters& p,
                                             const GreenhouseState& x0);

/// Seed used for scenario j.
std::uint64_t scenario_seed(std::uint64_t root_seed, std::size_t j);

/// Short stable hash of a parameter vector (for manifests and reports).
std::string parameter_hash(const ModelParameters& p);

struct ArchiveInfo {
  std::uint64_t root_seed = 0;
  std::size_t days = 0;
  std::string weather_source;
};

/// Writes scenario_NNN.csv per scenario and manifest.json into `dir`.
void write_scenario_archive(const std::filesystem::path& dir,
                            const std::vector<Scenario>& scenarios, const ModelParameters& p,
                            const ArchiveInfo& info);

}  // namespace lettuce

#include "lettuce/datagen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "lettuce/errors.hpp"

namespace lettuce {

ControlInput control_policy(const Disturbance& d) {
  return {d.radiation / 10.0, d.radiation > 1.0 ? 0.0 : 0.1, 20.0 + d.radiation / 5.0};
}

std::uint64_t scenario_seed(std::uint64_t root_seed, std::size_t j) {
  return derive_seed(root_seed, static_cast<std::uint64_t>(j));
}

Scenario simulate_scenario(std::size_t index, std::uint64_t seed, const WeatherSeries& weather,
                           const ModelParameters& p, const GreenhouseState& x0) {
  Scenario s;
  s.index = index;
  s.seed = seed;
  s.period_s = weather.period_s();
  s.disturbances = weather.samples();
  s.controls.reserve(s.disturbances.size());
  for (const auto& d : s.disturbances) s.controls.push_back(control_policy(d));
  try {
    s.states = simulate(x0, s.controls, s.disturbances, p, s.period_s);
  } catch (Error& e) {
    e.add_context("scenario " + std::to_string(index));
    throw;
  }
  return s;
}

std::vector<Scenario> generate_scenarios(std::size_t n_scenarios, std::size_t days,
                                         double period_s, std::uint64_t root_seed,
                                         const ModelParameters& p, const GreenhouseState& x0,
                                         const WeatherProfile& profile) {
  if (n_scenarios < 1) throw InvalidArgument("generate_scenarios: need at least one scenario");
  profile.validate();

  std::vector<Scenario> out(n_scenarios);
  parallel_for(n_scenarios, [&](std::size_t j) {
    const std::uint64_t seed = scenario_seed(root_seed, j);
    out[j] = simulate_scenario(j, seed, synth_weather(days, period_s, seed, profile), p, x0);
  });
  return out;
}

std::vector<Scenario> scenarios_from_weather(const WeatherSeries& weather,
                                             std::size_t n_scenarios, std::size_t days,
                                             std::size_t window_days, std::size_t first_index,
                                             const ModelParameters& p,
                                             const GreenhouseState& x0) {
  if (n_scenarios < 1) throw InvalidArgument("scenarios_from_weather: need at least one scenario");
  if (days > window_days) throw InvalidArgument("scenarios_from_weather: days exceed window");
  const double per_day = 86400.0 / weather.period_s();
  if (std::abs(per_day - std::round(per_day)) > 1e-9)
    throw IncompatiblePeriods("weather period must divide one day");
  const auto steps_per_day = static_cast<std::size_t>(std::round(per_day));

  std::vector<Scenario> out(n_scenarios);
  parallel_for(n_scenarios, [&](std::size_t i) {
    const std::size_t j = first_index + i;
    const WeatherSeries window =
        weather.slice(j * window_days * steps_per_day, days * steps_per_day);
    out[i] = simulate_scenario(j, static_cast<std::uint64_t>(j), window, p, x0);
  });
  return out;
}

std::string parameter_hash(const ModelParameters& p) {
  std::string bytes;
  for (double v : p.values()) bytes += format_double(v) + ";";
  return fnv1a_hex(bytes);
}

void write_scenario_archive(const std::filesystem::path& dir,
                            const std::vector<Scenario>& scenarios, const ModelParameters& p,
                            const ArchiveInfo& info) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["format"] = "lettuce-bnode-scenarios";
  manifest["version"] = 1;
  manifest["root_seed"] = info.root_seed;
  manifest["days"] = info.days;
  manifest["period_s"] = scenarios.empty() ? 0.0 : scenarios.front().period_s;
  manifest["weather_source"] = info.weather_source;
  manifest["parameter_hash"] = parameter_hash(p);
  auto& list = manifest["scenarios"] = nlohmann::ordered_json::array();

  for (const auto& s : scenarios) {
    char name[32];
    std::snprintf(name, sizeof name, "scenario_%03zu.csv", s.index);
    std::ofstream out(dir / name);
    if (!out) throw IoError("cannot write " + (dir / name).string());
    write_trajectory_csv(out, s.states, s.controls, s.disturbances, s.period_s);
    list.push_back({{"index", s.index}, {"seed", s.seed}, {"steps", s.steps()}, {"file", name}});
  }

  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

}  // namespace lettuce

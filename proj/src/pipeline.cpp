#include "lettuce/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lettuce/errors.hpp"

namespace lettuce {

namespace {

using ojson = nlohmann::ordered_json;

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + ": expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw InvalidArgument(where + ": unknown field '" + key + "'");
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(where + "." + key + ": " + e.what());
  }
}

ChannelProfile channel_from_json(const nlohmann::json& j, ChannelProfile c, const std::string& where) {
  reject_unknown(j, {"mean", "amplitude", "noise", "daily_sd"}, where);
  read(j, "mean", c.mean, where);
  read(j, "amplitude", c.amplitude, where);
  read(j, "noise", c.noise, where);
  read(j, "daily_sd", c.daily_sd, where);
  return c;
}

ojson channel_to_json(const ChannelProfile& c) {
  return {{"mean", c.mean}, {"amplitude", c.amplitude}, {"noise", c.noise}, {"daily_sd", c.daily_sd}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

}  // namespace

void RunConfig::validate() const {
  if (days_train < 1 || days_forecast < 1)
    throw InvalidArgument("config: days_train and days_forecast must be >= 1");
  if (n_scenarios < 1) throw InvalidArgument("config: n_scenarios must be >= 1");
  if (!(period_s > 0.0)) throw InvalidArgument("config: period_s must be positive");
  const double per_day = 86400.0 / period_s;
  if (std::abs(per_day - std::round(per_day)) > 1e-9)
    throw InvalidArgument("config: period_s must divide one day");
  if (forecast.n_samples < 1) throw InvalidArgument("config: forecast.n_samples must be >= 1");
  for (double l : forecast.levels)
    if (!(l >= 0.0 && l < 1.0)) throw InvalidArgument("config: levels must lie in [0, 1)");
  if (!is_admissible(x0)) throw InvalidArgument("config: initial state is not admissible");
  if (layout.input_dim != kFeatureWidth || layout.output_dim != kTargetWidth)
    throw InvalidArgument("config: network must map 11 features to 4 outputs");
  layout.validate();
  train.validate();
  weather.validate();
}

std::size_t RunConfig::steps_per_day() const {
  return static_cast<std::size_t>(std::round(86400.0 / period_s));
}

std::uint64_t RunConfig::train_seed() const {
  return train_seed_explicit ? train.seed : derive_seed(seed, "train");
}

std::uint64_t RunConfig::forecast_seed() const { return derive_seed(seed, "forecast"); }

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  reject_unknown(j,
                 {"physics", "initial_state", "weather", "n_scenarios", "days_train",
                  "days_forecast", "period_s", "network", "train", "forecast", "seed",
                  "output_dir"},
                 "config");

  if (j.contains("physics")) {
    const auto& p = j["physics"];
    if (p.is_string()) {
      if (p != "nominal") throw InvalidArgument("config.physics: unknown preset " + p.dump());
    } else {
      reject_unknown(p, {"p"}, "config.physics");
      std::array<double, ModelParameters::kCount> values{};
      read(p, "p", values, "config.physics");
      c.params = ModelParameters(values);
    }
  }
  if (j.contains("initial_state")) {
    Vec4 x{};
    read(j, "initial_state", x, "config");
    c.x0 = GreenhouseState::from_array(x);
  }
  if (j.contains("weather")) {
    const auto& w = j["weather"];
    reject_unknown(w, {"csv", "profile"}, "config.weather");
    if (w.contains("csv")) c.weather_csv = w["csv"].get<std::string>();
    if (w.contains("profile")) {
      const auto& p = w["profile"];
      reject_unknown(p,
                     {"radiation", "outdoor_co2", "outdoor_temp", "outdoor_humidity",
                      "sunrise_s", "thermal_lag_s"},
                     "config.weather.profile");
      auto& prof = c.weather;
      if (p.contains("radiation"))
        prof.radiation = channel_from_json(p["radiation"], prof.radiation, "weather.radiation");
      if (p.contains("outdoor_co2"))
        prof.outdoor_co2 = channel_from_json(p["outdoor_co2"], prof.outdoor_co2, "weather.outdoor_co2");
      if (p.contains("outdoor_temp"))
        prof.outdoor_temp = channel_from_json(p["outdoor_temp"], prof.outdoor_temp, "weather.outdoor_temp");
      if (p.contains("outdoor_humidity"))
        prof.outdoor_humidity =
            channel_from_json(p["outdoor_humidity"], prof.outdoor_humidity, "weather.outdoor_humidity");
      read(p, "sunrise_s", prof.sunrise_s, "config.weather.profile");
      read(p, "thermal_lag_s", prof.thermal_lag_s, "config.weather.profile");
    }
  }
  read(j, "n_scenarios", c.n_scenarios, "config");
  read(j, "days_train", c.days_train, "config");
  read(j, "days_forecast", c.days_forecast, "config");
  read(j, "period_s", c.period_s, "config");
  if (j.contains("network")) {
    const auto& n = j["network"];
    reject_unknown(n, {"hidden"}, "config.network");
    if (n.contains("hidden")) {
      c.layout.hidden.clear();
      for (const auto& h : n["hidden"]) {
        reject_unknown(h, {"width", "activation"}, "config.network.hidden");
        HiddenLayer layer;
        read(h, "width", layer.width, "config.network.hidden");
        if (h.contains("activation")) layer.activation = activation_from_string(h["activation"]);
        c.layout.hidden.push_back(layer);
      }
    }
  }
  if (j.contains("train")) {
    c.train = train_config_from_json(j["train"]);
    c.train_seed_explicit = j["train"].contains("seed");
  }
  if (j.contains("forecast")) {
    const auto& f = j["forecast"];
    reject_unknown(f, {"n_samples", "levels", "rollout_space", "bands"}, "config.forecast");
    read(f, "n_samples", c.forecast.n_samples, "config.forecast");
    read(f, "levels", c.forecast.levels, "config.forecast");
    if (f.contains("rollout_space")) c.forecast.space = rollout_space_from_string(f["rollout_space"]);
    if (f.contains("bands")) c.forecast.bands = band_method_from_string(f["bands"]);
  }
  read(j, "seed", c.seed, "config");
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  c.validate();
  return c;
}

ojson run_config_to_json(const RunConfig& c) {
  ojson j;
  if (c.params == ModelParameters::nominal())
    j["physics"] = "nominal";
  else
    j["physics"] = {{"p", c.params.values()}};
  j["initial_state"] = c.x0.to_array();
  ojson weather;
  if (c.weather_csv) weather["csv"] = c.weather_csv->string();
  weather["profile"] = {{"radiation", channel_to_json(c.weather.radiation)},
                        {"outdoor_co2", channel_to_json(c.weather.outdoor_co2)},
                        {"outdoor_temp", channel_to_json(c.weather.outdoor_temp)},
                        {"outdoor_humidity", channel_to_json(c.weather.outdoor_humidity)},
                        {"sunrise_s", c.weather.sunrise_s},
                        {"thermal_lag_s", c.weather.thermal_lag_s}};
  j["weather"] = weather;
  j["n_scenarios"] = c.n_scenarios;
  j["days_train"] = c.days_train;
  j["days_forecast"] = c.days_forecast;
  j["period_s"] = c.period_s;
  auto hidden = ojson::array();
  for (const auto& h : c.layout.hidden)
    hidden.push_back({{"width", h.width}, {"activation", to_string(h.activation)}});
  j["network"] = {{"hidden", hidden}};
  auto train = train_config_to_json(c.train);
  if (!c.train_seed_explicit) train.erase("seed");
  j["train"] = train;
  j["forecast"] = {{"n_samples", c.forecast.n_samples},
                   {"levels", c.forecast.levels},
                   {"rollout_space", to_string(c.forecast.space)},
                   {"bands", to_string(c.forecast.bands)}};
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    return run_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string config_hash(const RunConfig& c) {
  auto j = run_config_to_json(c);
  j.erase("output_dir");
  return fnv1a_hex(j.dump());
}

std::vector<Scenario> training_scenarios(const RunConfig& c) {
  if (c.weather_csv) {
    WeatherSeries series = load_weather_csv(*c.weather_csv);
    if (series.period_s() != c.period_s) series = resample(series, c.period_s);
    return scenarios_from_weather(series, c.n_scenarios, c.days_train,
                                  c.days_train + c.days_forecast, 0, c.params, c.x0);
  }
  return generate_scenarios(c.n_scenarios, c.days_train, c.period_s, c.seed, c.params, c.x0,
                            c.weather);
}

Scenario holdout_scenario(const RunConfig& c) {
  const std::size_t days = c.days_train + c.days_forecast;
  if (c.weather_csv) {
    WeatherSeries series = load_weather_csv(*c.weather_csv);
    if (series.period_s() != c.period_s) series = resample(series, c.period_s);
    return scenarios_from_weather(series, 1, days, days, c.n_scenarios, c.params, c.x0).front();
  }
  const std::uint64_t seed = scenario_seed(c.seed, c.n_scenarios);
  return simulate_scenario(c.n_scenarios, seed, synth_weather(days, c.period_s, seed, c.weather),
                           c.params, c.x0);
}

std::vector<Scenario> cmd_simulate(const RunConfig& c) {
  c.validate();
  auto scenarios = training_scenarios(c);
  write_scenario_archive(c.output_dir / "scenarios", scenarios, c.params,
                         {c.seed, c.days_train,
                          c.weather_csv ? c.weather_csv->string() : "synthetic"});
  return scenarios;
}

TrainOutcome cmd_train(const RunConfig& c) {
  c.validate();
  const auto scenarios = training_scenarios(c);
  const NormStats stats = compute_stats(scenarios, c.period_s);
  const Dataset dataset = build_matrices(scenarios, stats, c.period_s);

  TrainConfig tc = c.train;
  tc.seed = c.train_seed();
  const BayesianMLP initial = init_network(c.layout, derive_seed(tc.seed, "init"), tc.init_sigma);
  TrainResult result = train(initial, dataset, tc);

  TrainOutcome out{{std::move(result.net), stats, tc, config_hash(c)}, std::move(result.history)};
  save_checkpoint(out.checkpoint, c.output_dir / "checkpoint.json");
  std::ostringstream history;
  write_history_csv(history, out.history);
  write_text(c.output_dir / "history.csv", history.str());
  write_dataset(c.output_dir / "dataset", dataset);
  return out;
}

ForecastOutcome run_forecast(const RunConfig& c, const Checkpoint& checkpoint) {
  const Scenario holdout = holdout_scenario(c);
  const std::size_t start = c.days_train * c.steps_per_day();
  const std::size_t horizon = c.days_forecast * c.steps_per_day();
  const std::span<const ControlInput> u(holdout.controls.data() + start, horizon);
  const std::span<const Disturbance> d(holdout.disturbances.data() + start, horizon);

  ForecastOutcome out;
  out.truth.assign(holdout.states.begin() + static_cast<long>(start),
                   holdout.states.begin() + static_cast<long>(start + horizon + 1));
  out.ensemble = ensemble_forecast(checkpoint.net, checkpoint.stats, holdout.states[start], u, d,
                                   c.forecast.n_samples, c.period_s, c.forecast_seed(),
                                   {c.forecast.space, start});
  out.summary = summarize(out.ensemble, c.forecast.levels, c.forecast.bands);
  out.score = score(out.summary, out.truth);
  return out;
}

ForecastOutcome cmd_forecast(const RunConfig& c, const std::filesystem::path& checkpoint_path) {
  c.validate();
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path, &c.layout);
  ForecastOutcome out = run_forecast(c, checkpoint);

  std::ostringstream csv;
  write_forecast_csv(csv, out.summary, c.period_s, out.ensemble.start_step,
                     std::span<const GreenhouseState>(out.truth));
  write_text(c.output_dir / "forecast.csv", csv.str());

  ojson metrics = score_to_json(out.score, checkpoint.stats);
  metrics["n_samples"] = c.forecast.n_samples;
  metrics["horizon_steps"] = out.ensemble.horizon();
  metrics["start_step"] = out.ensemble.start_step;
  metrics["forecast_seed"] = c.forecast_seed();
  metrics["bands"] = to_string(c.forecast.bands);
  metrics["rollout_space"] = to_string(c.forecast.space);
  write_text(c.output_dir / "metrics.json", metrics.dump(2) + "\n");
  return out;
}

nlohmann::ordered_json cmd_evaluate(const RunConfig& c) {
  const auto scenarios = cmd_simulate(c);
  const TrainOutcome trained = cmd_train(c);
  const ForecastOutcome forecast = cmd_forecast(c, c.output_dir / "checkpoint.json");

  ojson report;
  report["config_hash"] = config_hash(c);
  report["parameter_hash"] = parameter_hash(c.params);
  auto scenario_seeds = ojson::array();
  for (const auto& s : scenarios) scenario_seeds.push_back(s.seed);
  report["seeds"] = {{"root", c.seed},
                     {"scenarios", scenario_seeds},
                     {"holdout_scenario", scenario_seed(c.seed, c.n_scenarios)},
                     {"train", trained.checkpoint.config.seed},
                     {"forecast", c.forecast_seed()}};

  const TrainHistory& h = trained.history;
  ojson training;
  training["epochs"] = h.epochs();
  if (h.epochs() > 0) {
    training["first_epoch_data_loss"] = h.data_loss.front();
    training["final_epoch_data_loss"] = h.data_loss.back();
    training["data_loss_ratio"] = h.data_loss.back() / h.data_loss.front();
    training["final_total_loss"] = h.total_loss.back();
  }
  training["parameter_count"] = trained.checkpoint.net.layout.parameter_count();
  training["active_params"] = trained.checkpoint.net.active_count();
  report["training"] = training;

  ojson metrics = score_to_json(forecast.score, trained.checkpoint.stats);
  metrics["n_samples"] = c.forecast.n_samples;
  metrics["horizon_steps"] = forecast.ensemble.horizon();
  report["forecast"] = metrics;
  report["config"] = run_config_to_json(c);
  write_text(c.output_dir / "report.json", report.dump(2) + "\n");
  return report;
}

}  // namespace lettuce

#include "lettuce/weather.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "lettuce/errors.hpp"

namespace lettuce {

namespace {

constexpr double kDay = 86400.0;

void check_channel(const ChannelProfile& c, const char* name) {
  if (!std::isfinite(c.mean) || !std::isfinite(c.amplitude) || !std::isfinite(c.noise) ||
      !std::isfinite(c.daily_sd))
    throw InvalidProfile(std::string(name) + ": non-finite profile value");
  if (c.amplitude < 0.0 || c.noise < 0.0 || c.daily_sd < 0.0)
    throw InvalidProfile(std::string(name) + ": amplitude, noise and daily_sd must be >= 0");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& text, std::size_t row, const char* column) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  while (used < text.size() && std::isspace(static_cast<unsigned char>(text[used]))) ++used;
  if (used == 0 || used != text.size() || !std::isfinite(value))
    throw ParseError("row " + std::to_string(row) + ", column " + column + ": '" + text +
                     "' is not a finite number");
  return value;
}

}  // namespace

void WeatherProfile::validate() const {
  check_channel(radiation, "radiation");
  check_channel(outdoor_co2, "outdoor_co2");
  check_channel(outdoor_temp, "outdoor_temp");
  check_channel(outdoor_humidity, "outdoor_humidity");
  if (radiation.mean < 0.0) throw InvalidProfile("radiation: negative mean");
  if (radiation.mean + radiation.amplitude <= 0.0)
    throw InvalidProfile("radiation: profile never produces daylight");
  if (outdoor_co2.mean - outdoor_co2.amplitude < 0.0)
    throw InvalidProfile("outdoor_co2: sinusoid goes negative");
  if (outdoor_humidity.mean - outdoor_humidity.amplitude <= 0.0)
    throw InvalidProfile("outdoor_humidity: sinusoid reaches nonpositive values");
  if (!std::isfinite(sunrise_s) || !std::isfinite(thermal_lag_s))
    throw InvalidProfile("non-finite phase offset");
}

bool is_valid_disturbance(const Disturbance& d) {
  return std::isfinite(d.radiation) && std::isfinite(d.outdoor_co2) &&
         std::isfinite(d.outdoor_temp) && std::isfinite(d.outdoor_humidity) &&
         d.radiation >= 0.0 && d.outdoor_co2 >= 0.0 && d.outdoor_humidity >= 0.0;
}

WeatherSeries::WeatherSeries(double period_s, std::vector<Disturbance> samples,
                             std::string source_tag)
    : period_s_(period_s), samples_(std::move(samples)), source_tag_(std::move(source_tag)) {
  if (!(period_s_ > 0.0) || !std::isfinite(period_s_))
    throw InvalidArgument("weather series period must be positive");
  if (samples_.empty()) throw InvalidArgument("weather series must not be empty");
  for (std::size_t k = 0; k < samples_.size(); ++k)
    if (!is_valid_disturbance(samples_[k]))
      throw InvalidArgument("weather sample " + std::to_string(k) + " violates invariants");
}

WeatherSeries WeatherSeries::slice(std::size_t first, std::size_t count) const {
  if (first + count > samples_.size())
    throw InsufficientData("weather slice [" + std::to_string(first) + ", " +
                           std::to_string(first + count) + ") exceeds " +
                           std::to_string(samples_.size()) + " samples");
  return WeatherSeries(period_s_,
                       std::vector<Disturbance>(samples_.begin() + static_cast<long>(first),
                                                samples_.begin() + static_cast<long>(first + count)),
                       source_tag_);
}

WeatherSeries synth_weather(std::size_t days, double period_s, std::uint64_t seed,
                            const WeatherProfile& profile) {
  profile.validate();
  if (days < 1) throw InvalidArgument("synth_weather: days must be >= 1");
  const double per_day = kDay / period_s;
  if (!(period_s > 0.0) || std::abs(per_day - std::round(per_day)) > 1e-9)
    throw InvalidArgument("synth_weather: period must divide 86400 s");
  const auto steps_per_day = static_cast<std::size_t>(std::round(per_day));

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  std::vector<Disturbance> samples;
  samples.reserve(days * steps_per_day);
  for (std::size_t day = 0; day < days; ++day) {
    const double temp_shift = profile.outdoor_temp.daily_sd * normal(rng);
    const double hum_shift = profile.outdoor_humidity.daily_sd * normal(rng);
    const double co2_shift = profile.outdoor_co2.daily_sd * normal(rng);
    const double rad_shift = profile.radiation.daily_sd * normal(rng);

    for (std::size_t s = 0; s < steps_per_day; ++s) {
      // Phase from time of day, so noiseless output repeats bit-for-bit every day.
      const double t = static_cast<double>(s) * period_s;
      const double solar = std::sin(two_pi * (t - profile.sunrise_s) / kDay);
      const double thermal =
          std::sin(two_pi * (t - profile.sunrise_s - profile.thermal_lag_s) / kDay);

      Disturbance d;
      const double rad_noise = profile.radiation.noise * normal(rng);
      if (solar > 0.0) {
        const double clear = std::max(
            0.0, profile.radiation.mean + rad_shift + profile.radiation.amplitude * solar);
        d.radiation = std::max(0.0, clear + rad_noise);
      }
      d.outdoor_co2 = std::max(0.0, profile.outdoor_co2.mean + co2_shift +
                                        profile.outdoor_co2.amplitude * thermal +
                                        profile.outdoor_co2.noise * normal(rng));
      d.outdoor_temp = profile.outdoor_temp.mean + temp_shift +
                       profile.outdoor_temp.amplitude * thermal +
                       profile.outdoor_temp.noise * normal(rng);
      // Humidity floor: a tenth of the profile minimum keeps it strictly positive.
      const double hum_floor =
          0.1 * (profile.outdoor_humidity.mean - profile.outdoor_humidity.amplitude);
      d.outdoor_humidity = std::max(hum_floor, profile.outdoor_humidity.mean + hum_shift +
                                                   profile.outdoor_humidity.amplitude * thermal +
                                                   profile.outdoor_humidity.noise * normal(rng));
      samples.push_back(d);
    }
  }
  return WeatherSeries(period_s, std::move(samples), "synthetic:seed=" + std::to_string(seed));
}

WeatherSeries load_weather_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open weather file " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "time_s,rad_Wm2,co2_kgm3,temp_C,hum_kgm3")
    throw ParseError(path.string() + ": unexpected header '" + line + "'");

  static constexpr const char* kColumns[] = {"time_s", "rad_Wm2", "co2_kgm3", "temp_C",
                                             "hum_kgm3"};
  std::vector<double> times;
  std::vector<Disturbance> samples;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 5)
      throw ParseError("row " + std::to_string(row) + ": expected 5 columns, found " +
                       std::to_string(cells.size()));
    double v[5];
    for (std::size_t c = 0; c < 5; ++c) v[c] = parse_cell(cells[c], row, kColumns[c]);
    for (std::size_t c : {1u, 2u, 4u})
      if (v[c] < 0.0)
        throw ParseError("row " + std::to_string(row) + ", column " + kColumns[c] +
                         ": negative value " + cells[c]);
    times.push_back(v[0]);
    samples.push_back({v[1], v[2], v[3], v[4]});
  }
  if (samples.size() < 2)
    throw ParseError(path.string() + ": need at least two rows to infer the period");

  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1]))
      throw NonMonotoneTime("row " + std::to_string(k + 2) + ": time " +
                            format_double(times[k]) + " does not increase");

  const double period = times[1] - times[0];
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double gap = times[k] - times[k - 1];
    if (std::abs(gap - period) > 0.01 * period)
      throw IrregularPeriod("row " + std::to_string(k + 2) + ": gap " + format_double(gap) +
                            " s deviates from period " + format_double(period) + " s");
  }
  return WeatherSeries(period, std::move(samples), path.string());
}

WeatherSeries resample(const WeatherSeries& series, double new_period_s) {
  const double ratio_real = new_period_s / series.period_s();
  const double ratio_round = std::round(ratio_real);
  if (!(new_period_s >= series.period_s()) || std::abs(ratio_real - ratio_round) > 1e-9 * ratio_round)
    throw IncompatiblePeriods("cannot resample period " + format_double(series.period_s()) +
                              " s to " + format_double(new_period_s) + " s");
  const auto ratio = static_cast<std::size_t>(ratio_round);
  const std::size_t bins = series.size() / ratio;
  if (bins == 0)
    throw InsufficientData("resample: series shorter than one output bin");

  std::vector<Disturbance> out;
  out.reserve(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    Vec4 acc{};
    for (std::size_t i = 0; i < ratio; ++i) {
      const Vec4 v = series.samples()[b * ratio + i].to_array();
      for (std::size_t c = 0; c < 4; ++c) acc[c] += v[c];
    }
    for (double& a : acc) a /= static_cast<double>(ratio);
    out.push_back(Disturbance::from_array(acc));
  }
  return WeatherSeries(new_period_s, std::move(out), series.source_tag());
}

}  // namespace lettuce

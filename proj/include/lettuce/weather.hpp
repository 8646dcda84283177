#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lettuce/physics.hpp"

namespace lettuce {

/// One weather channel: a daily sinusoid around `mean`, a per-day random
/// shift of the mean (`daily_sd`) and white noise (`noise`).
struct ChannelProfile {
  double mean = 0.0;
  double amplitude = 0.0;
  double noise = 0.0;
  double daily_sd = 0.0;
};

/// Parameters of the synthetic diurnal weather generator. The defaults keep
/// indoor temperatures well inside the range where the photosynthesis
/// hyperbola is regular.
struct WeatherProfile {
  // Radiation is max(0, mean + amplitude * sin(day phase)) during daylight
  // and zero at night.
  ChannelProfile radiation{0.0, 250.0, 5.0, 0.0};
  ChannelProfile outdoor_co2{8e-4, 0.0, 2e-5, 0.0};
  ChannelProfile outdoor_temp{10.0, 5.0, 0.5, 2.0};
  ChannelProfile outdoor_humidity{5e-3, 1e-3, 1e-4, 5e-4};
  double sunrise_s = 6.0 * 3600.0;
  // Temperature and humidity peak this long after solar noon.
  double thermal_lag_s = 3.0 * 3600.0;

  /// Throws InvalidProfile.
  void validate() const;
};

/// An immutable, validated disturbance stream sampled at a fixed period.
class WeatherSeries {
 public:
  WeatherSeries(double period_s, std::vector<Disturbance> samples, std::string source_tag);

  double period_s() const { return period_s_; }
  const std::vector<Disturbance>& samples() const { return samples_; }
  const std::string& source_tag() const { return source_tag_; }
  std::size_t size() const { return samples_.size(); }

  /// Samples [first, first + count).
  WeatherSeries slice(std::size_t first, std::size_t count) const;

 private:
  double period_s_;
  std::vector<Disturbance> samples_;
  std::string source_tag_;
};

bool is_valid_disturbance(const Disturbance& d);

WeatherSeries synth_weather(std::size_t days, double period_s, std::uint64_t seed,
                            const WeatherProfile& profile);

/// Reads `time_s,rad_Wm2,co2_kgm3,temp_C,hum_kgm3`. The period is taken from
/// the first two timestamps; every other gap must be within 1% of it.
WeatherSeries load_weather_csv(const std::filesystem::path& path);

/// Block-average decimation to an integer multiple of the current period.
WeatherSeries resample(const WeatherSeries& series, double new_period_s);

}  // namespace lettuce

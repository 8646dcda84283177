#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "lettuce/common.hpp"

namespace lettuce {

/// Greenhouse state x.
struct GreenhouseState {
  double dry_weight = 0.0;       // kg/m^2
  double indoor_co2 = 0.0;       // kg/m^3
  double indoor_temp = 0.0;      // deg C
  double indoor_humidity = 0.0;  // kg/m^3

  Vec4 to_array() const { return {dry_weight, indoor_co2, indoor_temp, indoor_humidity}; }
  static GreenhouseState from_array(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

  bool operator==(const GreenhouseState&) const = default;
};

/// Actuator signals u.
struct ControlInput {
  double co2_injection = 0.0;  // mg/m^2/s
  double ventilation = 0.0;    // mm/s
  double heating = 0.0;        // W/m^2

  Vec3 to_array() const { return {co2_injection, ventilation, heating}; }
  static ControlInput from_array(const Vec3& v) { return {v[0], v[1], v[2]}; }

  bool operator==(const ControlInput&) const = default;
};

/// Outdoor weather d.
struct Disturbance {
  double radiation = 0.0;         // W/m^2
  double outdoor_co2 = 0.0;       // kg/m^3
  double outdoor_temp = 0.0;      // deg C
  double outdoor_humidity = 0.0;  // kg/m^3

  Vec4 to_array() const { return {radiation, outdoor_co2, outdoor_temp, outdoor_humidity}; }
  static Disturbance from_array(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

  bool operator==(const Disturbance&) const = default;
};

/// Time derivative of GreenhouseState, per second.
using StateDerivative = Vec4;

/// The 28 lettuce/greenhouse constants, indexed 1..28 as in the van Henten
/// model. p12..p15, p27 and p28 are carried for completeness but do not
/// enter the four state equations.
class ModelParameters {
 public:
  static constexpr std::size_t kCount = 28;

  ModelParameters() = default;
  explicit ModelParameters(const std::array<double, kCount>& values);

  /// Published nominal values for lettuce.
  static ModelParameters nominal();

  /// 1-based access.
  double operator()(std::size_t index) const { return values_[index - 1]; }

  const std::array<double, kCount>& values() const { return values_; }

  bool operator==(const ModelParameters&) const = default;

 private:
  std::array<double, kCount> values_{};
};

struct CanopyFluxes {
  double phot = 0.0;       // gross canopy photosynthesis, kg CO2/m^2/s
  double vent_co2 = 0.0;   // CO2 exchange through the vents
  double transp = 0.0;     // canopy transpiration, kg H2O/m^2/s
  double vent_h2o = 0.0;   // H2O exchange through the vents
  double phi_denom = 0.0;  // denominator of the photosynthesis rectangular hyperbola
};

/// |phi| below this raises DegenerateDenominator.
inline constexpr double kDenominatorGuard = 1e-30;

CanopyFluxes canopy_fluxes(const GreenhouseState& x, const ControlInput& u,
                           const Disturbance& d, const ModelParameters& p);

StateDerivative derivatives(const GreenhouseState& x, const ControlInput& u,
                            const Disturbance& d, const ModelParameters& p);

/// One classical RK4 step of length h seconds with u and d held constant.
/// Throws NonFiniteState if the result is not finite or has a negative
/// dry weight, CO2 or humidity.
GreenhouseState rk4_step(const GreenhouseState& x, const ControlInput& u,
                         const Disturbance& d, const ModelParameters& p, double h);

/// Rolls rk4_step over the input sequences. Returns N+1 states, the first
/// being x0. The states are also the measurements (y = x).
std::vector<GreenhouseState> simulate(const GreenhouseState& x0,
                                      std::span<const ControlInput> u_seq,
                                      std::span<const Disturbance> d_seq,
                                      const ModelParameters& p, double h);

/// The standard initial condition x(0) = (0.0035, 0.001, 15, 0.008).
GreenhouseState nominal_initial_state();

bool is_admissible(const GreenhouseState& x);

/// Trajectory CSV: `step,time_s,x1,x2,x3,x4,u1,u2,u3,d1,d2,d3,d4`.
/// states has one more row than controls/disturbances; the input cells of
/// the final row are left empty.
void write_trajectory_csv(std::ostream& out, std::span<const GreenhouseState> states,
                          std::span<const ControlInput> controls,
                          std::span<const Disturbance> disturbances, double h);

}  // namespace lettuce

#include "lettuce/physics.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "lettuce/errors.hpp"

namespace lettuce {

namespace {

Vec4 axpy(const Vec4& x, double a, const Vec4& k) {
  return {x[0] + a * k[0], x[1] + a * k[1], x[2] + a * k[2], x[3] + a * k[3]};
}

bool all_finite(const Vec4& v) {
  for (double c : v)
    if (!std::isfinite(c)) return false;
  return true;
}

}  // namespace

ModelParameters::ModelParameters(const std::array<double, kCount>& values)
    : values_(values) {
  for (double v : values_)
    if (!std::isfinite(v)) throw InvalidArgument("model parameters must be finite");
  for (std::size_t i : {9u, 16u, 20u})
    if (!((*this)(i) > 0.0))
      throw InvalidArgument("model parameter p" + std::to_string(i) + " must be positive");
}

ModelParameters ModelParameters::nominal() {
  return ModelParameters({
      0.544, 2.65e-7, 53.0, 3.55e-9, 5.11e-6, 2.3e-4, 6.29e-4,  // p1..p7
      5.2e-5, 4.1, 4.87e-7, 7.5e-6,                             // p8..p11
      8.31, 273.15, 101325.0, 0.044,                            // p12..p15
      3.0e4, 1290.0, 6.1, 0.2,                                  // p16..p19
      4.1, 0.0036, 9348.0, 8314.0, 273.15, 17.4, 239.0,         // p20..p26
      17.269, 238.3,                                            // p27, p28
  });
}

GreenhouseState nominal_initial_state() { return {0.0035, 0.001, 15.0, 0.008}; }

bool is_admissible(const GreenhouseState& x) {
  return all_finite(x.to_array()) && x.dry_weight >= 0.0 && x.indoor_co2 >= 0.0 &&
         x.indoor_humidity >= 0.0;
}

CanopyFluxes canopy_fluxes(const GreenhouseState& x, const ControlInput& u,
                           const Disturbance& d, const ModelParameters& p) {
  const double canopy_cover = 1.0 - std::exp(-p(3) * x.dry_weight);
  const double light_use = p(4) * d.radiation;
  const double co2_use = (-p(5) * x.indoor_temp * x.indoor_temp + p(6) * x.indoor_temp - p(7)) *
                         (x.indoor_co2 - p(8));

  CanopyFluxes f;
  f.phi_denom = light_use + co2_use;
  if (std::abs(f.phi_denom) < kDenominatorGuard)
    throw DegenerateDenominator("photosynthesis denominator vanished (|phi| = " +
                                format_double(std::abs(f.phi_denom)) + ")");

  f.phot = canopy_cover * (light_use * co2_use) / f.phi_denom;

  const double vent_rate = u.ventilation * 1e-3 + p(11);
  f.vent_co2 = vent_rate * (x.indoor_co2 - d.outdoor_co2);
  f.vent_h2o = vent_rate * (x.indoor_humidity - d.outdoor_humidity);

  const double saturation = p(22) / (p(23) * (x.indoor_temp + p(24))) *
                            std::exp(p(25) * x.indoor_temp / (x.indoor_temp + p(26)));
  f.transp = p(21) * canopy_cover * (saturation - x.indoor_humidity);
  return f;
}

StateDerivative derivatives(const GreenhouseState& x, const ControlInput& u,
                            const Disturbance& d, const ModelParameters& p) {
  const CanopyFluxes f = canopy_fluxes(x, u, d, p);
  const double respiration = x.dry_weight * std::exp2(x.indoor_temp / 10.0 - 2.5);

  StateDerivative dx;
  dx[0] = p(1) * f.phot - p(2) * respiration;
  dx[1] = (-f.phot + p(10) * respiration + u.co2_injection * 1e-6 - f.vent_co2) / p(9);
  dx[2] = (u.heating - (p(17) * u.ventilation * 1e-3 + p(18)) * (x.indoor_temp - d.outdoor_temp) +
           p(19) * d.radiation) /
          p(16);
  dx[3] = (f.transp - f.vent_h2o) / p(20);
  return dx;
}

GreenhouseState rk4_step(const GreenhouseState& x, const ControlInput& u,
                         const Disturbance& d, const ModelParameters& p, double h) {
  if (!(h >= 0.0)) throw InvalidArgument("rk4_step: step size must be nonnegative");

  auto rhs = [&](const Vec4& s) { return derivatives(GreenhouseState::from_array(s), u, d, p); };
  const Vec4 x0 = x.to_array();
  const Vec4 k1 = rhs(x0);
  const Vec4 k2 = rhs(axpy(x0, 0.5 * h, k1));
  const Vec4 k3 = rhs(axpy(x0, 0.5 * h, k2));
  const Vec4 k4 = rhs(axpy(x0, h, k3));

  Vec4 next;
  for (std::size_t i = 0; i < 4; ++i)
    next[i] = x0[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

  const GreenhouseState result = GreenhouseState::from_array(next);
  if (!is_admissible(result))
    throw NonFiniteState("rk4_step left the admissible state region", std::nullopt);
  return result;
}

std::vector<GreenhouseState> simulate(const GreenhouseState& x0,
                                      std::span<const ControlInput> u_seq,
                                      std::span<const Disturbance> d_seq,
                                      const ModelParameters& p, double h) {
  if (u_seq.size() != d_seq.size())
    throw LengthMismatch("simulate: control and disturbance sequences differ in length");
  if (u_seq.empty()) throw InvalidArgument("simulate: need at least one step");

  std::vector<GreenhouseState> trajectory;
  trajectory.reserve(u_seq.size() + 1);
  trajectory.push_back(x0);
  for (std::size_t k = 0; k < u_seq.size(); ++k) {
    try {
      trajectory.push_back(rk4_step(trajectory.back(), u_seq[k], d_seq[k], p, h));
    } catch (const NonFiniteState& e) {
      throw NonFiniteState(e.what(), k);
    }
  }
  return trajectory;
}

void write_trajectory_csv(std::ostream& out, std::span<const GreenhouseState> states,
                          std::span<const ControlInput> controls,
                          std::span<const Disturbance> disturbances, double h) {
  if (controls.size() != disturbances.size() || states.size() != controls.size() + 1)
    throw LengthMismatch("trajectory CSV: states must have one more row than the inputs");

  out << "step,time_s,x1,x2,x3,x4,u1,u2,u3,d1,d2,d3,d4\n";
  for (std::size_t k = 0; k < states.size(); ++k) {
    out << k << ',' << format_double(static_cast<double>(k) * h);
    for (double v : states[k].to_array()) out << ',' << format_double(v);
    if (k < controls.size()) {
      for (double v : controls[k].to_array()) out << ',' << format_double(v);
      for (double v : disturbances[k].to_array()) out << ',' << format_double(v);
    } else {
      out << ",,,,,,,";
    }
    out << '\n';
  }
}

}  // namespace lettuce

#pragma once

// Test-only oracle: adaptive Dormand-Prince integration of the greenhouse
// ODEs with inputs held constant over each sample period.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "lettuce/physics.hpp"

namespace lettuce::oracle {

inline GreenhouseState reference_step(const GreenhouseState& x, const ControlInput& u,
                                      const Disturbance& d, const ModelParameters& p, double h,
                                      double tol = 1e-10) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 4>;
  State s = x.to_array();
  auto rhs = [&](const State& y, State& dy, double) {
    dy = derivatives(GreenhouseState::from_array(y), u, d, p);
  };
  // Relative tolerance tol; absolute tolerance scaled to the smallest state magnitude.
  auto stepper = odeint::make_controlled(tol * 1e-6, tol, odeint::runge_kutta_dopri5<State>());
  odeint::integrate_adaptive(stepper, rhs, s, 0.0, h, h / 64.0);
  return GreenhouseState::from_array(s);
}

inline std::vector<GreenhouseState> reference_trajectory(const GreenhouseState& x0,
                                                         std::span<const ControlInput> u,
                                                         std::span<const Disturbance> d,
                                                         const ModelParameters& p, double h,
                                                         double tol = 1e-10) {
  std::vector<GreenhouseState> out{x0};
  for (std::size_t k = 0; k < u.size(); ++k)
    out.push_back(reference_step(out.back(), u[k], d[k], p, h, tol));
  return out;
}

}  // namespace lettuce::oracle

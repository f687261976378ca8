#pragma once

#include <cmath>
#include <numbers>

#include "synthctl/core.hpp"

// Linearized batch reactor (Rosenbrock 1974) with the excitation used for data generation.
namespace synthctl::batch_reactor {

inline Matrix A() {
  Matrix a(4, 4);
  a << 1.38, -0.2077, 6.715, -5.676,
      -0.5814, -4.29, 0.0, 0.675,
      1.067, 4.273, -6.654, 5.893,
      0.048, 4.273, 1.343, -2.104;
  return a;
}

inline Matrix B() {
  Matrix b(4, 2);
  b << 0.0, 0.0,
      5.679, 0.0,
      1.136, -3.146,
      1.136, 0.0;
  return b;
}

inline Vector x0() { return (Vector(4) << 1.0, -1.0, 0.0, 1.0).finished(); }

inline constexpr double kTau = 1.0;
inline constexpr double kNoiseIntensity = 1e-2;

/// u(t) = 5 [sin 2 pi t + sin 4 pi t; sin 3 pi t + sin 6 pi t]
inline Vector input(double t) {
  const double pi = std::numbers::pi;
  Vector u(2);
  u << 5.0 * (std::sin(2 * pi * t) + std::sin(4 * pi * t)),
      5.0 * (std::sin(3 * pi * t) + std::sin(6 * pi * t));
  return u;
}

}  // namespace synthctl::batch_reactor

#pragma once

// Independent reference computations used to freeze expected values in the tests.
// Nothing here shares code paths with the library beyond Signal evaluation.

#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "synthctl/synthesis.hpp"

namespace oracle {

using synthctl::Matrix;
using synthctl::Signal;
using synthctl::Vector;

/// Smallest multiple of every segment count that is at least `minimum`, so that no cell
/// straddles a breakpoint of piecewise-constant data.
inline int aligned_cells(const Signal& f, const Signal& g, int minimum) {
  const int base = std::lcm(f.grid().segments(), g.grid().segments());
  return base * ((minimum + base - 1) / base);
}

/// int int G(t,s) g(t) f(s)^T ds dt on a cells x cells grid (at least 10^6 cells).
/// The kernel splits as G = S - |t - s| / 2 with S(t,s) = ((t+s)(2 tau - t - s) + (t-s)^2) / (4 tau).
/// A 2 x 2 Gauss rule per cell handles every polynomial piece; the kink of |t - s| on the
/// diagonal cells is integrated from its exact cell moments, h^3 / 3 and -h^5 / 60.
inline Matrix gram_tt_cells(const Signal& f, const Signal& g) {
  const int cells = aligned_cells(f, g, 1000);
  const double tau = f.tau();
  const double h = tau / cells;
  const double off = h / (2.0 * std::sqrt(3.0));
  const int pts = 2 * cells;
  Vector t(pts);
  for (int i = 0; i < cells; ++i) {
    t(2 * i) = (i + 0.5) * h - off;
    t(2 * i + 1) = (i + 0.5) * h + off;
  }
  Matrix fv(f.dim(), pts);
  Matrix gv(g.dim(), pts);
  for (int i = 0; i < pts; ++i) {
    fv.col(i) = f(t(i));
    gv.col(i) = g(t(i));
  }
  Matrix kernel(pts, pts);
  for (int i = 0; i < pts; ++i) {
    for (int j = 0; j < pts; ++j) {
      const double a = t(i);
      const double b = t(j);
      if (i / 2 == j / 2) {
        kernel(i, j) = ((a + b) * (2.0 * tau - a - b) + (a - b) * (a - b)) / (4.0 * tau);
      } else {
        kernel(i, j) = a <= b ? a * (tau - b) / tau : b * (tau - a) / tau;
      }
    }
  }
  const double w = h / 2.0;
  Matrix out = gv * kernel * fv.transpose() * w * w;
  for (int i = 0; i < cells; ++i) {
    const Vector gm = 0.5 * (gv.col(2 * i) + gv.col(2 * i + 1));
    const Vector fm = 0.5 * (fv.col(2 * i) + fv.col(2 * i + 1));
    const Vector gs = (gv.col(2 * i + 1) - gv.col(2 * i)) / (2.0 * off);
    const Vector fs = (fv.col(2 * i + 1) - fv.col(2 * i)) / (2.0 * off);
    out -= 0.5 * (h * h * h / 3.0 * gm * fm.transpose() - std::pow(h, 5) / 60.0 * gs * fs.transpose());
  }
  return out;
}

/// int f f^T - (1/tau) int f int f^T by the midpoint rule.
inline Matrix gram_dd_midpoint(const Signal& f) {
  const int cells = aligned_cells(f, f, 1'000'000);
  const double h = f.tau() / cells;
  Matrix sq = Matrix::Zero(f.dim(), f.dim());
  Vector sum = Vector::Zero(f.dim());
  for (int i = 0; i < cells; ++i) {
    const Vector v = f((i + 0.5) * h);
    sq += v * v.transpose() * h;
    sum += v * h;
  }
  return sq - sum * sum.transpose() / f.tau();
}

/// int g(t) (-F(t) + (t/tau) F(tau))^T dt with F(t) = int_0^t f accumulated cell by cell.
inline Matrix gram_td_midpoint(const Signal& g, const Signal& f) {
  const int cells = aligned_cells(f, g, 1'000'000);
  const double tau = f.tau();
  const double h = tau / cells;
  Vector total = Vector::Zero(f.dim());
  for (int i = 0; i < cells; ++i) total += f((i + 0.5) * h) * h;
  Matrix out = Matrix::Zero(g.dim(), f.dim());
  Vector run = Vector::Zero(f.dim());
  for (int i = 0; i < cells; ++i) {
    const double t = (i + 0.5) * h;
    const Vector fv = f(t);
    const Vector F = run + 0.5 * h * fv;  // F at the cell midpoint
    out += g(t) * (-F + (t / tau) * total).transpose() * h;
    run += fv * h;
  }
  return out;
}

/// Classical RK4 for x' = A x + B u(t) + w(t).
inline Vector rk4(const Matrix& A, const Matrix& B, Vector x, const std::function<Vector(double)>& u,
                  const std::function<Vector(double)>& w, double t0, double t1, int steps) {
  const double h = (t1 - t0) / steps;
  auto rhs = [&](double t, const Vector& s) -> Vector {
    Vector d = A * s + B * u(t);
    if (w) d += w(t);
    return d;
  };
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * h;
    const Vector k1 = rhs(t, x);
    const Vector k2 = rhs(t + h / 2, x + h / 2 * k1);
    const Vector k3 = rhs(t + h / 2, x + h / 2 * k2);
    const Vector k4 = rhs(t + h, x + h * k3);
    x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

/// Truncated exponential series.
inline Matrix taylor_exp(const Matrix& m, int terms = 20) {
  Matrix out = Matrix::Identity(m.rows(), m.cols());
  Matrix term = out;
  for (int k = 1; k < terms; ++k) {
    term = term * m / k;
    out += term;
  }
  return out;
}

/// Random piecewise-linear or piecewise-constant signal with entries in [-1, 1].
inline Signal random_signal(std::mt19937_64& rng, const synthctl::UniformGrid& grid, int dim, synthctl::Interp interp) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  const int cols = interp == synthctl::Interp::kPiecewiseLinear ? grid.segments() + 1 : grid.segments();
  Matrix vals(dim, cols);
  for (int i = 0; i < vals.size(); ++i) vals.data()[i] = d(rng);
  return Signal(grid, interp, vals);
}

}  // namespace oracle

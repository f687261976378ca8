#pragma once

#include <array>
#include <numbers>
#include <vector>

#include "synthctl/core.hpp"
#include "synthctl/signals.hpp"

namespace synthctl {

// ============================================================================
// Synthesis-operator products
// ============================================================================
// For a signal f on [0, tau] the synthesis operator T maps phi in H^1_0 to
// int phi f dt, and the differentiated operator T_d maps phi to -int phi' f dt.
// Every product S T^* and S T_d^* below is a finite matrix, evaluated exactly for
// piecewise-linear and piecewise-constant data.

/// Green's function of -d^2/dt^2 on [0, tau] with homogeneous Dirichlet conditions.
inline double green_kernel(double t, double s, double tau) {
  require(tau > 0.0, "green_kernel: tau must be positive");
  require(t >= 0.0 && t <= tau && s >= 0.0 && s <= tau, "green_kernel: arguments outside [0, tau]");
  return t <= s ? t * (tau - s) / tau : s * (tau - t) / tau;
}

/// The six operator products that encode a trajectory.
struct GramBlocks {
  int n = 0;
  int m = 0;
  double tau = 0.0;
  Matrix Gdd;  ///< Xi_d Xi_d^*   (n x n)
  Matrix Gdx;  ///< Xi_d Xi^*     (n x n)
  Matrix Gdu;  ///< Xi_d Upsilon^* (n x m)
  Matrix Gxx;  ///< Xi Xi^*       (n x n)
  Matrix Gxu;  ///< Xi Upsilon^*  (n x m)
  Matrix Guu;  ///< Upsilon Upsilon^* (m x m)

  /// V V^* with V = [Xi; Upsilon].
  Matrix data_gram() const {
    Matrix v(n + m, n + m);
    v << Gxx, Gxu, Gxu.transpose(), Guu;
    return v;
  }

  /// [Xi_d Xi^*, Xi_d Upsilon^*].
  Matrix cross_gram() const {
    Matrix c(n, n + m);
    c << Gdx, Gdu;
    return c;
  }

  double scale() const { return tolerance_scale(Gdd, Gdx, Gdu, Gxx, Gxu, Guu); }
};

/// Hat-function images at dyadic level `level`: columns are Xi phi_p, Xi_d phi_p, Upsilon phi_p.
struct HatMatrices {
  int level = 0;
  Matrix Phi;
  Matrix PhiD;
  Matrix Psi;
};

using AdjointFunction = Signal;

enum class AdjointKind { kPlain, kDifferentiated };

namespace detail {

// 3-point Gauss-Legendre on [-1, 1]; exact through degree 5.
inline constexpr std::array<double, 3> kGaussNodes{-0.7745966692414833770358531, 0.0, 0.7745966692414833770358531};
inline constexpr std::array<double, 3> kGaussWeights{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

/// Calls fn(t, weight) at the Gauss points of every merged-grid segment.
template <typename Fn>
void integrate_merged(double tau, const std::vector<int>& counts, Fn&& fn) {
  const auto pts = merged_breakpoints(tau, counts);
  for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
    const double half = 0.5 * (pts[s + 1] - pts[s]);
    const double mid = 0.5 * (pts[s + 1] + pts[s]);
    for (int q = 0; q < 3; ++q) fn(mid + half * kGaussNodes[q], half * kGaussWeights[q]);
  }
}

/// First and second antiderivatives of a signal, tabulated at its nodes.
class Primitive {
 public:
  explicit Primitive(const Signal& f) : f_(&f), first_(f.dim(), f.grid().segments() + 1), second_(first_.rows(), first_.cols()) {
    const double dt = f.grid().step();
    first_.col(0).setZero();
    second_.col(0).setZero();
    for (int k = 0; k < f.grid().segments(); ++k) {
      const Vector c0 = f.c0(k);
      const Vector c1 = f.c1(k);
      first_.col(k + 1) = first_.col(k) + c0 * dt + c1 * (dt * dt / 2.0);
      second_.col(k + 1) = second_.col(k) + first_.col(k) * dt + c0 * (dt * dt / 2.0) + c1 * (dt * dt * dt / 6.0);
    }
  }

  /// int_0^t f
  Vector first(double t) const {
    const int k = f_->grid().segment_of(t);
    const double h = t - f_->grid().node(k);
    return first_.col(k) + f_->c0(k) * h + f_->c1(k) * (h * h / 2.0);
  }

  /// int_0^t int_0^r f
  Vector second(double t) const {
    const int k = f_->grid().segment_of(t);
    const double h = t - f_->grid().node(k);
    return second_.col(k) + first_.col(k) * h + f_->c0(k) * (h * h / 2.0) + f_->c1(k) * (h * h * h / 6.0);
  }

  Vector total() const { return first_.col(first_.cols() - 1); }

  /// H_f(t) = int G(t,s) f(s) ds, the solution of H'' = -f with H(0) = H(tau) = 0.
  Vector plain_kernel(double t) const {
    const double tau = f_->tau();
    return -second(t) + (t / tau) * second_.col(second_.cols() - 1);
  }

  /// D_f(t) = -int_0^t f + (t / tau) int_0^tau f.
  Vector diff_kernel(double t) const { return -first(t) + (t / f_->tau()) * total(); }

 private:
  const Signal* f_;
  Matrix first_;
  Matrix second_;
};

inline void require_same_span(const Signal& f, const Signal& g) {
  require(f.grid().same_span(g.grid()), "signals are defined over different durations");
}

}  // namespace detail

/// S_g T_f^* = int int G(t,s) g(t) f(s)^T ds dt   (q x p).
inline Matrix gram_tt(const Signal& f, const Signal& g) {
  detail::require_same_span(f, g);
  const detail::Primitive pf(f);
  Matrix out = Matrix::Zero(g.dim(), f.dim());
  detail::integrate_merged(f.tau(), {f.grid().segments(), g.grid().segments()},
                           [&](double t, double w) { out.noalias() += w * g(t) * pf.plain_kernel(t).transpose(); });
  return out;
}

/// T_d T_d^* = int f f^T - (1/tau) (int f)(int f)^T, evaluated as the covariance about the mean.
inline Matrix gram_dd(const Signal& f) {
  const detail::Primitive pf(f);
  const Vector mean = pf.total() / f.tau();
  Matrix out = Matrix::Zero(f.dim(), f.dim());
  detail::integrate_merged(f.tau(), {f.grid().segments()}, [&](double t, double w) {
    const Vector d = f(t) - mean;
    out.noalias() += w * d * d.transpose();
  });
  return out;
}

/// S_g T_{d,f}^* = int g(t) (-int_0^t f + (t/tau) int_0^tau f)^T dt   (q x p).
inline Matrix gram_td(const Signal& g, const Signal& f) {
  detail::require_same_span(f, g);
  const detail::Primitive pf(f);
  Matrix out = Matrix::Zero(g.dim(), f.dim());
  detail::integrate_merged(f.tau(), {f.grid().segments(), g.grid().segments()},
                           [&](double t, double w) { out.noalias() += w * g(t) * pf.diff_kernel(t).transpose(); });
  return out;
}

inline GramBlocks gram_blocks(const Trajectory& traj) {
  GramBlocks g;
  g.n = traj.n();
  g.m = traj.m();
  g.tau = traj.tau();
  g.Gdd = symmetrize(gram_dd(traj.x));
  g.Gxx = symmetrize(gram_tt(traj.x, traj.x));
  g.Guu = symmetrize(gram_tt(traj.u, traj.u));
  g.Gxu = gram_tt(traj.u, traj.x);
  g.Gdx = gram_td(traj.x, traj.x).transpose();
  g.Gdu = gram_td(traj.u, traj.x).transpose();
  return g;
}

inline HatMatrices hat_matrices(const Trajectory& traj, int level) {
  require(level >= 1 && level <= 20, "hat level must be in [1, 20]");
  const int parts = 1 << level;
  const double h = traj.tau() / parts;
  HatMatrices hm;
  hm.level = level;
  hm.Phi = Matrix::Zero(traj.n(), parts - 1);
  hm.PhiD = Matrix::Zero(traj.n(), parts - 1);
  hm.Psi = Matrix::Zero(traj.m(), parts - 1);
  const auto pts = merged_breakpoints(traj.tau(), {traj.x.grid().segments(), traj.u.grid().segments(), parts});
  for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
    const double a = pts[s];
    const double b = pts[s + 1];
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    const int q = std::clamp(static_cast<int>(std::floor(mid / h)), 0, parts - 1);
    for (int gp = 0; gp < 3; ++gp) {
      const double t = mid + half * detail::kGaussNodes[gp];
      const double w = half * detail::kGaussWeights[gp];
      const Vector xv = traj.x(t);
      const Vector uv = traj.u(t);
      const double rel = t / h - q;
      // Hat q (peak at q h) descends across [q h, (q + 1) h]; hat q + 1 ascends.
      if (q >= 1) {
        const double phi = 1.0 - rel;
        hm.Phi.col(q - 1) += w * phi * xv;
        hm.Psi.col(q - 1) += w * phi * uv;
        hm.PhiD.col(q - 1) += (w / h) * xv;
      }
      if (q + 1 <= parts - 1) {
        const double phi = rel;
        hm.Phi.col(q) += w * phi * xv;
        hm.Psi.col(q) += w * phi * uv;
        hm.PhiD.col(q) -= (w / h) * xv;
      }
    }
  }
  return hm;
}

/// Samples t -> (T^* v)(t) or (T_d^* v)(t) on a grid four times finer than f's.
inline AdjointFunction apply_adjoint(const Signal& f, const Vector& v, AdjointKind which) {
  require(v.size() == f.dim(), "apply_adjoint: vector dimension does not match the signal");
  const detail::Primitive pf(f);
  const UniformGrid fine(f.tau(), 4 * f.grid().segments());
  Matrix vals(1, fine.segments() + 1);
  for (int i = 0; i <= fine.segments(); ++i) {
    const double t = fine.node(i);
    vals(0, i) = (which == AdjointKind::kPlain ? pf.plain_kernel(t) : pf.diff_kernel(t)).dot(v);
  }
  vals(0, 0) = 0.0;
  vals(0, fine.segments()) = 0.0;
  return Signal(fine, Interp::kPiecewiseLinear, std::move(vals));
}

struct AdjointNormEstimate {
  double value = 0.0;       ///< (tau / pi) ||Gamma_N||, a lower bound on ||T^*||
  int terms = 0;            ///< N
  double tail_bound = 0.0;  ///< bound on ||Gamma||^2 - ||Gamma_N||^2
  bool converged = true;
};

/// Norm of T^* from the sine-series matrix Gamma_N with entries <f_k, psi_j> / j.
///
/// N grows until the truncated part of Gamma^T Gamma is provably below 2 tol ||Gamma_N||^2,
/// which bounds the relative error of the returned norm by tol. The tail is bounded with
/// Bessel's inequality, and for continuous data also through one integration by parts.
inline AdjointNormEstimate adjoint_norm_estimate(const Signal& f, double tol, int max_terms = 20'000'000) {
  require(tol > 0.0, "adjoint_norm: tolerance must be positive");
  const int p = f.dim();
  const int segs = f.grid().segments();
  const double tau = f.tau();
  const double dt = f.grid().step();
  const double pi = std::numbers::pi;

  double l2sq = 0.0;
  detail::integrate_merged(tau, {segs}, [&](double t, double w) { l2sq += w * f(t).squaredNorm(); });
  AdjointNormEstimate est;
  if (l2sq == 0.0) return est;

  const bool h1 = f.continuous();
  double edge = 0.0;
  double slope_sq = 0.0;
  Matrix jumps;  // interior jumps of the slope (pl) or of the value (pc), columns k = 1..M-1
  if (h1) {
    edge = f.values().col(0).norm() + f.values().col(segs).norm();
    Matrix slopes(p, segs);
    for (int k = 0; k < segs; ++k) slopes.col(k) = f.c1(k);
    slope_sq = slopes.squaredNorm() * dt;
    jumps = segs > 1 ? Matrix(slopes.leftCols(segs - 1) - slopes.rightCols(segs - 1)) : Matrix(p, 0);
  } else {
    const Matrix& c = f.values();
    jumps = segs > 1 ? Matrix(c.rightCols(segs - 1) - c.leftCols(segs - 1)) : Matrix(p, 0);
  }

  auto tail = [&](double n_terms) {
    const double bessel = l2sq / ((n_terms + 1) * (n_terms + 1));
    if (!h1) return bessel;
    const double ibp = 2.0 * tau * tau / (pi * pi) *
                       ((2.0 / tau) * edge * edge / (3.0 * n_terms * n_terms * n_terms) +
                        slope_sq / std::pow(n_terms + 1, 4));
    return std::min(bessel, ibp);
  };

  // sin / cos of pi r / M for r in [0, 2M) cover every node phase j pi k / M.
  std::vector<double> sin_tab(2 * static_cast<std::size_t>(segs));
  std::vector<double> cos_tab(sin_tab.size());
  for (std::size_t r = 0; r < sin_tab.size(); ++r) {
    sin_tab[r] = std::sin(pi * static_cast<double>(r) / segs);
    cos_tab[r] = std::cos(pi * static_cast<double>(r) / segs);
  }
  const long long period = 2LL * segs;
  const double norm = std::sqrt(2.0 / tau);

  Matrix gtg = Matrix::Zero(p, p);
  Vector row(p);
  int j = 0;
  while (true) {
    const int chunk_end = std::min(max_terms, j + std::max(64, j / 4));
    for (++j; j <= chunk_end; ++j) {
      const double omega = j * pi / tau;
      const double sign = (j % 2 == 0) ? 1.0 : -1.0;
      row.setZero();
      const long long step = j % period;
      long long phase = step;
      if (h1) {
        for (int k = 1; k < segs; ++k, phase = (phase + step) % period) row += sin_tab[phase] * jumps.col(k - 1);
        row = (f.values().col(0) - sign * f.values().col(segs)) / omega + row / (omega * omega);
      } else {
        for (int k = 1; k < segs; ++k, phase = (phase + step) % period) row += cos_tab[phase] * jumps.col(k - 1);
        row = (f.values().col(0) - sign * f.values().col(segs - 1) + row) / omega;
      }
      row *= norm / j;
      gtg.noalias() += row * row.transpose();
    }
    --j;
    const double top = max_eig(gtg);
    est.terms = j;
    est.tail_bound = tail(j);
    est.value = tau / pi * std::sqrt(std::max(top, 0.0));
    if (est.tail_bound <= 2.0 * tol * top) return est;
    if (j >= max_terms) {
      est.converged = false;
      return est;
    }
  }
}

inline double adjoint_norm(const Signal& f, double tol = 1e-6) { return adjoint_norm_estimate(f, tol).value; }

}  // namespace synthctl

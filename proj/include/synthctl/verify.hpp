#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "synthctl/core.hpp"
#include "synthctl/synthesis.hpp"

namespace synthctl {

inline constexpr double kDefaultHurwitzMargin = 1e-9;

struct HurwitzResult {
  bool hurwitz = false;
  double s_max = 0.0;  ///< largest real part of the spectrum
};

/// Spectral abscissa test: s_max < -margin.
inline HurwitzResult is_hurwitz(const Matrix& m, double margin = kDefaultHurwitzMargin) {
  require(m.rows() == m.cols(), "is_hurwitz: matrix must be square");
  require(m.allFinite(), "is_hurwitz: non-finite entries");
  require(margin >= 0.0, "is_hurwitz: margin must be non-negative");
  if (m.size() == 0) return {true, -std::numeric_limits<double>::infinity()};
  Eigen::EigenSolver<Matrix> es(m, false);
  const double s = es.eigenvalues().real().maxCoeff();
  return {s < -margin, s};
}

/// A compatible system (A, B).
struct SystemPair {
  Matrix A;
  Matrix B;
};

inline double default_membership_tol(double c) { return 1e-8 * std::max(1.0, c); }

struct MembershipResult {
  Matrix A;
  Matrix B;
  Matrix R;  ///< (Xi_d - A Xi - B Ups)(Xi_d - A Xi - B Ups)^*
  double lambda_max = 0.0;
  bool member = false;
};

/// R(A,B) for [A B] = theta.
inline Matrix membership_residual(const GramBlocks& gram, const Matrix& theta) {
  const Matrix cross = gram.cross_gram();
  const Matrix r = gram.Gdd - theta * cross.transpose() - cross * theta.transpose() + theta * gram.data_gram() * theta.transpose();
  return symmetrize(r);
}

/// Tests (A, B) against the data-consistency inequality lambda_max(R(A,B)) <= c + tol.
inline MembershipResult membership(const GramBlocks& gram, const Matrix& A, const Matrix& B, double c, double tol) {
  require(A.rows() == gram.n && A.cols() == gram.n, "membership: A has the wrong shape");
  require(B.rows() == gram.n && B.cols() == gram.m, "membership: B has the wrong shape");
  require(c >= 0.0 && tol >= 0.0, "membership: c and tol must be non-negative");
  MembershipResult res;
  res.A = A;
  res.B = B;
  Matrix theta(gram.n, gram.n + gram.m);
  theta << A, B;
  res.R = membership_residual(gram, theta);
  res.lambda_max = max_eig(res.R);
  res.member = res.lambda_max <= c + tol;
  return res;
}

inline MembershipResult membership(const GramBlocks& gram, const Matrix& A, const Matrix& B, double c) {
  return membership(gram, A, B, c, default_membership_tol(c));
}

/// Least-squares center [A B] = [Gdx Gdu] (V V^*)^+.
inline SystemPair least_squares_center(const GramBlocks& gram) {
  const Matrix vv = gram.data_gram();
  Eigen::SelfAdjointEigenSolver<Matrix> es(vv);
  const Vector& lam = es.eigenvalues();
  const double cut = 1e-12 * std::max(lam.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  Vector inv = Vector::Zero(lam.size());
  for (int i = 0; i < lam.size(); ++i) {
    if (lam(i) > cut) inv(i) = 1.0 / lam(i);
  }
  const Matrix pinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  const Matrix theta = gram.cross_gram() * pinv;
  return {theta.leftCols(gram.n), theta.rightCols(gram.m)};
}

struct SampleOptions {
  double tol = -1.0;            ///< membership tolerance; negative selects the default for c
  double bisection_tol = 1e-9;  ///< relative width of the boundary bracket
  double interior_fraction = 0.99;
  double max_step = 1e8;  ///< relative to 1 + ||center||; directions reaching it are treated as unbounded
};

/// Random members of the compatible set: from the least-squares center, walk along random
/// unit directions (Frobenius norm) to the boundary of the set and keep a point just inside.
/// Directions are drawn up front so the result depends only on the seed.
inline std::vector<SystemPair> sample_members(const GramBlocks& gram, double c, int count, std::uint64_t seed,
                                              SampleOptions opts = {}) {
  require(c >= 0.0, "sample_members: c must be non-negative");
  require(count >= 0, "sample_members: count must be non-negative");
  const double tol = opts.tol < 0.0 ? default_membership_tol(c) : opts.tol;
  const int n = gram.n;
  const int cols = gram.n + gram.m;
  const SystemPair center = least_squares_center(gram);
  Matrix c_theta(n, cols);
  c_theta << center.A, center.B;

  auto is_member = [&](const Matrix& theta) { return max_eig(membership_residual(gram, theta)) <= c + tol; };
  if (!is_member(c_theta)) throw NotInformative("compatible set is empty: the least-squares center violates the noise bound");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Matrix> dirs(count, Matrix(n, cols));
  for (auto& d : dirs) {
    for (int i = 0; i < d.size(); ++i) d.data()[i] = normal(rng);
    const double nrm = d.norm();
    if (nrm > 0.0) d /= nrm;
  }

  const double unit = 1.0 + c_theta.norm();
  std::vector<SystemPair> out;
  out.reserve(count);
  for (const auto& d : dirs) {
    double lo = 0.0;
    double hi = 1e-8 * unit;
    while (is_member(c_theta + hi * d) && hi < opts.max_step * unit) {
      lo = hi;
      hi *= 2.0;
    }
    if (is_member(c_theta + hi * d)) {
      lo = hi;
    } else {
      while (hi - lo > opts.bisection_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        (is_member(c_theta + mid * d) ? lo : hi) = mid;
      }
    }
    double step = opts.interior_fraction * lo;
    Matrix theta = c_theta + step * d;
    // Convexity makes every point between the center and a member a member; guard against rounding.
    while (!is_member(theta) && step > 0.0) {
      step *= 0.5;
      theta = c_theta + step * d;
    }
    if (!is_member(theta)) theta = c_theta;
    out.push_back({theta.leftCols(n), theta.rightCols(gram.m)});
  }
  return out;
}

struct GainFailure {
  int index = 0;
  double s_max = 0.0;
  double lyapunov_max = 0.0;  ///< lambda_max((A+BK)P + P(A+BK)^T)
};

struct GainVerification {
  int samples = 0;
  int non_members = 0;  ///< samples outside the compatible set (reported, not counted as failures)
  std::vector<GainFailure> failures;
  double worst_s_max = -std::numeric_limits<double>::infinity();
  double worst_lyapunov = -std::numeric_limits<double>::infinity();
  std::string warning;

  bool passed() const { return failures.empty(); }
};

/// Checks that K stabilizes every sampled system with the common Lyapunov certificate P:
/// s_max(A+BK) < 0 and (A+BK)P + P(A+BK)^T negative definite.
inline GainVerification verify_gain(const GramBlocks& gram, double c, const Matrix& K, const Matrix& P,
                                    const std::vector<SystemPair>& samples, double margin = kDefaultHurwitzMargin) {
  require(P.rows() == P.cols() && P.rows() == gram.n, "verify_gain: P has the wrong shape");
  require(K.rows() == gram.m && K.cols() == gram.n, "verify_gain: K has the wrong shape");
  require(min_eig(P) > 0.0, "verify_gain: P must be positive definite");
  GainVerification rep;
  rep.samples = static_cast<int>(samples.size());
  if (samples.empty()) rep.warning = "no samples: verification is vacuous";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!membership(gram, samples[i].A, samples[i].B, c).member) ++rep.non_members;
    const Matrix cl = samples[i].A + samples[i].B * K;
    const HurwitzResult h = is_hurwitz(cl, margin);
    const double lyap = max_eig(cl * P + P * cl.transpose());
    rep.worst_s_max = std::max(rep.worst_s_max, h.s_max);
    rep.worst_lyapunov = std::max(rep.worst_lyapunov, lyap);
    if (!h.hurwitz || !(lyap < 0.0)) rep.failures.push_back({static_cast<int>(i), h.s_max, lyap});
  }
  return rep;
}

}  // namespace synthctl

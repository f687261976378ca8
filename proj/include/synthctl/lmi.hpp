#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "synthctl/core.hpp"
#include "synthctl/sdp.hpp"
#include "synthctl/synthesis.hpp"
#include "synthctl/verify.hpp"

namespace synthctl {

/// N = [[cI - Gdd, Gdx, Gdu], [Gdx^T, -Gxx, -Gxu], [Gdu^T, -Gxu^T, -Guu]].
inline Matrix assemble_N(const GramBlocks& g, double c) {
  require(c >= 0.0, "c must be non-negative");
  const int n = g.n;
  const int m = g.m;
  Matrix N(2 * n + m, 2 * n + m);
  N.block(0, 0, n, n) = c * Matrix::Identity(n, n) - g.Gdd;
  N.block(0, n, n, n) = g.Gdx;
  N.block(0, 2 * n, n, m) = g.Gdu;
  N.block(n, 0, n, n) = g.Gdx.transpose();
  N.block(n, n, n, n) = -g.Gxx;
  N.block(n, 2 * n, n, m) = -g.Gxu;
  N.block(2 * n, 0, m, n) = g.Gdu.transpose();
  N.block(2 * n, n, m, n) = -g.Gxu.transpose();
  N.block(2 * n, 2 * n, m, m) = -g.Guu;
  return N;
}

struct LmiMargins {
  double eps_P = -1.0;      ///< P >= eps_P I; negative selects 1e-6 max(1, ||Gdd||)
  double eps_block = 0.0;   ///< block >= eps_block I
};

inline double default_eps_P(const GramBlocks& g) { return 1e-6 * std::max(1.0, spectral_norm(g.Gdd)); }

/// The quadratic-stabilization LMI for noise class W W^* <= cI:
///
///   [ aGdd-(ac+1)I   -P-aGdx   -L^T-aGdu ]
///   [     *           aGxx       aGxu    ]  >= 0,   P > 0,   a >= 0,
///   [     *            *         aGuu    ]
///
/// i.e. M(P, L) - a N - diag(I, 0, 0) with M(P, L) carrying -P and -L^T in the first block row.
class NoisyLmi {
 public:
  NoisyLmi(GramBlocks gram, double c, LmiMargins margins = {}) : gram_(std::move(gram)), c_(c), margins_(margins) {
    require(c >= 0.0, "c must be non-negative");
    require(margins_.eps_block >= 0.0, "eps_block must be non-negative");
    if (margins_.eps_P < 0.0) margins_.eps_P = default_eps_P(gram_);
    N_ = assemble_N(gram_, c_);
  }

  int n() const { return gram_.n; }
  int m() const { return gram_.m; }
  int size() const { return 2 * gram_.n + gram_.m; }
  double c() const { return c_; }
  double eps_P() const { return margins_.eps_P; }
  double eps_block() const { return margins_.eps_block; }
  const LmiMargins& margins() const { return margins_; }
  const GramBlocks& gram() const { return gram_; }
  const Matrix& N() const { return N_; }

  /// M(P, L) - alpha N: the part linear in the decision variables.
  Matrix linear_part(const Matrix& P, const Matrix& L, double alpha) const {
    require(P.rows() == n() && P.cols() == n(), "LMI: P has the wrong shape");
    require(L.rows() == m() && L.cols() == n(), "LMI: L has the wrong shape");
    Matrix out = -alpha * N_;
    out.block(0, n(), n(), n()) -= P;
    out.block(n(), 0, n(), n()) -= P.transpose();
    out.block(0, 2 * n(), n(), m()) -= L.transpose();
    out.block(2 * n(), 0, m(), n()) -= L;
    return out;
  }

  /// The block matrix of the LMI (margins not subtracted).
  Matrix assemble(const Matrix& P, const Matrix& L, double alpha) const {
    Matrix out = linear_part(P, L, alpha);
    out.topLeftCorner(n(), n()) -= Matrix::Identity(n(), n());
    return out;
  }

 private:
  GramBlocks gram_;
  double c_;
  LmiMargins margins_;
  Matrix N_;
};

namespace detail {

inline Matrix sym_unit(int size, int r, int c, double v = 1.0) {
  Matrix e = Matrix::Zero(size, size);
  e(r, c) = v;
  e(c, r) = v;
  return e;
}

/// Decision-variable slots of P (upper triangle), L and alpha inside an SdpProblem.
struct LmiSlots {
  int n = 0;
  int m = 0;
  std::vector<int> p;  ///< index of P(i,j), i <= j, row-major over the upper triangle
  std::vector<int> l;  ///< index of L(k,j), row-major
  int alpha = -1;

  int P(int i, int j) const {
    if (i > j) std::swap(i, j);
    return p[i * n - i * (i - 1) / 2 + (j - i)];
  }

  static LmiSlots add_to(SdpProblem& prob, int n, int m) {
    LmiSlots s;
    s.n = n;
    s.m = m;
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) s.p.push_back(prob.add_variable("P[" + std::to_string(i) + "," + std::to_string(j) + "]"));
    }
    for (int k = 0; k < m; ++k) {
      for (int j = 0; j < n; ++j) s.l.push_back(prob.add_variable("L[" + std::to_string(k) + "," + std::to_string(j) + "]"));
    }
    s.alpha = prob.add_variable("alpha");
    return s;
  }

  /// Adds M(P, L) - alpha N to `block`.
  void add_linear_part(SdpProblem& prob, int block, const NoisyLmi& lmi) const {
    const int size = lmi.size();
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        Matrix e = sym_unit(size, i, n + j, -1.0);
        if (i != j) e += sym_unit(size, j, n + i, -1.0);
        prob.add_term(P(i, j), block, e);
      }
    }
    for (int k = 0; k < m; ++k) {
      for (int j = 0; j < n; ++j) prob.add_term(l[k * n + j], block, sym_unit(size, j, 2 * n + k, -1.0));
    }
    prob.add_term(alpha, block, -lmi.N());
  }

  /// Adds P (as a matrix-valued term) to an n x n block.
  void add_P(SdpProblem& prob, int block) const {
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) prob.add_term(P(i, j), block, sym_unit(n, i, j));
    }
  }

  Matrix P_of(const Vector& y) const {
    Matrix out(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) out(i, j) = y(P(i, j));
    }
    return out;
  }

  Matrix L_of(const Vector& y) const {
    Matrix out(m, n);
    for (int k = 0; k < m; ++k) {
      for (int j = 0; j < n; ++j) out(k, j) = y(l[k * n + j]);
    }
    return out;
  }
};

inline Matrix one(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace detail

struct LmiSolution {
  Matrix P;
  Matrix L;
  double alpha = 0.0;
  double min_eig_block = 0.0;  ///< lambda_min of the assembled block matrix
  double min_eig_P = 0.0;
  double eps_P = 0.0;
  std::string solver_status;
  int iterations = 0;

  Matrix K() const { return L * P.inverse(); }
};

enum class LmiVerdict { kFeasible, kInfeasible, kUnknown };

inline std::string to_string(LmiVerdict v) {
  switch (v) {
    case LmiVerdict::kFeasible: return "feasible";
    case LmiVerdict::kInfeasible: return "infeasible";
    default: return "unknown";
  }
}

struct FeasibilityResult {
  LmiVerdict verdict = LmiVerdict::kUnknown;
  std::optional<LmiSolution> solution;
  double beta = 0.0;        ///< achieved homogenization margin
  double beta_upper = 0.0;  ///< solver's upper bound on the best margin
  bool marginal = false;    ///< solved, but the optimal margin is within tolerance of zero
  std::string message;
};

inline constexpr double kBetaTol = 1e-9;
inline constexpr double kMarginalTol = 1e-6;

/// Checks the invariants every returned solution must satisfy.
inline bool sound(const NoisyLmi& lmi, LmiSolution& sol, std::string* why = nullptr) {
  const Matrix blk = lmi.assemble(sol.P, sol.L, sol.alpha);
  sol.min_eig_block = min_eig(blk);
  sol.min_eig_P = min_eig(sol.P);
  sol.eps_P = lmi.eps_P();
  const double scale = tolerance_scale(blk);
  if (!(sol.alpha >= 0.0)) {
    if (why) *why = "negative multiplier";
    return false;
  }
  if (!(sol.min_eig_P >= lmi.eps_P())) {
    if (why) *why = "P margin violated";
    return false;
  }
  if (!(sol.min_eig_block >= lmi.eps_block() - 1e-8 * scale)) {
    if (why) *why = "block matrix not positive semidefinite";
    return false;
  }
  return true;
}

/// Feasibility of the LMI, decided through the homogenized problem
///
///   maximize  beta
///   s.t.      M(P, L) - alpha N - beta (diag(I,0,0) + eps_block I) >= 0,
///             P >= 2 eps_P beta I,   alpha >= 0,   tr P + alpha <= 1,   beta >= -1.
///
/// A positive optimum rescales to a solution (P, L, alpha) / beta of the original LMI; an
/// optimum bounded by zero certifies infeasibility. The normalization keeps the problem bounded
/// so the solver always returns a verdict with a dual bound.
inline FeasibilityResult solve_feasibility(const NoisyLmi& lmi, SdpBackend& backend) {
  const int n = lmi.n();
  const int m = lmi.m();
  SdpProblem prob;
  const int big = prob.add_block(lmi.size());
  const int pblk = prob.add_block(n);
  const int alpha_blk = prob.add_block(1);
  const int norm_blk = prob.add_block(1);
  const int floor_blk = prob.add_block(1);
  const auto slots = detail::LmiSlots::add_to(prob, n, m);
  const int beta = prob.add_variable("beta");
  prob.objective(beta) = -1.0;

  slots.add_linear_part(prob, big, lmi);
  Matrix e11 = Matrix::Zero(lmi.size(), lmi.size());
  e11.topLeftCorner(n, n).setIdentity();
  prob.add_term(beta, big, -e11 - lmi.eps_block() * Matrix::Identity(lmi.size(), lmi.size()));

  slots.add_P(prob, pblk);
  prob.add_term(beta, pblk, -2.0 * lmi.eps_P() * Matrix::Identity(n, n));

  prob.add_term(slots.alpha, alpha_blk, detail::one(1.0));

  prob.constant[norm_blk] = detail::one(1.0);
  prob.add_term(slots.alpha, norm_blk, detail::one(-1.0));
  for (int i = 0; i < n; ++i) prob.add_term(slots.P(i, i), norm_blk, detail::one(-1.0));

  prob.constant[floor_blk] = detail::one(1.0);
  prob.add_term(beta, floor_blk, detail::one(1.0));

  const SdpSolution sdp = backend.solve(prob);
  FeasibilityResult res;
  res.beta = sdp.y.size() ? sdp.y(beta) : 0.0;
  res.beta_upper = -sdp.dual_bound;
  res.message = sdp.message;

  if (sdp.status == SdpStatus::kInfeasible) {
    // The homogenized problem always admits zero; a certificate here means a broken backend.
    res.verdict = LmiVerdict::kUnknown;
    res.message = "backend reported an infeasible homogenized problem: " + sdp.message;
    return res;
  }
  if (sdp.status == SdpStatus::kOptimal && res.beta > kBetaTol) {
    LmiSolution sol;
    sol.P = symmetrize(slots.P_of(sdp.y) / res.beta);
    sol.L = slots.L_of(sdp.y) / res.beta;
    sol.alpha = std::max(0.0, sdp.y(slots.alpha) / res.beta);
    sol.solver_status = to_string(sdp.status);
    sol.iterations = sdp.iterations;
    std::string why;
    if (sound(lmi, sol, &why)) {
      res.verdict = LmiVerdict::kFeasible;
      res.solution = sol;
    } else {
      res.verdict = LmiVerdict::kUnknown;
      res.message = "recovered solution failed verification: " + why;
    }
    return res;
  }
  if (sdp.status == SdpStatus::kOptimal && res.beta_upper <= kBetaTol) {
    res.verdict = LmiVerdict::kInfeasible;
    return res;
  }
  res.verdict = LmiVerdict::kUnknown;
  // An unconverged solve whose bounds both sit at zero (to kMarginalTol) is the same boundary case.
  const bool collapsed = res.beta <= kBetaTol && std::abs(res.beta_upper) <= kMarginalTol;
  if (sdp.status == SdpStatus::kOptimal || collapsed) {
    res.marginal = true;
    res.message = "margin indistinguishable from zero";
  }
  return res;
}

struct VerifyRequest {
  int samples = 0;  ///< 0 disables verification
  std::uint64_t seed = 0;
};

struct SynthesisReport {
  bool feasible = false;
  double c = 0.0;
  std::optional<LmiSolution> solution;
  Matrix K;
  bool regularized = false;
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double delta_max = std::numeric_limits<double>::quiet_NaN();
  std::optional<GainVerification> verification;
  std::string backend;
  std::string message;
};

namespace detail {

inline void attach_verification(SynthesisReport& rep, const GramBlocks& gram, const VerifyRequest& req) {
  if (!rep.feasible || req.samples <= 0) return;
  const auto samples = sample_members(gram, rep.c, req.samples, req.seed);
  rep.verification = verify_gain(gram, rep.c, rep.K, rep.solution->P, samples);
}

inline SynthesisReport from_feasibility(const FeasibilityResult& fr, double c, const SdpBackend& backend) {
  if (fr.verdict == LmiVerdict::kUnknown) throw SolverFailure("LMI solver could not reach a verdict: " + fr.message);
  SynthesisReport rep;
  rep.c = c;
  rep.backend = backend.name();
  rep.message = fr.message;
  rep.feasible = fr.verdict == LmiVerdict::kFeasible;
  if (rep.feasible) {
    rep.solution = fr.solution;
    rep.K = fr.solution->K();
  }
  return rep;
}

}  // namespace detail

/// K = L P^{-1} from any feasible point of the LMI.
inline SynthesisReport synthesize_gain(const GramBlocks& gram, double c, SdpBackend& backend, LmiMargins margins = {},
                                       VerifyRequest verify = {}) {
  const NoisyLmi lmi(gram, c, margins);
  SynthesisReport rep = detail::from_feasibility(solve_feasibility(lmi, backend), c, backend);
  detail::attach_verification(rep, gram, verify);
  return rep;
}

/// Feasibility first, then: minimize gamma - lambda delta subject to the LMI,
/// [[gamma I, L], [L^T, gamma I]] >= 0 (so ||L|| <= gamma), P >= delta I and eps_P <= delta <= delta_max.
inline SynthesisReport synthesize_gain_regularized(const GramBlocks& gram, double c, double lambda, double delta_max,
                                                   SdpBackend& backend, LmiMargins margins = {},
                                                   VerifyRequest verify = {}) {
  require(lambda >= 0.0, "lambda must be non-negative");
  require(delta_max > 0.0, "delta_max must be positive");
  const NoisyLmi lmi(gram, c, margins);
  require(delta_max > lmi.eps_P(), "delta_max must exceed the P margin");
  const FeasibilityResult fr = solve_feasibility(lmi, backend);
  SynthesisReport rep = detail::from_feasibility(fr, c, backend);
  rep.regularized = true;
  rep.lambda = lambda;
  rep.delta_max = delta_max;
  if (!rep.feasible) return rep;

  // Variables are expressed in units of s = delta_max so that the iterates stay O(1).
  const double s = delta_max;
  const int n = lmi.n();
  const int m = lmi.m();
  SdpProblem prob;
  const int big = prob.add_block(lmi.size());
  const int pblk = prob.add_block(n);
  const int lblk = prob.add_block(n + m);
  const int alpha_blk = prob.add_block(1);
  const int dlo_blk = prob.add_block(1);
  const int dhi_blk = prob.add_block(1);
  const auto slots = detail::LmiSlots::add_to(prob, n, m);
  const int gamma = prob.add_variable("gamma");
  const int delta = prob.add_variable("delta");
  prob.objective(gamma) = 1.0;
  prob.objective(delta) = -lambda;

  slots.add_linear_part(prob, big, lmi);
  prob.constant[big].topLeftCorner(n, n) = -Matrix::Identity(n, n) / s;
  prob.constant[big] -= lmi.eps_block() / s * Matrix::Identity(lmi.size(), lmi.size());

  slots.add_P(prob, pblk);
  prob.add_term(delta, pblk, -Matrix::Identity(n, n));

  prob.add_term(gamma, lblk, Matrix::Identity(n + m, n + m));
  for (int k = 0; k < m; ++k) {
    for (int j = 0; j < n; ++j) prob.add_term(slots.l[k * n + j], lblk, detail::sym_unit(n + m, k, m + j));
  }

  prob.add_term(slots.alpha, alpha_blk, detail::one(1.0));
  prob.constant[dlo_blk] = detail::one(-lmi.eps_P() / s);
  prob.add_term(delta, dlo_blk, detail::one(1.0));
  prob.constant[dhi_blk] = detail::one(1.0);
  prob.add_term(delta, dhi_blk, detail::one(-1.0));

  const SdpSolution sdp = backend.solve(prob);
  if (sdp.status != SdpStatus::kOptimal) {
    throw SolverFailure("regularized synthesis did not converge: " + sdp.message);
  }
  LmiSolution sol;
  sol.P = symmetrize(s * slots.P_of(sdp.y));
  sol.L = s * slots.L_of(sdp.y);
  sol.alpha = std::max(0.0, s * sdp.y(slots.alpha));
  sol.solver_status = to_string(sdp.status);
  sol.iterations = sdp.iterations;
  std::string why;
  if (!sound(lmi, sol, &why)) throw SolverFailure("regularized solution failed verification: " + why);
  rep.solution = sol;
  rep.K = sol.K();
  rep.gamma = s * sdp.y(gamma);
  rep.delta = s * sdp.y(delta);
  rep.message = sdp.message;
  detail::attach_verification(rep, gram, verify);
  return rep;
}

/// Largest c (to within tol_c) at which the LMI is feasible; none if infeasible at c = 0.
inline std::optional<double> max_informative_c(const GramBlocks& gram, double tol_c, SdpBackend& backend,
                                               LmiMargins margins = {}) {
  require(tol_c > 0.0, "tol_c must be positive");
  auto feasible = [&](double c) {
    const FeasibilityResult fr = solve_feasibility(NoisyLmi(gram, c, margins), backend);
    // A margin within solver resolution of zero puts c at the threshold; only certified
    // feasibility moves the lower end of the bracket.
    if (fr.verdict == LmiVerdict::kUnknown && !fr.marginal) {
      throw SolverFailure("LMI solver could not reach a verdict at c = " + detail::format_double(c) + ": " + fr.message);
    }
    return fr.verdict == LmiVerdict::kFeasible;
  };
  if (!feasible(0.0)) return std::nullopt;
  double lo = 0.0;
  double hi = std::max(spectral_norm(gram.Gdd), tol_c);
  for (int k = 0; k < 60 && feasible(hi); ++k) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > tol_c) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace synthctl

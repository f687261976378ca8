#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "synthctl/core.hpp"
#include "synthctl/lmi.hpp"
#include "synthctl/sdp.hpp"
#include "synthctl/signals.hpp"
#include "synthctl/synthesis.hpp"
#include "synthctl/verify.hpp"

namespace synthctl {

inline constexpr double kDefaultRankTol = 1e-9;
inline constexpr int kDefaultEllMax = 10;

struct RankCertificate {
  std::string tested;  ///< "gram" or "hat-<level>"
  Vector singular_values;
  double threshold = 0.0;
  int required_rank = 0;
  int rank = 0;
  bool verdict = false;

  /// sigma_min / sigma_max, 0 for empty or zero data.
  double margin() const {
    if (singular_values.size() == 0 || singular_values.maxCoeff() <= 0.0) return 0.0;
    return singular_values.minCoeff() / singular_values.maxCoeff();
  }
};

namespace detail {

inline RankCertificate rank_certificate(std::string tested, Vector sv, int required, double rank_tol) {
  require(rank_tol >= 0.0, "rank tolerance must be non-negative");
  RankCertificate rc;
  rc.tested = std::move(tested);
  rc.required_rank = required;
  const double top = sv.size() ? sv.maxCoeff() : 0.0;
  rc.threshold = rank_tol * top;
  rc.rank = static_cast<int>((sv.array() > rc.threshold).count());
  rc.singular_values = std::move(sv);
  rc.verdict = rc.rank == required;
  return rc;
}

}  // namespace detail

/// Full range of [Xi; Upsilon]: V V^* positive definite relative to rank_tol.
inline RankCertificate check_identification(const GramBlocks& gram, double rank_tol = kDefaultRankTol) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram.data_gram(), Eigen::EigenvaluesOnly);
  // Descending, clipped at zero: V V^* is PSD, tiny negatives are rounding.
  Vector ev = es.eigenvalues().reverse().cwiseMax(0.0);
  return detail::rank_certificate("gram", std::move(ev), gram.n + gram.m, rank_tol);
}

/// Full row rank of [Phi_l; Psi_l] at hat level `level`.
inline RankCertificate check_identification_hat(const HatMatrices& hm, double rank_tol = kDefaultRankTol) {
  const int rows = static_cast<int>(hm.Phi.rows() + hm.Psi.rows());
  Matrix stacked(rows, hm.Phi.cols());
  stacked << hm.Phi, hm.Psi;
  Eigen::JacobiSVD<Matrix> svd(stacked);
  Vector sv = Vector::Zero(rows);
  sv.head(svd.singularValues().size()) = svd.singularValues();
  return detail::rank_certificate("hat-" + std::to_string(hm.level), std::move(sv), rows, rank_tol);
}

inline RankCertificate check_identification_hat(const Trajectory& traj, int level, double rank_tol = kDefaultRankTol) {
  return check_identification_hat(hat_matrices(traj, level), rank_tol);
}

/// The unique compatible system [A B] = [Gdx Gdu] (V V^*)^{-1}.
inline SystemPair identify(const GramBlocks& gram, double rank_tol = kDefaultRankTol) {
  if (!check_identification(gram, rank_tol).verdict) throw NotInformative("not informative for identification");
  const Matrix theta = gram.data_gram().ldlt().solve(gram.cross_gram().transpose()).transpose();
  return {theta.leftCols(gram.n), theta.rightCols(gram.m)};
}

struct StabilizationCheck {
  bool verdict = false;
  std::optional<Matrix> K;
  SynthesisReport report;
};

/// Informativity for stabilization from noiseless data: the c = 0 instance of the noisy LMI.
inline StabilizationCheck check_stabilization_noiseless(const GramBlocks& gram, SdpBackend& backend, LmiMargins margins = {}) {
  StabilizationCheck out;
  out.report = synthesize_gain(gram, 0.0, backend, margins);
  out.verdict = out.report.feasible;
  if (out.verdict) out.K = out.report.K;
  return out;
}

struct HatGain {
  LmiVerdict verdict = LmiVerdict::kUnknown;
  int level = 0;
  Matrix Theta;        ///< (2^l - 1) x n
  Matrix P;            ///< Phi_l Theta, symmetric positive definite
  Matrix K;            ///< Psi_l Theta P^{-1}
  Matrix closed_loop;  ///< Phi_{d,l} Theta P^{-1}
  double s_max = 0.0;
  double beta = 0.0;
  std::string message;
};

/// Searches Theta with Phi_l Theta = P symmetric positive definite and
/// Phi_{d,l} Theta + (Phi_{d,l} Theta)^T negative definite; then K = Psi_l Theta P^{-1}.
///
/// Theta = Phi^+ P + N Z with N spanning ker Phi. Only Phi_d N Z enters the Lyapunov block, so
/// Z is replaced by coordinates W in an orthonormal basis Q of ran(Phi_d N):
///
///   maximize beta  s.t.  P - beta I >= 0,  -(Y + Y^T) - beta I >= 0,  tr P <= 1,  beta <= 1,
///                        ||W|| <= 100 (1 + ||Phi_d Phi^+||),
///
/// where Y = Phi_d Phi^+ P + Q W. The cap on W keeps the optimal face bounded.
inline HatGain design_gain_hat(const HatMatrices& hm, SdpBackend& backend, double rank_tol = kDefaultRankTol) {
  const int n = static_cast<int>(hm.Phi.rows());
  const int cols = static_cast<int>(hm.Phi.cols());
  HatGain out;
  out.level = hm.level;

  Eigen::JacobiSVD<Matrix> svd(hm.Phi, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double top = sv.size() ? sv.maxCoeff() : 0.0;
  const int rank = static_cast<int>((sv.array() > rank_tol * top).count());
  if (n == 0 || top <= 0.0 || rank < n) {
    out.verdict = LmiVerdict::kInfeasible;
    out.message = "Phi has no right inverse at this level";
    return out;
  }
  const Matrix pinv = svd.matrixV().leftCols(n) * sv.head(n).cwiseInverse().asDiagonal() * svd.matrixU().transpose();
  const Matrix null_basis = svd.matrixV().rightCols(cols - n);
  const Matrix G = hm.PhiD * pinv;  // Y = G P + Phi_d N Z
  const Matrix DN = hm.PhiD * null_basis;

  Matrix Q(n, 0);
  Matrix DN_pinv;
  if (DN.cols() > 0) {
    Eigen::JacobiSVD<Matrix> s2(DN, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = s2.singularValues();
    const double s_top = s.size() ? s.maxCoeff() : 0.0;
    const int q = s_top > 0.0 ? static_cast<int>((s.array() > rank_tol * s_top).count()) : 0;
    Q = s2.matrixU().leftCols(q);
    DN_pinv = s2.matrixV().leftCols(q) * s.head(q).cwiseInverse().asDiagonal() * s2.matrixU().leftCols(q).transpose();
  }
  const int q = static_cast<int>(Q.cols());

  SdpProblem prob;
  const int p_blk = prob.add_block(n);
  const int lyap_blk = prob.add_block(n);
  const int norm_blk = prob.add_block(1);
  const int cap_blk = prob.add_block(1);
  const int w_blk = q > 0 ? prob.add_block(q + n) : -1;
  const double w_cap = 1e2 * (1.0 + spectral_norm(G));

  const Matrix I = Matrix::Identity(n, n);
  std::vector<std::vector<int>> p_slot(n, std::vector<int>(n, -1));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) {
      const int v = prob.add_variable("P[" + std::to_string(i) + "," + std::to_string(j) + "]");
      p_slot[i][j] = p_slot[j][i] = v;
      const Matrix E = detail::sym_unit(n, i, j);
      prob.add_term(v, p_blk, E);
      prob.add_term(v, lyap_blk, -(G * E + (G * E).transpose()));
      if (i == j) prob.add_term(v, norm_blk, detail::one(-1.0));
    }
  }
  std::vector<int> w_slot(static_cast<std::size_t>(q) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < q; ++i) {
      const int v = prob.add_variable("W[" + std::to_string(i) + "," + std::to_string(j) + "]");
      w_slot[static_cast<std::size_t>(j) * q + i] = v;
      const Matrix QE = Q.col(i) * I.row(j);
      prob.add_term(v, lyap_blk, -(QE + QE.transpose()));
      prob.add_term(v, w_blk, detail::sym_unit(q + n, i, q + j));
    }
  }
  const int beta = prob.add_variable("beta");
  prob.add_term(beta, p_blk, -I);
  prob.add_term(beta, lyap_blk, -I);
  prob.constant[norm_blk] = detail::one(1.0);
  prob.constant[cap_blk] = detail::one(1.0);
  prob.add_term(beta, cap_blk, detail::one(-1.0));
  if (q > 0) prob.constant[w_blk] = w_cap * Matrix::Identity(q + n, q + n);
  prob.objective(beta) = -1.0;

  const SdpSolution sdp = backend.solve(prob);
  out.message = sdp.message;
  out.beta = sdp.y.size() ? sdp.y(beta) : 0.0;
  if (sdp.status == SdpStatus::kOptimal && out.beta > kBetaTol) {
    Matrix P(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) P(i, j) = sdp.y(p_slot[i][j]);
    }
    Matrix W = Matrix::Zero(q, n);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < q; ++i) W(i, j) = sdp.y(w_slot[static_cast<std::size_t>(j) * q + i]);
    }
    Matrix theta = pinv * P;
    if (q > 0) theta += null_basis * (DN_pinv * (Q * W));
    out.Theta = theta;
    out.P = symmetrize(hm.Phi * theta);
    const Eigen::LDLT<Matrix> Pf(out.P);
    out.K = Pf.solve((hm.Psi * theta).transpose()).transpose();
    out.closed_loop = Pf.solve((hm.PhiD * theta).transpose()).transpose();
    out.s_max = is_hurwitz(out.closed_loop).s_max;
    const double lyap = max_eig(hm.PhiD * theta + (hm.PhiD * theta).transpose());
    if (min_eig(out.P) > 0.0 && lyap < 0.0) {
      out.verdict = LmiVerdict::kFeasible;
    } else {
      out.verdict = LmiVerdict::kUnknown;
      out.message = "recovered right inverse failed verification";
    }
    return out;
  }
  if (sdp.status == SdpStatus::kOptimal && -sdp.dual_bound <= kBetaTol) {
    out.verdict = LmiVerdict::kInfeasible;
    return out;
  }
  out.verdict = LmiVerdict::kUnknown;
  return out;
}

inline HatGain design_gain_hat(const Trajectory& traj, int level, SdpBackend& backend, double rank_tol = kDefaultRankTol) {
  return design_gain_hat(hat_matrices(traj, level), backend, rank_tol);
}

enum class HatPredicate { kIdentification, kStabilization };

/// Smallest level in 1..ell_max whose hat-route check passes; none means inconclusive.
inline std::optional<int> ell_search(const Trajectory& traj, HatPredicate predicate, SdpBackend& backend,
                                     int ell_max = kDefaultEllMax, double rank_tol = kDefaultRankTol) {
  require(ell_max >= 1, "ell_max must be at least 1");
  for (int level = 1; level <= ell_max; ++level) {
    const HatMatrices hm = hat_matrices(traj, level);
    if (predicate == HatPredicate::kIdentification) {
      if (check_identification_hat(hm, rank_tol).verdict) return level;
    } else {
      const HatGain hg = design_gain_hat(hm, backend, rank_tol);
      if (hg.verdict == LmiVerdict::kFeasible) return level;
    }
  }
  return std::nullopt;
}

}  // namespace synthctl

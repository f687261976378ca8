#pragma once

#include <cstdio>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "synthctl/core.hpp"

namespace synthctl {

// ============================================================================
// Semidefinite programs in LMI form
// ============================================================================
//
//   minimize    c^T y
//   subject to  F_0^b + sum_i y_i F_i^b  >= 0   for every block b
//
// Linear inequalities are 1 x 1 blocks.

struct SdpTerm {
  int block = 0;
  Matrix coeff;  ///< symmetric, block_sizes[block] square
};

struct SdpProblem {
  std::vector<int> block_sizes;
  std::vector<Matrix> constant;                ///< F_0 per block
  std::vector<std::vector<SdpTerm>> variables;  ///< F_i terms per variable
  Vector objective;                             ///< c
  std::vector<std::string> names;               ///< variable slot labels, e.g. "P[0,1]"

  int num_variables() const { return static_cast<int>(variables.size()); }
  int num_blocks() const { return static_cast<int>(block_sizes.size()); }

  int add_block(int size) {
    block_sizes.push_back(size);
    constant.push_back(Matrix::Zero(size, size));
    return num_blocks() - 1;
  }

  int add_variable(std::string name = {}) {
    variables.emplace_back();
    names.push_back(std::move(name));
    objective.conservativeResize(num_variables());
    objective(num_variables() - 1) = 0.0;
    return num_variables() - 1;
  }

  /// Adds coeff (symmetrized) to the F_var term on `block`.
  void add_term(int var, int block, const Matrix& coeff) {
    for (auto& t : variables[var]) {
      if (t.block == block) {
        t.coeff += symmetrize(coeff);
        return;
      }
    }
    variables[var].push_back({block, symmetrize(coeff)});
  }

  std::vector<Matrix> evaluate(const Vector& y) const {
    std::vector<Matrix> out = constant;
    for (int i = 0; i < num_variables(); ++i) {
      for (const auto& t : variables[i]) out[t.block] += y(i) * t.coeff;
    }
    return out;
  }

  /// Smallest eigenvalue of F(y) over all blocks.
  double min_eigenvalue(const Vector& y) const {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& b : evaluate(y)) lo = std::min(lo, min_eig(b));
    return lo;
  }

  void validate() const {
    require(constant.size() == block_sizes.size(), "sdp: constant blocks do not match block sizes");
    require(objective.size() == num_variables(), "sdp: objective length does not match variable count");
    require(names.empty() || static_cast<int>(names.size()) == num_variables(), "sdp: variable names do not match variable count");
    for (int b = 0; b < num_blocks(); ++b) {
      require(block_sizes[b] >= 1, "sdp: empty block");
      require(constant[b].rows() == block_sizes[b] && constant[b].cols() == block_sizes[b], "sdp: constant block has wrong shape");
    }
    for (const auto& terms : variables) {
      for (const auto& t : terms) {
        require(t.block >= 0 && t.block < num_blocks(), "sdp: term refers to a missing block");
        require(t.coeff.rows() == block_sizes[t.block] && t.coeff.cols() == block_sizes[t.block], "sdp: term has wrong shape");
        require(t.coeff.allFinite(), "sdp: non-finite coefficient");
      }
    }
  }
};

enum class SdpStatus { kOptimal, kInfeasible, kUnknown };

inline std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::kOptimal: return "optimal";
    case SdpStatus::kInfeasible: return "infeasible";
    default: return "unknown";
  }
}

inline SdpStatus sdp_status_from_string(const std::string& s) {
  if (s == "optimal") return SdpStatus::kOptimal;
  if (s == "infeasible") return SdpStatus::kInfeasible;
  if (s == "unknown") return SdpStatus::kUnknown;
  throw InputError("unknown solver status '" + s + "'");
}

struct SdpSolution {
  SdpStatus status = SdpStatus::kUnknown;
  Vector y;
  double objective = 0.0;   ///< c^T y
  double dual_bound = -std::numeric_limits<double>::infinity();  ///< lower bound on the optimal c^T y
  int iterations = 0;
  std::string message;
};

/// Solver contract: a backend instance is used by one thread at a time.
class SdpBackend {
 public:
  virtual ~SdpBackend() = default;
  virtual SdpSolution solve(const SdpProblem& problem) = 0;
  virtual std::string name() const = 0;
};

struct IpmOptions {
  int max_iterations = 120;
  double gap_tol = 1e-10;
  double feas_tol = 1e-10;
  double accept_tol = 1e-7;  ///< accuracy accepted when progress stalls
  bool trace = false;        ///< per-iteration log on stderr
  double step_fraction = 0.98;
};

/// Infeasible-start primal-dual path-following method (HKM direction, Mehrotra
/// predictor-corrector) for dense block-diagonal problems.
class InteriorPointBackend : public SdpBackend {
 public:
  explicit InteriorPointBackend(IpmOptions opts = {}) : opts_(opts) {}

  std::string name() const override { return "ipm"; }

  SdpSolution solve(const SdpProblem& prob) override {
    prob.validate();
    const int nv = prob.num_variables();
    const int nb = prob.num_blocks();
    const Vector& c = prob.objective;

    // Variables touching each block, and their coefficient matrices.
    std::vector<std::vector<std::pair<int, const Matrix*>>> touching(nb);
    for (int i = 0; i < nv; ++i) {
      for (const auto& t : prob.variables[i]) touching[t.block].emplace_back(i, &t.coeff);
    }

    int dim_total = 0;
    double f0_norm = 0.0;
    double f_max = 0.0;
    for (int b = 0; b < nb; ++b) {
      dim_total += prob.block_sizes[b];
      f0_norm = std::max(f0_norm, prob.constant[b].norm());
    }
    double xi = 10.0;
    for (int i = 0; i < nv; ++i) {
      double fn = 0.0;
      for (const auto& t : prob.variables[i]) fn += t.coeff.norm();
      f_max = std::max(f_max, fn);
      xi = std::max(xi, (1.0 + std::abs(c(i))) / (1.0 + fn) * std::sqrt(static_cast<double>(dim_total)));
    }
    const double eta = std::max({10.0, f0_norm, f_max});

    std::vector<Matrix> X(nb);
    std::vector<Matrix> Z(nb);
    for (int b = 0; b < nb; ++b) {
      X[b] = xi * Matrix::Identity(prob.block_sizes[b], prob.block_sizes[b]);
      Z[b] = eta * Matrix::Identity(prob.block_sizes[b], prob.block_sizes[b]);
    }
    Vector y = Vector::Zero(nv);
    SdpSolution sol;
    sol.y = y;

    auto inner = [](const Matrix& a, const Matrix& b) { return a.cwiseProduct(b).sum(); };
    auto primal_residual = [&](const std::vector<Matrix>& x) {
      Vector r = c;
      for (int i = 0; i < nv; ++i) {
        for (const auto& t : prob.variables[i]) r(i) -= inner(t.coeff, x[t.block]);
      }
      return r;
    };

    const double c_norm = c.norm();
    double best_score = std::numeric_limits<double>::infinity();
    SdpSolution best = sol;
    int stalled = 0;
    // Falls back to the most accurate iterate seen when progress stops.
    auto finish_best = [&](const std::string& why) {
      SdpSolution out = best;
      out.iterations = sol.iterations;
      if (best_score < opts_.accept_tol) {
        out.status = SdpStatus::kOptimal;
        out.message = why + "; returning the best iterate at reduced accuracy";
      } else {
        out.status = SdpStatus::kUnknown;
        out.message = why;
      }
      return out;
    };
    for (int iter = 0; iter < opts_.max_iterations; ++iter) {
      sol.iterations = iter;
      const auto fy = prob.evaluate(y);
      std::vector<Matrix> Rd(nb);
      double rd_norm = 0.0;
      double xz = 0.0;
      double pobj = 0.0;
      double x_trace = 0.0;
      for (int b = 0; b < nb; ++b) {
        Rd[b] = fy[b] - Z[b];
        rd_norm += Rd[b].squaredNorm();
        xz += inner(X[b], Z[b]);
        pobj += inner(prob.constant[b], X[b]);
        x_trace += X[b].trace();
      }
      rd_norm = std::sqrt(rd_norm);
      const Vector rp = primal_residual(X);
      const double mu = xz / dim_total;
      const double dobj = c.dot(y);
      const double pinf = rp.norm() / (1.0 + c_norm);
      const double dinf = rd_norm / (1.0 + f0_norm);
      const double gap = std::abs(dobj + pobj) / (1.0 + std::abs(dobj) + std::abs(pobj));
      const double comp = xz / (1.0 + std::abs(dobj) + std::abs(pobj));

      sol.y = y;
      sol.objective = dobj;
      sol.dual_bound = -pobj;
      const double score = std::max({pinf, dinf, gap, comp});
      if (opts_.trace) {
        std::fprintf(stderr, "%3d obj %+.9e bound %+.9e pinf %.1e dinf %.1e gap %.1e comp %.1e\n", iter, dobj, -pobj, pinf,
                     dinf, gap, comp);
      }
      if (score < 0.5 * best_score) stalled = 0;
      else ++stalled;
      if (score < best_score) {
        best_score = score;
        best = sol;
      }
      if (pinf < opts_.feas_tol && dinf < opts_.feas_tol && gap < opts_.gap_tol && comp < opts_.gap_tol) {
        sol.status = SdpStatus::kOptimal;
        sol.message = "converged";
        return sol;
      }
      if (stalled >= 8 && best_score < opts_.accept_tol) return finish_best("stalled");

      // Certificate of infeasibility of the LMI: X >= 0 with <F_i, X> = 0 and <F_0, X> < 0.
      if (x_trace > 0.0) {
        Vector ax = c - rp;  // <F_i, X>
        const double ax_rel = ax.norm() / x_trace;
        const double f0x = pobj / x_trace;
        if (ax_rel < 1e-9 * (1.0 + f_max) && f0x < -1e-8 * (1.0 + f0_norm) && x_trace > 1e6 * xi) {
          sol.status = SdpStatus::kInfeasible;
          sol.message = "primal ray certifies LMI infeasibility";
          return sol;
        }
      }
      if (!y.allFinite() || y.norm() > 1e14) {
        sol.status = SdpStatus::kUnknown;
        sol.message = "iterates diverged (objective may be unbounded)";
        return sol;
      }

      // Factorizations X = Lx Lx^T, Z = Lz Lz^T.
      std::vector<Matrix> Zinv(nb);
      std::vector<Matrix> Lx(nb);
      std::vector<Matrix> Lz(nb);
      bool ok = true;
      for (int b = 0; b < nb && ok; ++b) {
        Eigen::LLT<Matrix> lz(Z[b]);
        Eigen::LLT<Matrix> lx(X[b]);
        ok = lz.info() == Eigen::Success && lx.info() == Eigen::Success;
        if (!ok) break;
        Lz[b] = lz.matrixL();
        Lx[b] = lx.matrixL();
        Zinv[b] = symmetrize(lz.solve(Matrix::Identity(Z[b].rows(), Z[b].cols())));
      }
      if (!ok) return finish_best("lost positive definiteness");

      // Schur complement M_ij = tr(F_i X F_j Z^{-1}) = <G_i, G_j> with G_i = Lz^{-1} F_i Lx. It is
      // factored through a QR decomposition of [G_1 ... G_nv] rather than formed explicitly.
      int rows = 0;
      std::vector<int> offset(nb);
      for (int b = 0; b < nb; ++b) {
        offset[b] = rows;
        rows += prob.block_sizes[b] * prob.block_sizes[b];
      }
      Matrix G = Matrix::Zero(rows, nv);
      for (int i = 0; i < nv; ++i) {
        for (const auto& t : prob.variables[i]) {
          const Matrix gi = Lz[t.block].triangularView<Eigen::Lower>().solve(t.coeff * Lx[t.block]);
          G.col(i).segment(offset[t.block], gi.size()) = Eigen::Map<const Vector>(gi.data(), gi.size());
        }
      }
      const Eigen::ColPivHouseholderQR<Matrix> qr(G);
      Matrix R = qr.matrixR().topLeftCorner(nv, nv).triangularView<Eigen::Upper>();
      const double r_floor = 1e-15 * std::max(R.diagonal().cwiseAbs().maxCoeff(), 1e-300);
      for (int i = 0; i < nv; ++i) {
        if (std::abs(R(i, i)) < r_floor) R(i, i) = r_floor;
      }
      auto solve_schur = [&](const Vector& rhs) -> Vector {
        // (P R^T R P^T) dy = rhs
        Vector v = qr.colsPermutation().transpose() * rhs;
        v = R.transpose().triangularView<Eigen::Lower>().solve(v);
        v = R.triangularView<Eigen::Upper>().solve(v);
        return qr.colsPermutation() * v;
      };

      // Direction for a given centering target and second-order correction.
      auto direction = [&](double target, const std::vector<Matrix>* corr, std::vector<Matrix>& dX, Vector& dy,
                           std::vector<Matrix>& dZ) {
        std::vector<Matrix> shift(nb);  // target Z^{-1} - corr Z^{-1} - X Rd Z^{-1}
        for (int b = 0; b < nb; ++b) {
          shift[b] = target * Zinv[b] - X[b] * Rd[b] * Zinv[b];
          if (corr) shift[b] -= (*corr)[b] * Zinv[b];
        }
        Vector rhs = -c;
        for (int i = 0; i < nv; ++i) {
          for (const auto& t : prob.variables[i]) rhs(i) += inner(t.coeff, shift[t.block]);
        }
        dy = solve_schur(rhs);
        dZ = Rd;
        for (int i = 0; i < nv; ++i) {
          for (const auto& t : prob.variables[i]) dZ[t.block] += dy(i) * t.coeff;
        }
        dX.resize(nb);
        for (int b = 0; b < nb; ++b) {
          Matrix d = target * Zinv[b] - X[b] - X[b] * dZ[b] * Zinv[b];
          if (corr) d -= (*corr)[b] * Zinv[b];
          dX[b] = symmetrize(d);
        }
      };

      auto max_step = [](const std::vector<Matrix>& S, const std::vector<Matrix>& dS) {
        double step = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < S.size(); ++b) {
          Eigen::LLT<Matrix> llt(S[b]);
          const Matrix& lo = llt.matrixL();
          Matrix t = lo.triangularView<Eigen::Lower>().solve(dS[b]);
          t = lo.triangularView<Eigen::Lower>().solve(t.transpose()).transpose();
          const double lam = min_eig(t);
          if (lam < 0.0) step = std::min(step, -1.0 / lam);
        }
        return step;
      };

      std::vector<Matrix> dXa;
      std::vector<Matrix> dZa;
      Vector dya;
      direction(0.0, nullptr, dXa, dya, dZa);
      const double ap_aff = std::min(1.0, max_step(X, dXa));
      const double ad_aff = std::min(1.0, max_step(Z, dZa));
      double xz_aff = 0.0;
      for (int b = 0; b < nb; ++b) xz_aff += inner(X[b] + ap_aff * dXa[b], Z[b] + ad_aff * dZa[b]);
      const double sigma = std::clamp(std::pow(std::max(xz_aff, 0.0) / xz, 3.0), 0.0, 1.0);

      std::vector<Matrix> corr(nb);
      for (int b = 0; b < nb; ++b) corr[b] = dXa[b] * dZa[b];
      std::vector<Matrix> dX;
      std::vector<Matrix> dZ;
      Vector dy;
      direction(sigma * mu, &corr, dX, dy, dZ);
      const double ap = std::min(1.0, opts_.step_fraction * max_step(X, dX));
      const double ad = std::min(1.0, opts_.step_fraction * max_step(Z, dZ));
      for (int b = 0; b < nb; ++b) {
        X[b] = symmetrize(X[b] + ap * dX[b]);
        Z[b] = symmetrize(Z[b] + ad * dZ[b]);
      }
      y += ad * dy;
    }

    return finish_best("iteration limit reached");
  }

 private:
  IpmOptions opts_;
};

}  // namespace synthctl

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace synthctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Bad input data or configuration (malformed files, dimension mismatches, out-of-range values).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Data do not have the property an operation requires (e.g. identification on rank-deficient data).
class NotInformative : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The numerical backend could not reach a verdict.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InputError(msg);
}

/// max(1, largest absolute entry) over the given matrices; used as a relative tolerance floor.
template <typename... Ms>
double tolerance_scale(const Ms&... ms) {
  double s = 1.0;
  ((s = std::max(s, ms.size() ? ms.cwiseAbs().maxCoeff() : 0.0)), ...);
  return s;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Smallest eigenvalue of the symmetric part.
inline double min_eig(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

/// Largest eigenvalue of the symmetric part.
inline double max_eig(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

/// Spectral norm.
inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

}  // namespace synthctl

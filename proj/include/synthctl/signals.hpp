#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "json.hpp"

#include "synthctl/core.hpp"

namespace synthctl {

// ============================================================================
// Grids and signals
// ============================================================================

/// Uniform partition of [0, tau] into `segments` intervals.
class UniformGrid {
 public:
  UniformGrid(double tau, int segments) : tau_(tau), segments_(segments) {
    require(std::isfinite(tau) && tau > 0.0, "grid duration must be positive and finite");
    require(segments >= 1, "grid needs at least one segment");
  }

  double tau() const { return tau_; }
  int segments() const { return segments_; }
  double step() const { return tau_ / segments_; }

  double node(int i) const {
    if (i >= segments_) return tau_;
    return tau_ * static_cast<double>(i) / static_cast<double>(segments_);
  }

  /// Index of the segment containing t; the right endpoint belongs to the last segment.
  int segment_of(double t) const {
    auto k = static_cast<int>(std::floor(t / step()));
    return std::clamp(k, 0, segments_ - 1);
  }

  bool same_span(const UniformGrid& other) const {
    return std::abs(tau_ - other.tau_) <= 1e-12 * std::max(tau_, other.tau_);
  }

  bool operator==(const UniformGrid& other) const {
    return segments_ == other.segments_ && same_span(other);
  }

 private:
  double tau_;
  int segments_;
};

enum class Interp { kPiecewiseLinear, kPiecewiseConstant };

inline std::string to_string(Interp law) {
  return law == Interp::kPiecewiseLinear ? "pl" : "pc";
}

inline Interp interp_from_string(const std::string& s) {
  if (s == "pl") return Interp::kPiecewiseLinear;
  if (s == "pc") return Interp::kPiecewiseConstant;
  throw InputError("unknown interpolation law '" + s + "' (expected pl or pc)");
}

/// Vector-valued signal on a uniform grid.
///
/// Piecewise-linear signals store one column per node (M + 1 columns); piecewise-constant
/// signals store one column per segment (M columns). On segment k every signal is the
/// polynomial c0 + c1 h in the local coordinate h = t - t_k.
class Signal {
 public:
  Signal(UniformGrid grid, Interp interp, Matrix values)
      : grid_(grid), interp_(interp), values_(std::move(values)) {
    const int expected = interp_ == Interp::kPiecewiseLinear ? grid_.segments() + 1 : grid_.segments();
    require(values_.rows() >= 1, "signal dimension must be positive");
    require(values_.cols() == expected, "signal value array does not match its interpolation law");
    require(values_.allFinite(), "signal contains non-finite values");
  }

  static Signal zeros(UniformGrid grid, int dim, Interp interp = Interp::kPiecewiseLinear) {
    const int cols = interp == Interp::kPiecewiseLinear ? grid.segments() + 1 : grid.segments();
    return Signal(grid, interp, Matrix::Zero(dim, cols));
  }

  /// Samples fn at the nodes (piecewise-linear) or at segment midpoints (piecewise-constant).
  template <typename Fn>
  static Signal sample(UniformGrid grid, int dim, Interp interp, Fn&& fn) {
    const int cols = interp == Interp::kPiecewiseLinear ? grid.segments() + 1 : grid.segments();
    Matrix vals(dim, cols);
    for (int i = 0; i < cols; ++i) {
      const double t = interp == Interp::kPiecewiseLinear ? grid.node(i) : grid.node(i) + 0.5 * grid.step();
      vals.col(i) = fn(t);
    }
    return Signal(grid, interp, std::move(vals));
  }

  const UniformGrid& grid() const { return grid_; }
  Interp interp() const { return interp_; }
  const Matrix& values() const { return values_; }
  int dim() const { return static_cast<int>(values_.rows()); }
  double tau() const { return grid_.tau(); }
  bool continuous() const { return interp_ == Interp::kPiecewiseLinear; }

  /// Constant term of the local polynomial on segment k.
  auto c0(int k) const { return values_.col(k); }

  /// Slope of the local polynomial on segment k.
  Vector c1(int k) const {
    if (interp_ == Interp::kPiecewiseConstant) return Vector::Zero(dim());
    return (values_.col(k + 1) - values_.col(k)) / grid_.step();
  }

  /// Evaluates the segment-k polynomial at t (t need not lie inside the segment).
  Vector eval_on(int k, double t) const {
    const double h = t - grid_.node(k);
    if (interp_ == Interp::kPiecewiseConstant) return values_.col(k);
    return values_.col(k) + h * c1(k);
  }

  /// Right-continuous evaluation.
  Vector operator()(double t) const { return eval_on(grid_.segment_of(t), t); }

  Signal scaled(double s) const { return Signal(grid_, interp_, s * values_); }

 private:
  UniformGrid grid_;
  Interp interp_;
  Matrix values_;
};

/// Input/state data over [0, tau]. The state is always piecewise-linear.
struct Trajectory {
  Signal x;
  Signal u;

  Trajectory(Signal x_in, Signal u_in) : x(std::move(x_in)), u(std::move(u_in)) {
    require(x.interp() == Interp::kPiecewiseLinear, "state data must be piecewise-linear");
    require(x.grid().same_span(u.grid()), "state and input grids must cover the same interval");
  }

  int n() const { return x.dim(); }
  int m() const { return u.dim(); }
  double tau() const { return x.tau(); }

  Trajectory scaled(double s) const { return Trajectory(x.scaled(s), u.scaled(s)); }
};

/// Sorted union of the nodes of several uniform partitions of [0, tau].
inline std::vector<double> merged_breakpoints(double tau, const std::vector<int>& segment_counts) {
  std::vector<double> pts;
  for (int count : segment_counts) {
    for (int i = 0; i <= count; ++i) pts.push_back(UniformGrid(tau, count).node(i));
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> out;
  const double eps = 1e-12 * tau;
  for (double p : pts) {
    if (out.empty() || p - out.back() > eps) out.push_back(p);
  }
  out.back() = tau;
  return out;
}

// ============================================================================
// Simulation
// ============================================================================

inline Matrix matrix_exponential(const Matrix& m) {
  if (m.rows() != m.cols()) throw InputError("matrix exponential needs a square matrix");
  require(m.allFinite(), "matrix exponential of a non-finite matrix");
  if (m.size() == 0) return m;
  return m.exp();
}

/// Exact solution of x' = A x + B u + w sampled at the grid nodes.
///
/// Each sub-interval of the merged grid has affine forcing g0 + g1 h, so the state is
/// propagated exactly with the exponential of [[A, I, 0], [0, 0, I], [0, 0, 0]].
inline Trajectory simulate_lti(const Matrix& A, const Matrix& B, const Vector& x0, const Signal& u,
                               const std::optional<Signal>& w, const UniformGrid& grid) {
  const int n = static_cast<int>(A.rows());
  require(A.cols() == n && n >= 1, "A must be square");
  require(B.rows() == n && B.cols() == u.dim(), "B dimensions do not match A and u");
  require(x0.size() == n, "x0 dimension does not match A");
  require(A.allFinite() && B.allFinite() && x0.allFinite(), "non-finite system data");
  require(u.grid().same_span(grid), "input grid does not cover the simulation interval");
  if (w) {
    require(w->dim() == n, "noise dimension must equal the state dimension");
    require(w->grid().same_span(grid), "noise grid does not cover the simulation interval");
  }

  std::vector<int> counts{grid.segments(), u.grid().segments()};
  if (w) counts.push_back(w->grid().segments());
  const auto pts = merged_breakpoints(grid.tau(), counts);

  Matrix aug = Matrix::Zero(3 * n, 3 * n);
  aug.topLeftCorner(n, n) = A;
  aug.block(0, n, n, n).setIdentity();
  aug.block(n, 2 * n, n, n).setIdentity();

  std::vector<std::pair<double, Matrix>> cache;
  auto propagator = [&](double len) -> const Matrix& {
    for (auto& [l, e] : cache) {
      if (std::abs(l - len) <= 1e-14 * grid.tau()) return e;
    }
    cache.emplace_back(len, matrix_exponential(aug * len).topRows(n));
    return cache.back().second;
  };

  Matrix xs(n, grid.segments() + 1);
  xs.col(0) = x0;
  Vector x = x0;
  int next_node = 1;
  for (std::size_t s = 0; s + 1 < pts.size(); ++s) {
    const double a = pts[s];
    const double b = pts[s + 1];
    const double mid = 0.5 * (a + b);
    const int ku = u.grid().segment_of(mid);
    Vector g0 = B * u.eval_on(ku, a);
    Vector g1 = B * u.c1(ku);
    if (w) {
      const int kw = w->grid().segment_of(mid);
      g0 += w->eval_on(kw, a);
      g1 += w->c1(kw);
    }
    const Matrix& e = propagator(b - a);
    x = e.leftCols(n) * x + e.middleCols(n, n) * g0 + e.rightCols(n) * g1;
    if (next_node <= grid.segments() && std::abs(b - grid.node(next_node)) <= 1e-11 * grid.tau()) {
      xs.col(next_node++) = x;
    }
  }
  require(next_node == grid.segments() + 1, "simulation grid is not contained in the merged grid");
  return Trajectory(Signal(grid, Interp::kPiecewiseLinear, std::move(xs)), u);
}

/// Piecewise-constant white noise with covariance intensity sigma2: each segment value is
/// N(0, sigma2 / dt) per component.
inline Signal gaussian_white_noise(const UniformGrid& grid, double sigma2, int dim, std::uint64_t seed) {
  require(sigma2 >= 0.0 && std::isfinite(sigma2), "noise intensity must be non-negative");
  require(dim >= 1, "noise dimension must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(sigma2 / grid.step());
  Matrix vals(dim, grid.segments());
  for (int k = 0; k < grid.segments(); ++k) {
    for (int i = 0; i < dim; ++i) vals(i, k) = sd * normal(rng);
  }
  return Signal(grid, Interp::kPiecewiseConstant, std::move(vals));
}

// ============================================================================
// CSV ingestion
// ============================================================================

/// Optional overrides for CSV ingestion; unset fields are taken from the file.
struct CsvFormat {
  std::optional<int> n;
  std::optional<int> m;
  std::optional<Interp> u_interp;
};

inline std::filesystem::path metadata_path(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, int row) {
  if (s.empty()) throw InputError("empty value on data row " + std::to_string(row));
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw InputError("malformed number '" + s + "' on data row " + std::to_string(row));
  }
  if (!std::isfinite(v)) throw InputError("non-finite value on data row " + std::to_string(row));
  return v;
}

inline std::string format_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

}  // namespace detail

/// Reads a trajectory CSV (`t,x1..xn,u1..um`).
///
/// A leading `# u_interp=pc` (or `pl`) line selects the input law; otherwise the metadata
/// sidecar next to the file is consulted, and piecewise-linear is the default. For
/// piecewise-constant inputs row i carries the value on [t_i, t_{i+1}) and the last row is ignored.
inline Trajectory load_trajectory(const std::filesystem::path& path, const CsvFormat& fmt = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());

  std::optional<Interp> directive;
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("u_interp=");
      if (pos != std::string::npos) {
        auto value = line.substr(pos + 9);
        value.erase(value.find_last_not_of(" \t") + 1);
        directive = interp_from_string(value);
      }
      continue;
    }
    header = detail::split_csv(line);
    break;
  }
  if (header.empty() || header[0] != "t") throw InputError("malformed header: first column must be 't'");

  int n = 0;
  int m = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h.size() < 2 || (h[0] != 'x' && h[0] != 'u')) throw InputError("malformed header: column '" + h + "'");
    int idx = 0;
    try {
      idx = std::stoi(h.substr(1));
    } catch (const std::exception&) {
      throw InputError("malformed header: column '" + h + "'");
    }
    if (h[0] == 'x') {
      if (m != 0 || idx != n + 1) throw InputError("malformed header: state columns must be x1..xn before inputs");
      ++n;
    } else {
      if (idx != m + 1) throw InputError("malformed header: input columns must be u1..um");
      ++m;
    }
  }
  if (n == 0 || m == 0) throw InputError("malformed header: need at least one state and one input column");
  if ((fmt.n && *fmt.n != n) || (fmt.m && *fmt.m != m)) {
    throw InputError("header dimensions do not match the requested n, m");
  }

  std::vector<std::vector<double>> rows;
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    ++row;
    const auto cells = detail::split_csv(line);
    if (cells.size() != header.size()) {
      throw InputError("data row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " columns, header has " + std::to_string(header.size()));
    }
    std::vector<double> vals;
    vals.reserve(cells.size());
    for (const auto& c : cells) vals.push_back(detail::parse_double(c, row));
    rows.push_back(std::move(vals));
  }
  if (rows.size() < 2) throw InputError("trajectory needs at least two rows");

  const int segments = static_cast<int>(rows.size()) - 1;
  const double tau = rows.back()[0] - rows.front()[0];
  if (!(tau > 0.0)) throw InputError("non-uniform grid: time column is not increasing");
  if (std::abs(rows.front()[0]) > 1e-9 * tau) throw InputError("non-uniform grid: time must start at 0");
  const UniformGrid grid(tau, segments);
  for (int i = 0; i <= segments; ++i) {
    if (std::abs(rows[i][0] - grid.node(i)) > 1e-9 * tau) throw InputError("non-uniform grid");
  }

  Interp u_law = Interp::kPiecewiseLinear;
  std::optional<Interp> sidecar;
  if (const auto meta = metadata_path(path); meta != path && std::filesystem::exists(meta)) {
    std::ifstream ms(meta);
    nlohmann::json j;
    try {
      ms >> j;
    } catch (const nlohmann::json::exception& e) {
      throw InputError("malformed metadata " + meta.string() + ": " + e.what());
    }
    if (j.contains("u_interp")) sidecar = interp_from_string(j.at("u_interp").get<std::string>());
    if ((j.contains("n") && j.at("n").get<int>() != n) || (j.contains("m") && j.at("m").get<int>() != m)) {
      throw InputError("metadata dimensions disagree with the CSV header");
    }
  }
  if (fmt.u_interp) {
    u_law = *fmt.u_interp;
  } else if (directive) {
    u_law = *directive;
  } else if (sidecar) {
    u_law = *sidecar;
  }

  Matrix xs(n, segments + 1);
  const int ucols = u_law == Interp::kPiecewiseLinear ? segments + 1 : segments;
  Matrix us(m, ucols);
  for (int i = 0; i <= segments; ++i) {
    for (int j = 0; j < n; ++j) xs(j, i) = rows[i][1 + j];
    if (i < ucols) {
      for (int j = 0; j < m; ++j) us(j, i) = rows[i][1 + n + j];
    }
  }
  return Trajectory(Signal(grid, Interp::kPiecewiseLinear, std::move(xs)), Signal(grid, u_law, std::move(us)));
}

/// Writes the CSV and its JSON metadata sidecar. Requires x and u on the same grid.
inline void save_trajectory(const std::filesystem::path& path, const Trajectory& traj) {
  require(traj.x.grid() == traj.u.grid(), "CSV output needs state and input on the same grid");
  const auto& grid = traj.x.grid();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << "# u_interp=" << to_string(traj.u.interp()) << "\n";
  out << "t";
  for (int j = 1; j <= traj.n(); ++j) out << ",x" << j;
  for (int j = 1; j <= traj.m(); ++j) out << ",u" << j;
  out << "\n";
  const int ucols = static_cast<int>(traj.u.values().cols());
  for (int i = 0; i <= grid.segments(); ++i) {
    out << detail::format_double(grid.node(i));
    for (int j = 0; j < traj.n(); ++j) out << ',' << detail::format_double(traj.x.values()(j, i));
    const int ui = std::min(i, ucols - 1);
    for (int j = 0; j < traj.m(); ++j) out << ',' << detail::format_double(traj.u.values()(j, ui));
    out << "\n";
  }

  nlohmann::ordered_json meta;
  meta["schema_version"] = 1;
  meta["n"] = traj.n();
  meta["m"] = traj.m();
  meta["tau"] = grid.tau();
  meta["segments"] = grid.segments();
  meta["u_interp"] = to_string(traj.u.interp());
  std::ofstream ms(metadata_path(path), std::ios::binary);
  ms << meta.dump(2) << "\n";
}

}  // namespace synthctl

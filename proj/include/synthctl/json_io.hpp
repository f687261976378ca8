#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <unistd.h>

#include "json.hpp"

#include "synthctl/core.hpp"
#include "synthctl/informativity.hpp"
#include "synthctl/lmi.hpp"
#include "synthctl/sdp.hpp"
#include "synthctl/synthesis.hpp"
#include "synthctl/verify.hpp"

// JSON forms of the library types. Matrices are {"rows", "cols", "data"} with data row-major;
// non-finite reals are written as null.
namespace synthctl::json_io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

inline Json real(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

template <typename J>
double real_from(const J& j, double if_null) {
  return j.is_null() ? if_null : j.template get<double>();
}

inline Json to_json(const Matrix& m) {
  Json data = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    for (int k = 0; k < m.cols(); ++k) data.push_back(real(m(i, k)));
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(real(v(i)));
  return out;
}

template <typename J>
Matrix matrix_from(const J& j, const std::string& what) {
  try {
    const int rows = j.at("rows").template get<int>();
    const int cols = j.at("cols").template get<int>();
    const auto& data = j.at("data");
    require(rows >= 0 && cols >= 0, what + ": negative dimensions");
    require(data.is_array() && static_cast<long>(data.size()) == static_cast<long>(rows) * cols,
            what + ": data length does not match rows x cols");
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
      for (int k = 0; k < cols; ++k) m(i, k) = data[static_cast<std::size_t>(i) * cols + k].template get<double>();
    }
    require(m.allFinite(), what + ": non-finite entries");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(what + ": " + e.what());
  }
}

template <typename J>
Vector vector_from(const J& j, const std::string& what) {
  require(j.is_array(), what + ": expected an array");
  Vector v(static_cast<int>(j.size()));
  try {
    for (int i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].template get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(what + ": " + e.what());
  }
  return v;
}

inline Json document(const std::string& kind) { return Json{{"schema_version", kSchemaVersion}, {"kind", kind}}; }

template <typename J>
void check_document(const J& j, const std::string& kind) {
  require(j.is_object(), "expected a JSON object");
  require(j.contains("schema_version") && j.at("schema_version").is_number_integer() &&
              j.at("schema_version").template get<int>() == kSchemaVersion,
          "unsupported or missing schema_version");
  require(j.contains("kind") && j.at("kind") == kind, "expected a '" + kind + "' document");
}

// ---------------------------------------------------------------------------
// Gram blocks and hat matrices

inline Json to_json(const GramBlocks& g) {
  Json j = document("gram_blocks");
  j["n"] = g.n;
  j["m"] = g.m;
  j["tau"] = g.tau;
  j["Gdd"] = to_json(g.Gdd);
  j["Gdx"] = to_json(g.Gdx);
  j["Gdu"] = to_json(g.Gdu);
  j["Gxx"] = to_json(g.Gxx);
  j["Gxu"] = to_json(g.Gxu);
  j["Guu"] = to_json(g.Guu);
  return j;
}

template <typename J>
GramBlocks gram_from(const J& j) {
  check_document(j, "gram_blocks");
  GramBlocks g;
  try {
    g.n = j.at("n").template get<int>();
    g.m = j.at("m").template get<int>();
    g.tau = j.at("tau").template get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("gram_blocks: ") + e.what());
  }
  require(g.n >= 1 && g.m >= 1 && g.tau > 0.0, "gram_blocks: invalid n, m or tau");
  g.Gdd = matrix_from(j.at("Gdd"), "Gdd");
  g.Gdx = matrix_from(j.at("Gdx"), "Gdx");
  g.Gdu = matrix_from(j.at("Gdu"), "Gdu");
  g.Gxx = matrix_from(j.at("Gxx"), "Gxx");
  g.Gxu = matrix_from(j.at("Gxu"), "Gxu");
  g.Guu = matrix_from(j.at("Guu"), "Guu");
  const auto shape = [](const Matrix& m, int r, int c) { return m.rows() == r && m.cols() == c; };
  require(shape(g.Gdd, g.n, g.n) && shape(g.Gdx, g.n, g.n) && shape(g.Gdu, g.n, g.m) && shape(g.Gxx, g.n, g.n) &&
              shape(g.Gxu, g.n, g.m) && shape(g.Guu, g.m, g.m),
          "gram_blocks: block shapes do not match n and m");
  return g;
}

inline Json to_json(const HatMatrices& h) {
  Json j = document("hat_matrices");
  j["level"] = h.level;
  j["Phi"] = to_json(h.Phi);
  j["PhiD"] = to_json(h.PhiD);
  j["Psi"] = to_json(h.Psi);
  return j;
}

// ---------------------------------------------------------------------------
// Semidefinite programs

inline Json to_json(const SdpProblem& p) {
  Json j = document("sdp_problem");
  j["block_sizes"] = p.block_sizes;
  Json constant = Json::array();
  for (const auto& c : p.constant) constant.push_back(to_json(c));
  j["constant"] = std::move(constant);
  j["objective"] = vector_json(p.objective);
  Json vars = Json::array();
  for (int i = 0; i < p.num_variables(); ++i) {
    Json terms = Json::array();
    for (const auto& t : p.variables[i]) terms.push_back(Json{{"block", t.block}, {"coeff", to_json(t.coeff)}});
    vars.push_back(Json{{"name", p.names.empty() ? std::string() : p.names[i]}, {"terms", std::move(terms)}});
  }
  j["variables"] = std::move(vars);
  return j;
}

template <typename J>
SdpProblem sdp_problem_from(const J& j) {
  check_document(j, "sdp_problem");
  SdpProblem p;
  try {
    for (const auto& s : j.at("block_sizes")) p.add_block(s.template get<int>());
    const auto& constant = j.at("constant");
    require(constant.size() == p.block_sizes.size(), "sdp_problem: constant count does not match blocks");
    for (std::size_t b = 0; b < constant.size(); ++b) p.constant[b] = matrix_from(constant[b], "constant");
    for (const auto& v : j.at("variables")) {
      const int var = p.add_variable(v.at("name").template get<std::string>());
      for (const auto& t : v.at("terms")) {
        const int block = t.at("block").template get<int>();
        require(block >= 0 && block < p.num_blocks(), "sdp_problem: term refers to a missing block");
        p.variables[var].push_back({block, matrix_from(t.at("coeff"), "coeff")});
      }
    }
    p.objective = vector_from(j.at("objective"), "objective");
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("sdp_problem: ") + e.what());
  }
  p.validate();
  return p;
}

inline Json to_json(const SdpSolution& s) {
  Json j = document("sdp_solution");
  j["status"] = to_string(s.status);
  j["y"] = vector_json(s.y);
  j["objective"] = real(s.objective);
  j["dual_bound"] = real(s.dual_bound);
  j["iterations"] = s.iterations;
  j["message"] = s.message;
  return j;
}

template <typename J>
SdpSolution sdp_solution_from(const J& j) {
  check_document(j, "sdp_solution");
  SdpSolution s;
  try {
    s.status = sdp_status_from_string(j.at("status").template get<std::string>());
    s.y = vector_from(j.at("y"), "y");
    s.objective = real_from(j.at("objective"), std::numeric_limits<double>::quiet_NaN());
    s.dual_bound = real_from(j.at("dual_bound"), -std::numeric_limits<double>::infinity());
    s.iterations = j.at("iterations").template get<int>();
    s.message = j.value("message", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("sdp_solution: ") + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Certificates and reports (fragments; callers wrap them in a document)

inline Json to_json(const RankCertificate& rc) {
  return Json{{"tested", rc.tested},         {"singular_values", vector_json(rc.singular_values)},
              {"threshold", real(rc.threshold)}, {"required_rank", rc.required_rank},
              {"rank", rc.rank},             {"verdict", rc.verdict}};
}

inline Json to_json(const LmiSolution& s) {
  return Json{{"P", to_json(s.P)},
              {"L", to_json(s.L)},
              {"alpha", real(s.alpha)},
              {"min_eig_block", real(s.min_eig_block)},
              {"min_eig_P", real(s.min_eig_P)},
              {"eps_P", real(s.eps_P)},
              {"solver_status", s.solver_status},
              {"iterations", s.iterations}};
}

inline Json to_json(const GainVerification& v) {
  Json failures = Json::array();
  for (const auto& f : v.failures) {
    failures.push_back(Json{{"index", f.index}, {"s_max", real(f.s_max)}, {"lyapunov_max", real(f.lyapunov_max)}});
  }
  return Json{{"samples", v.samples},
              {"non_members", v.non_members},
              {"failures", std::move(failures)},
              {"worst_s_max", real(v.worst_s_max)},
              {"worst_lyapunov", real(v.worst_lyapunov)},
              {"passed", v.passed()},
              {"warning", v.warning}};
}

inline Json to_json(const SynthesisReport& r) {
  Json j{{"feasible", r.feasible}, {"c", real(r.c)}, {"regularized", r.regularized}};
  if (r.regularized) {
    j["lambda"] = real(r.lambda);
    j["delta_max"] = real(r.delta_max);
    j["gamma"] = real(r.gamma);
    j["delta"] = real(r.delta);
  }
  if (r.feasible) {
    j["K"] = to_json(r.K);
    j["solution"] = to_json(*r.solution);
  }
  if (r.verification) j["verification"] = to_json(*r.verification);
  j["backend"] = r.backend;
  j["message"] = r.message;
  return j;
}

inline Json to_json(const HatGain& h) {
  Json j{{"verdict", to_string(h.verdict)}, {"level", h.level}, {"beta", real(h.beta)}};
  if (h.verdict == LmiVerdict::kFeasible) {
    j["K"] = to_json(h.K);
    j["P"] = to_json(h.P);
    j["closed_loop"] = to_json(h.closed_loop);
    j["s_max"] = real(h.s_max);
  }
  j["message"] = h.message;
  return j;
}

// ---------------------------------------------------------------------------
// External solver bridge

/// Runs `command` with the problem document on stdin and reads a solution document from stdout.
class ExternalProcessBackend : public SdpBackend {
 public:
  explicit ExternalProcessBackend(std::string command) : command_(std::move(command)) {
    require(!command_.empty(), "external backend: empty command");
  }

  std::string name() const override { return "external:" + command_; }

  SdpSolution solve(const SdpProblem& problem) override {
    problem.validate();
    static std::atomic<int> counter{0};
    const auto dir = std::filesystem::temp_directory_path();
    const std::string stem = "synthctl-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
    const auto in_path = dir / (stem + "-problem.json");
    const auto out_path = dir / (stem + "-solution.json");
    struct Cleanup {
      std::filesystem::path a, b;
      ~Cleanup() {
        std::error_code ec;
        std::filesystem::remove(a, ec);
        std::filesystem::remove(b, ec);
      }
    } cleanup{in_path, out_path};
    {
      std::ofstream out(in_path, std::ios::binary);
      if (!out) throw SolverFailure("external backend: cannot write " + in_path.string());
      out << to_json(problem).dump() << "\n";
    }
    const std::string cmd = command_ + " < '" + in_path.string() + "' > '" + out_path.string() + "'";
    const int rc = std::system(cmd.c_str());
    if (rc != 0) throw SolverFailure("external backend: command exited with status " + std::to_string(rc));
    std::ifstream in(out_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw SolverFailure(std::string("external backend: unreadable solution: ") + e.what());
    }
    SdpSolution sol;
    try {
      sol = sdp_solution_from(j);
    } catch (const InputError& e) {
      throw SolverFailure(std::string("external backend: ") + e.what());
    }
    if (sol.y.size() != problem.num_variables() && sol.status != SdpStatus::kUnknown) {
      throw SolverFailure("external backend: solution has the wrong number of variables");
    }
    return sol;
  }

 private:
  std::string command_;
};

}  // namespace synthctl::json_io

namespace synthctl {

inline constexpr const char* kBackendEnv = "SYNTHCTL_BACKEND";

/// "ipm" (default) or "external:<command>". An empty spec falls back to $SYNTHCTL_BACKEND.
inline std::unique_ptr<SdpBackend> make_backend(std::string spec = {}) {
  if (spec.empty()) {
    if (const char* env = std::getenv(kBackendEnv)) spec = env;
  }
  if (spec.empty() || spec == "ipm") return std::make_unique<InteriorPointBackend>();
  const std::string prefix = "external:";
  if (spec.rfind(prefix, 0) == 0) return std::make_unique<json_io::ExternalProcessBackend>(spec.substr(prefix.size()));
  throw InputError("unknown backend '" + spec + "' (expected 'ipm' or 'external:<command>')");
}

}  // namespace synthctl

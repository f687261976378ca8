// synthctl: data-driven informativity checks and stabilizing-gain synthesis.
//
// Exit codes: 0 success, 2 input/config error, 3 infeasible or negative verdict, 4 solver failure.
// `reproduce` tags failures with its stage: 10 * stage + class.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "synthctl/synthctl.hpp"

namespace fs = std::filesystem;
using synthctl::json_io::Json;
using namespace synthctl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNegative = 3;
constexpr int kExitSolver = 4;

struct RunConfig {
  std::string in;
  std::string out;
  std::optional<int> n;
  std::optional<int> m;
  std::optional<double> tau;
  std::optional<double> c;
  std::optional<int> ell;
  std::optional<int> ell_max;
  std::optional<double> lambda;
  std::optional<double> delta_max;
  std::optional<std::uint64_t> seed;
  double tol_rank = kDefaultRankTol;
  std::optional<double> tol_membership;
  std::string backend;

  // simulate / reproduce
  std::string system = "batch-reactor";
  double noise = 0.0;
  double repro_noise = batch_reactor::kNoiseIntensity;
  int segments = 2048;
  std::string u_interp = "pl";

  // check / synth
  std::string kind;
  int samples = 200;
  double c_check = 0.1164;
  double tol_c = 1e-4;
  double horizon = 10.0;
};

/// Failure inside a `reproduce` stage.
struct StageError {
  int stage;
  int cls;
  std::string message;
};

void emit(const Json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw InputError("cannot write " + out);
  f << text;
}

Json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open " + path);
  try {
    return Json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed JSON in " + path + ": " + e.what());
  }
}

bool is_json_path(const std::string& path) { return fs::path(path).extension() == ".json"; }

void check_dims(const RunConfig& cfg, int n, int m, double tau) {
  if (cfg.n && *cfg.n != n) throw InputError("--n " + std::to_string(*cfg.n) + " does not match the data (n = " + std::to_string(n) + ")");
  if (cfg.m && *cfg.m != m) throw InputError("--m " + std::to_string(*cfg.m) + " does not match the data (m = " + std::to_string(m) + ")");
  if (cfg.tau && std::abs(*cfg.tau - tau) > 1e-9 * std::max(1.0, tau)) {
    throw InputError("--tau does not match the data (tau = " + detail::format_double(tau) + ")");
  }
}

/// Data for check/synth: a trajectory CSV, or a gram_blocks JSON document.
struct Dataset {
  std::optional<Trajectory> traj;
  GramBlocks gram;
};

Dataset load_dataset(const RunConfig& cfg) {
  require(!cfg.in.empty(), "--in is required");
  Dataset d;
  if (is_json_path(cfg.in)) {
    const Json j = read_json_file(cfg.in);
    d.gram = json_io::gram_from(j);
  } else {
    CsvFormat fmt;
    fmt.n = cfg.n;
    fmt.m = cfg.m;
    d.traj = load_trajectory(cfg.in, fmt);
    d.gram = gram_blocks(*d.traj);
  }
  check_dims(cfg, d.gram.n, d.gram.m, d.gram.tau);
  return d;
}

const Trajectory& require_traj(const Dataset& d, const std::string& what) {
  if (!d.traj) throw InputError(what + " needs trajectory data (CSV), not Gram blocks");
  return *d.traj;
}

SampleOptions sample_options(const RunConfig& cfg) {
  SampleOptions o;
  if (cfg.tol_membership) o.tol = *cfg.tol_membership;
  return o;
}

GainVerification run_verification(const GramBlocks& gram, double c, const Matrix& K, const Matrix& P, const RunConfig& cfg,
                                  std::uint64_t seed) {
  const auto samples = sample_members(gram, c, cfg.samples, seed, sample_options(cfg));
  return verify_gain(gram, c, K, P, samples);
}

Json trajectory_summary(const Trajectory& t) {
  return Json{{"n", t.n()}, {"m", t.m()}, {"tau", t.tau()}, {"segments", t.x.grid().segments()},
              {"u_interp", to_string(t.u.interp())}};
}

// ---------------------------------------------------------------------------
// simulate

struct SimulationSpec {
  Matrix A;
  Matrix B;
  Vector x0;
};

SimulationSpec builtin_system(const std::string& name) {
  if (name == "batch-reactor") return {batch_reactor::A(), batch_reactor::B(), batch_reactor::x0()};
  throw InputError("unknown system '" + name + "' (available: batch-reactor)");
}

struct Simulated {
  Trajectory traj;
  std::optional<Signal> w;
};

Simulated simulate_system(const RunConfig& cfg) {
  require(cfg.noise >= 0.0, "--noise must be non-negative");
  if (cfg.noise > 0.0 && !cfg.seed) throw InputError("--seed is required when --noise > 0");
  require(cfg.segments >= 1, "--segments must be positive");
  const double tau = cfg.tau.value_or(batch_reactor::kTau);
  require(tau > 0.0, "--tau must be positive");
  const SimulationSpec sys = builtin_system(cfg.system);
  const UniformGrid grid(tau, cfg.segments);
  const Interp law = interp_from_string(cfg.u_interp);
  const Signal u = Signal::sample(grid, static_cast<int>(sys.B.cols()), law, batch_reactor::input);
  std::optional<Signal> w;
  if (cfg.noise > 0.0) w = gaussian_white_noise(grid, cfg.noise, static_cast<int>(sys.A.rows()), *cfg.seed);
  return {simulate_lti(sys.A, sys.B, sys.x0, u, w, grid), w};
}

int cmd_simulate(const RunConfig& cfg) {
  require(!cfg.out.empty(), "--out is required");
  const Trajectory traj = simulate_system(cfg).traj;
  save_trajectory(cfg.out, traj);
  Json j = json_io::document("simulation");
  j["system"] = cfg.system;
  j["noise"] = cfg.noise;
  j["seed"] = cfg.seed ? Json(*cfg.seed) : Json(nullptr);
  j["trajectory"] = trajectory_summary(traj);
  j["csv"] = cfg.out;
  j["metadata"] = metadata_path(cfg.out).string();
  emit(j, "");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gram

int cmd_gram(const RunConfig& cfg) {
  require(!cfg.in.empty(), "--in is required");
  CsvFormat fmt;
  fmt.n = cfg.n;
  fmt.m = cfg.m;
  const Trajectory traj = load_trajectory(cfg.in, fmt);
  check_dims(cfg, traj.n(), traj.m(), traj.tau());
  Json j = json_io::to_json(gram_blocks(traj));
  if (cfg.ell) j["hat"] = json_io::to_json(hat_matrices(traj, *cfg.ell));
  emit(j, cfg.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// check

Json feasibility_json(const FeasibilityResult& fr) {
  Json j{{"verdict", fr.verdict == LmiVerdict::kFeasible}, {"status", fr.marginal ? "marginal" : to_string(fr.verdict)},
         {"beta", json_io::real(fr.beta)},           {"beta_upper", json_io::real(fr.beta_upper)},
         {"message", fr.message}};
  if (fr.solution) {
    j["K"] = json_io::to_json(fr.solution->K());
    j["solution"] = json_io::to_json(*fr.solution);
  }
  return j;
}

int cmd_check(const RunConfig& cfg) {
  const Dataset d = load_dataset(cfg);
  std::string kind = cfg.kind.empty() ? (cfg.c ? "noisy" : "all") : cfg.kind;
  if (kind == "noisy" && !cfg.c) throw InputError("--c is required for the noisy check");
  auto backend = make_backend(cfg.backend);

  Json j = json_io::document("check");
  j["kind"] = kind;
  j["backend"] = backend->name();
  bool all_true = true;
  bool inconclusive = false;

  if (kind == "identification" || kind == "all") {
    const RankCertificate rc = check_identification(d.gram, cfg.tol_rank);
    Json id{{"verdict", rc.verdict}, {"gram", json_io::to_json(rc)}};
    if (rc.verdict) {
      const SystemPair sys = identify(d.gram, cfg.tol_rank);
      id["A"] = json_io::to_json(sys.A);
      id["B"] = json_io::to_json(sys.B);
    }
    if (cfg.ell || cfg.ell_max) {
      const Trajectory& t = require_traj(d, "the hat route");
      std::optional<int> level = cfg.ell;
      if (cfg.ell) {
        if (!check_identification_hat(t, *cfg.ell, cfg.tol_rank).verdict) level.reset();
      } else {
        level = ell_search(t, HatPredicate::kIdentification, *backend, *cfg.ell_max, cfg.tol_rank);
      }
      id["hat"] = Json{{"level", level ? Json(*level) : Json(nullptr)}, {"status", level ? "passed" : "inconclusive"}};
      inconclusive = inconclusive || !level;
      if (level) id["hat"]["certificate"] = json_io::to_json(check_identification_hat(t, *level, cfg.tol_rank));
    }
    all_true = all_true && rc.verdict;
    j["identification"] = std::move(id);
  }

  if (kind == "stabilization" || kind == "all") {
    const FeasibilityResult fr = solve_feasibility(NoisyLmi(d.gram, 0.0), *backend);
    if (fr.verdict == LmiVerdict::kUnknown && !fr.marginal) throw SolverFailure("stabilization check: " + fr.message);
    Json st = feasibility_json(fr);
    if (cfg.ell || cfg.ell_max) {
      const Trajectory& t = require_traj(d, "the hat route");
      std::optional<int> level = cfg.ell;
      if (!cfg.ell) level = ell_search(t, HatPredicate::kStabilization, *backend, *cfg.ell_max, cfg.tol_rank);
      if (level) {
        const HatGain hg = design_gain_hat(t, *level, *backend, cfg.tol_rank);
        st["hat"] = json_io::to_json(hg);
        st["hat"]["status"] = hg.verdict == LmiVerdict::kFeasible ? "passed" : "inconclusive";
        inconclusive = inconclusive || hg.verdict != LmiVerdict::kFeasible;
      } else {
        st["hat"] = Json{{"level", nullptr}, {"status", "inconclusive"}};
        inconclusive = true;
      }
    }
    all_true = all_true && fr.verdict == LmiVerdict::kFeasible;
    j["stabilization"] = std::move(st);
  }

  if (kind == "noisy") {
    const FeasibilityResult fr = solve_feasibility(NoisyLmi(d.gram, *cfg.c), *backend);
    if (fr.verdict == LmiVerdict::kUnknown && !fr.marginal) throw SolverFailure("noisy check: " + fr.message);
    Json nz = feasibility_json(fr);
    nz["c"] = *cfg.c;
    all_true = all_true && fr.verdict == LmiVerdict::kFeasible;
    j["noisy"] = std::move(nz);
  }

  if (kind != "identification" && kind != "stabilization" && kind != "noisy" && kind != "all") {
    throw InputError("unknown --kind '" + kind + "'");
  }
  j["verdict"] = all_true;
  j["inconclusive_hat_route"] = inconclusive;
  emit(j, cfg.out);
  return all_true ? kExitOk : kExitNegative;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const RunConfig& cfg) {
  const Dataset d = load_dataset(cfg);
  auto backend = make_backend(cfg.backend);
  const double c = cfg.c.value_or(0.0);
  require(cfg.samples >= 0, "--samples must be non-negative");
  const std::uint64_t seed = cfg.seed.value_or(0);

  Json j = json_io::document("synthesis");
  j["backend"] = backend->name();
  bool ok = true;

  if (cfg.ell) {
    const HatGain hg = design_gain_hat(require_traj(d, "--ell"), *cfg.ell, *backend, cfg.tol_rank);
    if (hg.verdict == LmiVerdict::kUnknown) throw SolverFailure("hat-level design: " + hg.message);
    j["route"] = "hat";
    j["feasible"] = hg.verdict == LmiVerdict::kFeasible;
    j["hat"] = json_io::to_json(hg);
    ok = hg.verdict == LmiVerdict::kFeasible;
  } else {
    const bool regularized = cfg.lambda || cfg.delta_max;
    SynthesisReport rep = regularized
                              ? synthesize_gain_regularized(d.gram, c, cfg.lambda.value_or(1e2), cfg.delta_max.value_or(1e6), *backend)
                              : synthesize_gain(d.gram, c, *backend);
    if (rep.feasible && cfg.samples > 0) {
      rep.verification = run_verification(d.gram, c, rep.K, rep.solution->P, cfg, seed);
    }
    j["route"] = "lmi";
    j["c"] = c;
    j["feasible"] = rep.feasible;
    j["samples"] = cfg.samples;
    j["seed"] = seed;
    j["report"] = json_io::to_json(rep);
    if (rep.feasible) {
      const SystemPair center = least_squares_center(d.gram);
      const Matrix cl = center.A + center.B * rep.K;
      j["center_s_max"] = json_io::real(is_hurwitz(cl).s_max);
      j["center_lyapunov_max"] = json_io::real(max_eig(cl * rep.solution->P + rep.solution->P * cl.transpose()));
    }
    ok = rep.feasible && (!rep.verification || rep.verification->passed());
  }
  j["verdict"] = ok;
  emit(j, cfg.out);
  return ok ? kExitOk : kExitNegative;
}

// ---------------------------------------------------------------------------
// reproduce

void write_series(const fs::path& path, const Trajectory& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f << "t";
  for (int j = 1; j <= t.n(); ++j) f << ",x" << j;
  f << ",norm\n";
  const auto& grid = t.x.grid();
  for (int i = 0; i <= grid.segments(); ++i) {
    f << detail::format_double(grid.node(i));
    for (int j = 0; j < t.n(); ++j) f << ',' << detail::format_double(t.x.values()(j, i));
    f << ',' << detail::format_double(t.x.values().col(i).norm()) << "\n";
  }
}

template <typename Fn>
auto stage(int number, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const InputError& e) {
    throw StageError{number, kExitInput, e.what()};
  } catch (const NotInformative& e) {
    throw StageError{number, kExitNegative, e.what()};
  } catch (const SolverFailure& e) {
    throw StageError{number, kExitSolver, e.what()};
  }
}

int cmd_reproduce(RunConfig cfg) {
  if (!cfg.seed) throw InputError("--seed is required");
  cfg.noise = cfg.repro_noise;
  const double c = cfg.c.value_or(0.1);
  const double lambda = cfg.lambda.value_or(1e2);
  const double delta_max = cfg.delta_max.value_or(1e6);
  const fs::path dir = cfg.out.empty() ? fs::path(".") : fs::path(cfg.out);
  auto backend = make_backend(cfg.backend);

  Json j = json_io::document("reproduction");
  j["system"] = "batch-reactor";
  j["seed"] = *cfg.seed;
  j["noise"] = cfg.noise;
  j["segments"] = cfg.segments;
  j["backend"] = backend->name();
  const auto summary_path = dir / "summary.json";
  auto finish = [&](int code) {
    j["exit_code"] = code;
    emit(j, summary_path.string());
    emit(j, "");
    return code;
  };

  try {
    // Stage 1: data generation.
    const Simulated sim = stage(1, [&] {
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) throw InputError("cannot create " + dir.string() + ": " + ec.message());
      RunConfig sc = cfg;
      sc.tau = batch_reactor::kTau;
      Simulated out = simulate_system(sc);
      save_trajectory(dir / "data.csv", out.traj);
      return out;
    });
    const Trajectory& traj = sim.traj;
    j["data"] = trajectory_summary(traj);

    // Stage 2: Gram blocks.
    const GramBlocks gram = stage(2, [&] { return gram_blocks(traj); });
    emit(json_io::to_json(gram), (dir / "gram.json").string());

    // Stage 3: noise adjoint norm.
    const AdjointNormEstimate noise = stage(3, [&] {
      return sim.w ? adjoint_norm_estimate(*sim.w, 1e-6) : AdjointNormEstimate{};
    });
    j["noise_norm"] = Json{{"value", noise.value}, {"terms", noise.terms}, {"converged", noise.converged}};

    // Stage 4: informativity at c_check, and the largest certified c.
    stage(4, [&] {
      const FeasibilityResult fr = solve_feasibility(NoisyLmi(gram, cfg.c_check), *backend);
      if (fr.verdict == LmiVerdict::kUnknown && !fr.marginal) throw SolverFailure("check: " + fr.message);
      Json chk = feasibility_json(fr);
      chk.erase("solution");
      chk["c"] = cfg.c_check;
      j["check"] = std::move(chk);
      const auto max_c = max_informative_c(gram, cfg.tol_c, *backend);
      j["max_informative_c"] = max_c ? Json(*max_c) : Json(nullptr);
      j["max_informative_c_tol"] = cfg.tol_c;
      return 0;
    });

    // Stage 5: regularized synthesis.
    const SynthesisReport rep = stage(5, [&] { return synthesize_gain_regularized(gram, c, lambda, delta_max, *backend); });
    j["synthesis"] = json_io::to_json(rep);
    if (!rep.feasible) throw StageError{5, kExitNegative, "LMI infeasible at c = " + detail::format_double(c)};

    // Stage 6: verification on sampled members.
    const GainVerification ver = stage(6, [&] { return run_verification(gram, c, rep.K, rep.solution->P, cfg, *cfg.seed); });
    j["verification"] = json_io::to_json(ver);
    j["true_system_s_max"] = is_hurwitz(batch_reactor::A() + batch_reactor::B() * rep.K).s_max;
    if (!ver.passed()) throw StageError{6, kExitNegative, std::to_string(ver.failures.size()) + " verification failures"};

    // Stage 7: open- and closed-loop responses from x0.
    stage(7, [&] {
      require(cfg.horizon > 0.0, "--horizon must be positive");
      const UniformGrid g(cfg.horizon, 1000);
      const Signal zero = Signal::zeros(g, static_cast<int>(batch_reactor::B().cols()));
      const Matrix A = batch_reactor::A();
      const Matrix B = batch_reactor::B();
      const Trajectory open = simulate_lti(A, B, batch_reactor::x0(), zero, std::nullopt, g);
      const Trajectory closed = simulate_lti(A + B * rep.K, B, batch_reactor::x0(), zero, std::nullopt, g);
      write_series(dir / "open_loop.csv", open);
      write_series(dir / "closed_loop.csv", closed);
      bool decreasing = true;
      const int start = g.segment_of(0.5 * cfg.horizon);
      for (int i = start; i < g.segments(); ++i) {
        decreasing = decreasing && closed.x.values().col(i + 1).norm() <= closed.x.values().col(i).norm();
      }
      j["closed_loop"] = Json{{"horizon", cfg.horizon},
                              {"final_norm", closed.x.values().col(g.segments()).norm()},
                              {"open_loop_final_norm", open.x.values().col(g.segments()).norm()},
                              {"norm_decreasing_second_half", decreasing}};
      return 0;
    });
  } catch (const StageError& e) {
    j["failed_stage"] = e.stage;
    j["error"] = e.message;
    std::cerr << "synthctl reproduce: stage " << e.stage << ": " << e.message << "\n";
    return finish(10 * e.stage + e.cls);
  }
  return finish(kExitOk);
}

// ---------------------------------------------------------------------------
// solve-sdp: the in-repo solver behind the external-process contract.

int cmd_solve_sdp() {
  Json in;
  try {
    in = Json::parse(std::cin);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed problem document: ") + e.what());
  }
  const SdpProblem prob = json_io::sdp_problem_from(in);
  InteriorPointBackend ipm;
  std::cout << json_io::to_json(ipm.solve(prob)).dump() << "\n";
  return kExitOk;
}

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--in", cfg.in, "Trajectory CSV (or Gram JSON where accepted)");
  sub->add_option("--out", cfg.out, "Output path (default: stdout)");
  sub->add_option("--n", cfg.n, "Expected state dimension")->check(CLI::PositiveNumber);
  sub->add_option("--m", cfg.m, "Expected input dimension")->check(CLI::PositiveNumber);
  sub->add_option("--tau", cfg.tau, "Expected duration")->check(CLI::PositiveNumber);
  sub->add_option("--tol-rank", cfg.tol_rank, "Relative rank threshold")->check(CLI::NonNegativeNumber);
  sub->add_option("--tol-membership", cfg.tol_membership, "Membership tolerance for sampled systems")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--backend", cfg.backend, "Solver backend: ipm or external:<command> (default: $SYNTHCTL_BACKEND or ipm)");
  sub->add_option("--seed", cfg.seed, "Random seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven informativity checks and stabilizing-gain synthesis"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* sim = app.add_subcommand("simulate", "Simulate a built-in system and write a trajectory CSV");
  add_common(sim, cfg);
  sim->add_option("--system", cfg.system, "Built-in system")->check(CLI::IsMember({"batch-reactor"}));
  sim->add_option("--noise", cfg.noise, "White-noise intensity sigma^2")->check(CLI::NonNegativeNumber);
  sim->add_option("--segments", cfg.segments, "Grid segments M")->check(CLI::PositiveNumber);
  sim->add_option("--u-interp", cfg.u_interp, "Input law: pl or pc")->check(CLI::IsMember({"pl", "pc"}));

  auto* gram = app.add_subcommand("gram", "Compute Gram blocks of a trajectory");
  add_common(gram, cfg);
  gram->add_option("--ell", cfg.ell, "Also emit hat matrices at this level")->check(CLI::Range(1, 20));

  auto* check = app.add_subcommand("check", "Informativity checks");
  add_common(check, cfg);
  check->add_option("--kind", cfg.kind, "identification | stabilization | noisy | all")
      ->check(CLI::IsMember({"identification", "stabilization", "noisy", "all"}));
  check->add_option("--c", cfg.c, "Noise bound c")->check(CLI::NonNegativeNumber);
  check->add_option("--ell", cfg.ell, "Hat level")->check(CLI::Range(1, 20));
  check->add_option("--ell-max", cfg.ell_max, "Largest hat level to search")->check(CLI::Range(1, 20));

  auto* synth = app.add_subcommand("synth", "Synthesize a stabilizing gain");
  add_common(synth, cfg);
  synth->add_option("--c", cfg.c, "Noise bound c (default 0)")->check(CLI::NonNegativeNumber);
  synth->add_option("--lambda", cfg.lambda, "Weight of delta in gamma - lambda delta")->check(CLI::NonNegativeNumber);
  synth->add_option("--delta-max", cfg.delta_max, "Upper bound on delta")->check(CLI::PositiveNumber);
  synth->add_option("--ell", cfg.ell, "Design from hat matrices at this level instead")->check(CLI::Range(1, 20));
  synth->add_option("--samples", cfg.samples, "Sampled members for verification (0 disables)")->check(CLI::NonNegativeNumber);

  auto* repro = app.add_subcommand("reproduce", "Batch-reactor pipeline: simulate, check, synthesize, verify");
  add_common(repro, cfg);
  repro->add_option("--c", cfg.c, "Noise bound for synthesis (default 0.1)")->check(CLI::NonNegativeNumber);
  repro->add_option("--c-check", cfg.c_check, "Noise bound for the informativity check")->check(CLI::NonNegativeNumber);
  repro->add_option("--lambda", cfg.lambda, "Regularization weight (default 1e2)")->check(CLI::NonNegativeNumber);
  repro->add_option("--delta-max", cfg.delta_max, "Upper bound on delta (default 1e6)")->check(CLI::PositiveNumber);
  repro->add_option("--noise", cfg.repro_noise, "White-noise intensity (default 1e-2)")->check(CLI::NonNegativeNumber);
  repro->add_option("--segments", cfg.segments, "Grid segments M")->check(CLI::PositiveNumber);
  repro->add_option("--samples", cfg.samples, "Sampled members for verification")->check(CLI::NonNegativeNumber);
  repro->add_option("--tol-c", cfg.tol_c, "Bisection tolerance for the largest c")->check(CLI::PositiveNumber);

  auto* solve = app.add_subcommand("solve-sdp", "Solve an SDP document from stdin");
  solve->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (sim->parsed()) return cmd_simulate(cfg);
    if (gram->parsed()) return cmd_gram(cfg);
    if (check->parsed()) return cmd_check(cfg);
    if (synth->parsed()) return cmd_synth(cfg);
    if (repro->parsed()) return cmd_reproduce(cfg);
    if (solve->parsed()) return cmd_solve_sdp();
  } catch (const InputError& e) {
    std::cerr << "synthctl: input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NotInformative& e) {
    std::cerr << "synthctl: " << e.what() << "\n";
    return kExitNegative;
  } catch (const SolverFailure& e) {
    std::cerr << "synthctl: solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "synthctl: error: " << e.what() << "\n";
    return kExitSolver;
  }
  return kExitInput;
}

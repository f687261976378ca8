#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "synthctl/batch_reactor.hpp"
#include "synthctl/signals.hpp"

namespace synthctl {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("synthctl_signals_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

TEST(UniformGrid, NodesAreEquallySpaced) {
  const UniformGrid g(2.0, 4);
  EXPECT_DOUBLE_EQ(g.step(), 0.5);
  EXPECT_DOUBLE_EQ(g.node(0), 0.0);
  EXPECT_DOUBLE_EQ(g.node(3), 1.5);
  EXPECT_DOUBLE_EQ(g.node(4), 2.0);
  EXPECT_EQ(g.segment_of(2.0), 3);
  EXPECT_EQ(g.segment_of(0.5), 1);
}

TEST(UniformGrid, RejectsBadParameters) {
  EXPECT_THROW(UniformGrid(0.0, 4), InputError);
  EXPECT_THROW(UniformGrid(1.0, 0), InputError);
}

TEST(Signal, ShapeMustMatchInterpolation) {
  const UniformGrid g(1.0, 3);
  EXPECT_THROW(Signal(g, Interp::kPiecewiseLinear, Matrix::Zero(1, 3)), InputError);
  EXPECT_THROW(Signal(g, Interp::kPiecewiseConstant, Matrix::Zero(1, 4)), InputError);
  Matrix bad = Matrix::Zero(1, 4);
  bad(0, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(Signal(g, Interp::kPiecewiseLinear, bad), InputError);
}

TEST(Signal, EvaluatesBothLaws) {
  const UniformGrid g(1.0, 2);
  const Signal pl(g, Interp::kPiecewiseLinear, (Matrix(1, 3) << 0.0, 1.0, 0.0).finished());
  EXPECT_DOUBLE_EQ(pl(0.25)(0), 0.5);
  EXPECT_DOUBLE_EQ(pl(0.75)(0), 0.5);
  EXPECT_DOUBLE_EQ(pl(1.0)(0), 0.0);
  const Signal pc(g, Interp::kPiecewiseConstant, (Matrix(1, 2) << 2.0, -3.0).finished());
  EXPECT_DOUBLE_EQ(pc(0.1)(0), 2.0);
  EXPECT_DOUBLE_EQ(pc(0.5)(0), -3.0);
}

TEST(MatrixExponential, ZeroGivesIdentity) {
  EXPECT_TRUE(matrix_exponential(Matrix::Zero(3, 3)).isApprox(Matrix::Identity(3, 3)));
}

TEST(MatrixExponential, DiagonalClosedForm) {
  const Matrix e = matrix_exponential(Eigen::Vector2d(1.0, -1.0).asDiagonal().toDenseMatrix());
  EXPECT_NEAR(e(0, 0), std::numbers::e, 1e-14);
  EXPECT_NEAR(e(1, 1), 1.0 / std::numbers::e, 1e-15);
  EXPECT_EQ(e(0, 1), 0.0);
}

TEST(MatrixExponential, MatchesTaylorSeriesOnSmallMatrices) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix m(4, 4);
    for (int i = 0; i < 16; ++i) m.data()[i] = d(rng);
    m *= 0.1 / spectral_norm(m);
    const Matrix ref = oracle::taylor_exp(m, 20);
    EXPECT_LE((matrix_exponential(m) - ref).norm(), 1e-12 * ref.norm());
  }
}

TEST(MatrixExponential, RejectsNonSquare) { EXPECT_THROW(matrix_exponential(Matrix::Zero(2, 3)), InputError); }

TEST(SimulateLti, ZeroDynamicsHoldState) {
  const UniformGrid g(1.0, 8);
  const Vector x0 = Eigen::Vector3d(1.0, -2.0, 0.5);
  const Signal u = Signal::sample(g, 2, Interp::kPiecewiseLinear, [](double t) { return Eigen::Vector2d(std::sin(t), t); });
  const Trajectory tr = simulate_lti(Matrix::Zero(3, 3), Matrix::Zero(3, 2), x0, u, std::nullopt, g);
  for (int i = 0; i <= 8; ++i) EXPECT_EQ(tr.x.values().col(i), x0);
}

TEST(SimulateLti, ScalarExponential) {
  const UniformGrid g(2.0, 16);
  const double a = -0.7;
  const Trajectory tr = simulate_lti(Matrix::Constant(1, 1, a), Matrix::Zero(1, 1), Vector::Ones(1),
                                     Signal::zeros(g, 1), std::nullopt, g);
  for (int i = 0; i <= 16; ++i) EXPECT_NEAR(tr.x.values()(0, i), std::exp(a * g.node(i)), 1e-15);
}

TEST(SimulateLti, DimensionMismatchIsAnInputError) {
  const UniformGrid g(1.0, 4);
  EXPECT_THROW(simulate_lti(Matrix::Zero(2, 2), Matrix::Zero(2, 1), Vector::Zero(3), Signal::zeros(g, 1), std::nullopt, g),
               InputError);
  EXPECT_THROW(simulate_lti(Matrix::Zero(2, 2), Matrix::Zero(2, 2), Vector::Zero(2), Signal::zeros(g, 1), std::nullopt, g),
               InputError);
}

TEST(SimulateLti, MatchesRk4ForBothInputLaws) {
  const Matrix A = batch_reactor::A();
  const Matrix B = batch_reactor::B();
  const UniformGrid g(1.0, 32);
  for (const Interp law : {Interp::kPiecewiseLinear, Interp::kPiecewiseConstant}) {
    const Signal u = Signal::sample(g, 2, law, batch_reactor::input);
    const Signal w = Signal::sample(g, 4, Interp::kPiecewiseConstant, [](double t) {
      return Eigen::Vector4d(std::cos(5 * t), 0.1, -t, 0.3);
    });
    const Trajectory tr = simulate_lti(A, B, batch_reactor::x0(), u, w, g);
    Vector x = batch_reactor::x0();
    for (int i = 0; i < g.segments(); ++i) {
      // Integrate each segment separately so the piecewise data are smooth inside every RK4 run.
      const double t0 = g.node(i);
      const double t1 = g.node(i + 1);
      auto useg = [&](double t) -> Vector { return u.eval_on(i, t); };
      auto wseg = [&](double t) -> Vector { return w.eval_on(i, t); };
      x = oracle::rk4(A, B, x, useg, wseg, t0, t1, 400);
      const Vector got = tr.x.values().col(i + 1);
      EXPECT_LE((got - x).norm(), 1e-8 * std::max(1.0, x.norm())) << "node " << i + 1;
    }
  }
}

TEST(SimulateLti, RefinementLeavesNodesUnchanged) {
  const UniformGrid coarse(1.0, 16);
  const UniformGrid fine(1.0, 32);
  const Signal u = Signal::sample(coarse, 2, Interp::kPiecewiseLinear, batch_reactor::input);
  const Trajectory a = simulate_lti(batch_reactor::A(), batch_reactor::B(), batch_reactor::x0(), u, std::nullopt, coarse);
  const Trajectory b = simulate_lti(batch_reactor::A(), batch_reactor::B(), batch_reactor::x0(), u, std::nullopt, fine);
  for (int i = 0; i <= 16; ++i) {
    const Vector xa = a.x.values().col(i);
    const Vector xb = b.x.values().col(2 * i);
    EXPECT_LE((xa - xb).norm(), 1e-9 * std::max(1.0, xa.norm()));
  }
}

TEST(GaussianWhiteNoise, ZeroIntensityIsZero) {
  const Signal w = gaussian_white_noise(UniformGrid(1.0, 64), 0.0, 3, 5);
  EXPECT_EQ(w.values().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(w.interp(), Interp::kPiecewiseConstant);
}

TEST(GaussianWhiteNoise, DeterministicGivenSeed) {
  const UniformGrid g(1.0, 128);
  EXPECT_EQ(gaussian_white_noise(g, 0.3, 2, 42).values(), gaussian_white_noise(g, 0.3, 2, 42).values());
  EXPECT_NE(gaussian_white_noise(g, 0.3, 2, 42).values(), gaussian_white_noise(g, 0.3, 2, 43).values());
}

TEST(GaussianWhiteNoise, MomentsMatchIntensity) {
  const int segments = 40000;
  const double sigma2 = 1e-2;
  const UniformGrid g(1.0, segments);
  const Signal w = gaussian_white_noise(g, sigma2, 1, 99);
  const double var = sigma2 / g.step();
  const double mean = w.values().mean();
  const double emp = (w.values().array() - mean).square().sum() / (segments - 1);
  EXPECT_LE(std::abs(mean), 5.0 * std::sqrt(var / segments));
  // Var of the sample variance of a Gaussian is 2 var^2 / (N - 1).
  EXPECT_LE(std::abs(emp - var), 5.0 * var * std::sqrt(2.0 / (segments - 1)));
}

TEST(GaussianWhiteNoise, RejectsNegativeIntensity) {
  EXPECT_THROW(gaussian_white_noise(UniformGrid(1.0, 4), -1.0, 1, 0), InputError);
}

TEST(LoadTrajectory, ThreeRowFile) {
  TempDir dir;
  write_file(dir / "a.csv", "t,x1,u1\n0,0,1\n0.5,1,1\n1,0,1\n");
  const Trajectory tr = load_trajectory(dir / "a.csv");
  EXPECT_EQ(tr.n(), 1);
  EXPECT_EQ(tr.m(), 1);
  EXPECT_DOUBLE_EQ(tr.tau(), 1.0);
  EXPECT_EQ(tr.x.grid().segments(), 2);
  EXPECT_EQ(tr.u.interp(), Interp::kPiecewiseLinear);
  EXPECT_DOUBLE_EQ(tr.x.values()(0, 1), 1.0);
}

TEST(LoadTrajectory, NonUniformGrid) {
  TempDir dir;
  write_file(dir / "b.csv", "t,x1,u1\n0,0,1\n0.1,1,1\n0.25,0,1\n");
  try {
    load_trajectory(dir / "b.csv");
    FAIL() << "expected an error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("non-uniform grid"), std::string::npos);
  }
}

TEST(LoadTrajectory, MalformedInputs) {
  TempDir dir;
  write_file(dir / "h.csv", "time,x1,u1\n0,0,1\n1,0,1\n");
  EXPECT_THROW(load_trajectory(dir / "h.csv"), InputError);
  write_file(dir / "n.csv", "t,x1,u1\n0,nan,1\n1,0,1\n");
  EXPECT_THROW(load_trajectory(dir / "n.csv"), InputError);
  write_file(dir / "i.csv", "t,x1,u1\n0,inf,1\n1,0,1\n");
  EXPECT_THROW(load_trajectory(dir / "i.csv"), InputError);
  write_file(dir / "w.csv", "t,x1,u1\n0,abc,1\n1,0,1\n");
  EXPECT_THROW(load_trajectory(dir / "w.csv"), InputError);
  write_file(dir / "s.csv", "t,x1,u1\n0,1\n1,0,1\n");
  EXPECT_THROW(load_trajectory(dir / "s.csv"), InputError);
  EXPECT_THROW(load_trajectory(dir / "missing.csv"), InputError);
}

TEST(LoadTrajectory, DirectiveSelectsPiecewiseConstantInput) {
  TempDir dir;
  write_file(dir / "c.csv", "# u_interp=pc\nt,x1,u1\n0,0,1\n0.5,1,2\n1,0,0\n");
  const Trajectory tr = load_trajectory(dir / "c.csv");
  EXPECT_EQ(tr.u.interp(), Interp::kPiecewiseConstant);
  EXPECT_EQ(tr.u.values().cols(), 2);
  EXPECT_DOUBLE_EQ(tr.u.values()(0, 1), 2.0);
}

TEST(LoadTrajectory, BatchReactorRoundTrip) {
  TempDir dir;
  const UniformGrid g(1.0, 256);
  for (const Interp law : {Interp::kPiecewiseLinear, Interp::kPiecewiseConstant}) {
    const Signal u = Signal::sample(g, 2, law, batch_reactor::input);
    const Signal w = gaussian_white_noise(g, 1e-2, 4, 3);
    const Trajectory tr = simulate_lti(batch_reactor::A(), batch_reactor::B(), batch_reactor::x0(), u, w, g);
    save_trajectory(dir / "run.csv", tr);
    ASSERT_TRUE(fs::exists(dir / "run.json"));
    const Trajectory back = load_trajectory(dir / "run.csv");
    EXPECT_EQ(back.x.grid(), tr.x.grid());
    EXPECT_EQ(back.u.interp(), law);
    EXPECT_EQ(back.x.values(), tr.x.values());
    EXPECT_EQ(back.u.values(), tr.u.values());
  }
}

}  // namespace
}  // namespace synthctl

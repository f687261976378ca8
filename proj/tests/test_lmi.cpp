#include <random>

#include <gtest/gtest.h>

#include "datasets.hpp"
#include "synthctl/batch_reactor.hpp"
#include "synthctl/lmi.hpp"
#include "synthctl/verify.hpp"

namespace synthctl {
namespace {

namespace br = batch_reactor;

GramBlocks zero_gram(int n, int m) {
  GramBlocks g;
  g.n = n;
  g.m = m;
  g.tau = 1.0;
  g.Gdd = Matrix::Zero(n, n);
  g.Gdx = Matrix::Zero(n, n);
  g.Gdu = Matrix::Zero(n, m);
  g.Gxx = Matrix::Zero(n, n);
  g.Gxu = Matrix::Zero(n, m);
  g.Guu = Matrix::Zero(m, m);
  return g;
}

Matrix stack_I_A_B(const Matrix& A, const Matrix& B) {
  const int n = static_cast<int>(A.rows());
  Matrix t(n, 2 * n + B.cols());
  t << Matrix::Identity(n, n), A, B;
  return t;
}

/// Largest c at which a single k makes a + b k < 0 on the whole ellipse {theta : R(theta) <= c},
/// for n = m = 1. With center theta0 and H = V V^*, the largest value of theta v on the ellipse
/// is theta0 v + sqrt((c - r0) v^T H^{-1} v), so the threshold is r0 + sup (theta0 v)^2 / v^T H^{-1} v
/// over v = [1; k] with theta0 v < 0.
double scalar_max_c_oracle(const GramBlocks& g) {
  const Matrix H = g.data_gram();
  const Matrix theta0 = g.cross_gram() * H.inverse();
  const double r0 = (g.Gdd - theta0 * H * theta0.transpose())(0, 0);
  const Vector v_star = -(H * theta0.transpose());
  // Unconstrained maximizer v* = -H theta0^T (Cauchy-Schwarz); admissible when its first entry is positive.
  if (v_star(0) > 0.0) return r0 + (theta0 * H * theta0.transpose())(0, 0);
  // Otherwise the supremum is approached as k -> infinity.
  return r0 + theta0(0, 1) * theta0(0, 1) / H.inverse()(1, 1);
}

class ReactorLmi : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    noisy_ = new GramBlocks(gram_blocks(datasets::noisy_reactor(2048, 1).traj));
  }
  static void TearDownTestSuite() {
    delete noisy_;
    noisy_ = nullptr;
  }
  static GramBlocks* noisy_;
  InteriorPointBackend ipm_;
};
GramBlocks* ReactorLmi::noisy_ = nullptr;

TEST(AssembleN, ZeroDataIsDiagIdentity) {
  const Matrix N = assemble_N(zero_gram(2, 1), 1.0);
  Matrix want = Matrix::Zero(5, 5);
  want.topLeftCorner(2, 2) = Matrix::Identity(2, 2);
  EXPECT_EQ(N, want);
}

TEST(AssembleN, NoiselessResidualVanishesAtTrueSystem) {
  const GramBlocks g = gram_blocks(datasets::noiseless_reactor(1 << 14));
  const Matrix T = stack_I_A_B(br::A(), br::B());
  const Matrix q = T * assemble_N(g, 0.0) * T.transpose();
  // [I A B] N [I A B]^T = c I - R(A, B); R vanishes up to the O(dt^2) state interpolation error.
  EXPECT_LT(q.cwiseAbs().maxCoeff(), 1e-6 * g.scale());
  Matrix theta(4, 6);
  theta << br::A(), br::B();
  EXPECT_LT((q + membership_residual(g, theta)).cwiseAbs().maxCoeff(), 1e-12 * g.scale());
}

TEST_F(ReactorLmi, NoisyQuadraticFormIsPsdAtGeneratingSystem) {
  const Matrix T = stack_I_A_B(br::A(), br::B());
  EXPECT_GE(min_eig(T * assemble_N(*noisy_, 0.1164) * T.transpose()), 0.0);
}

TEST_F(ReactorLmi, SLemmaHypotheses) {
  const int n = 4;
  const Matrix N = assemble_N(*noisy_, 0.1164);
  const Matrix N12 = N.topRightCorner(n, 6);
  const Matrix N22 = N.bottomRightCorner(6, 6);
  EXPECT_LE(max_eig(N22), 1e-12 * noisy_->scale());
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(N22);
  const Matrix schur = N.topLeftCorner(n, n) - N12 * cod.pseudoInverse() * N12.transpose();
  EXPECT_GE(min_eig(schur), -1e-9 * noisy_->scale());
}

TEST(NoisyLmiTemplate, MatchesHandExpandedBlocks) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 3;
    const int m = 1 + trial % 2;
    const GramBlocks g = gram_blocks(datasets::random_system(rng, n, m, 8, 0.1));
    const double c = std::abs(nd(rng));
    Matrix P(n, n);
    Matrix L(m, n);
    for (int i = 0; i < P.size(); ++i) P.data()[i] = nd(rng);
    for (int i = 0; i < L.size(); ++i) L.data()[i] = nd(rng);
    P = symmetrize(P);
    const double a = std::abs(nd(rng));
    const NoisyLmi lmi(g, c, {0.0, 0.0});
    const Matrix got = lmi.assemble(P, L, a);

    Matrix want(2 * n + m, 2 * n + m);
    const Matrix I = Matrix::Identity(n, n);
    want.block(0, 0, n, n) = a * g.Gdd - (a * c + 1.0) * I;
    want.block(0, n, n, n) = -P - a * g.Gdx;
    want.block(0, 2 * n, n, m) = -L.transpose() - a * g.Gdu;
    want.block(n, n, n, n) = a * g.Gxx;
    want.block(n, 2 * n, n, m) = a * g.Gxu;
    want.block(2 * n, 2 * n, m, m) = a * g.Guu;
    want.block(n, 0, n, n) = want.block(0, n, n, n).transpose();
    want.block(2 * n, 0, m, n) = want.block(0, 2 * n, n, m).transpose();
    want.block(2 * n, n, m, n) = want.block(n, 2 * n, n, m).transpose();
    EXPECT_LE((got - want).cwiseAbs().maxCoeff(), 1e-14 * tolerance_scale(want));
    EXPECT_EQ(got, got.transpose());
  }
}

TEST(NoisyLmiTemplate, ZeroMultiplierIsNeverPsd) {
  std::mt19937_64 rng(22);
  const GramBlocks g = gram_blocks(datasets::random_system(rng, 2, 1, 8, 0.0));
  const NoisyLmi lmi(g, 0.5);
  const Matrix blk = lmi.assemble(Matrix::Identity(2, 2), Matrix::Ones(1, 2), 0.0);
  EXPECT_LT(min_eig(blk), 0.0);
}

TEST(SolveFeasibility, ZeroDataIsInfeasible) {
  InteriorPointBackend ipm;
  for (double c : {0.1, 1.0, 10.0}) {
    const FeasibilityResult fr = solve_feasibility(NoisyLmi(zero_gram(2, 1), c), ipm);
    EXPECT_EQ(fr.verdict, LmiVerdict::kInfeasible) << "c = " << c << ": " << fr.message;
  }
}

TEST_F(ReactorLmi, FeasibleAtPointOneAndStabilizing) {
  const FeasibilityResult fr = solve_feasibility(NoisyLmi(*noisy_, 0.1), ipm_);
  ASSERT_EQ(fr.verdict, LmiVerdict::kFeasible) << fr.message;
  const LmiSolution& s = *fr.solution;
  EXPECT_GE(s.min_eig_block, -1e-8 * tolerance_scale(NoisyLmi(*noisy_, 0.1).assemble(s.P, s.L, s.alpha)));
  EXPECT_GE(s.min_eig_P, default_eps_P(*noisy_));
  EXPECT_GT(s.alpha, 0.0);
  EXPECT_LT(is_hurwitz(br::A() + br::B() * s.K()).s_max, 0.0);
}

TEST_F(ReactorLmi, HugeNoiseBoundIsInfeasible) {
  const SynthesisReport rep = synthesize_gain(*noisy_, 1e6, ipm_);
  EXPECT_FALSE(rep.feasible);
}

TEST_F(ReactorLmi, MonotoneInC) {
  const NoisyLmi at(*noisy_, 0.1);
  const FeasibilityResult fr = solve_feasibility(at, ipm_);
  ASSERT_EQ(fr.verdict, LmiVerdict::kFeasible);
  for (double lower : {0.05, 0.01, 0.0}) {
    LmiSolution s = *fr.solution;
    EXPECT_TRUE(sound(NoisyLmi(*noisy_, lower), s)) << "c = " << lower;
  }
}

TEST_F(ReactorLmi, RegularizedSynthesis) {
  const SynthesisReport rep = synthesize_gain_regularized(*noisy_, 0.1, 1e2, 1e6, ipm_, {}, {200, 1});
  ASSERT_TRUE(rep.feasible);
  EXPECT_TRUE(rep.regularized);
  EXPECT_LT(is_hurwitz(br::A() + br::B() * rep.K).s_max, 0.0);
  EXPECT_GE(rep.gamma, spectral_norm(rep.solution->L) * (1.0 - 1e-6));
  EXPECT_GE(rep.delta, default_eps_P(*noisy_) * (1.0 - 1e-9));
  EXPECT_LE(rep.delta, 1e6 * (1.0 + 1e-9));
  EXPECT_GE(rep.solution->min_eig_P, rep.delta * (1.0 - 1e-6));
  ASSERT_TRUE(rep.verification.has_value());
  EXPECT_EQ(rep.verification->samples, 200);
  EXPECT_TRUE(rep.verification->passed());
}

TEST_F(ReactorLmi, RegularizedWithoutDeltaRewardMinimizesNorm) {
  const SynthesisReport rep = synthesize_gain_regularized(*noisy_, 0.1, 0.0, 1e6, ipm_);
  ASSERT_TRUE(rep.feasible);
  const double norm_L = spectral_norm(rep.solution->L);
  EXPECT_GE(rep.gamma, norm_L * (1.0 - 1e-6));
  EXPECT_LE(rep.gamma, norm_L * (1.0 + 1e-4) + 1e-9);
}

TEST_F(ReactorLmi, InfeasibleBaseStaysInfeasibleWhenRegularized) {
  for (double lambda : {0.0, 1e2}) {
    EXPECT_FALSE(synthesize_gain_regularized(*noisy_, 1e6, lambda, 1e6, ipm_).feasible);
  }
}

TEST(SynthesizeGain, NoiselessScalarUnstablePlant) {
  const GramBlocks g = gram_blocks(datasets::scalar(1.0, 1.0, 512));
  InteriorPointBackend ipm;
  const SynthesisReport rep = synthesize_gain(g, 0.0, ipm);
  ASSERT_TRUE(rep.feasible);
  EXPECT_LT(rep.K(0, 0), -1.0);
}

TEST(SynthesizeGain, RejectsBadRegularization) {
  InteriorPointBackend ipm;
  const GramBlocks g = gram_blocks(datasets::scalar(1.0, 1.0, 16));
  EXPECT_THROW(synthesize_gain_regularized(g, 0.0, -1.0, 1e6, ipm), InputError);
  EXPECT_THROW(synthesize_gain_regularized(g, 0.0, 1.0, 0.0, ipm), InputError);
}

TEST(MaxInformativeC, ZeroDataHasNone) {
  InteriorPointBackend ipm;
  EXPECT_FALSE(max_informative_c(zero_gram(1, 1), 1e-3, ipm).has_value());
}

TEST(MaxInformativeC, NoiselessStabilizableIsPositive) {
  InteriorPointBackend ipm;
  const auto c = max_informative_c(gram_blocks(datasets::scalar(1.0, 1.0, 256)), 1e-6, ipm);
  ASSERT_TRUE(c.has_value());
  EXPECT_GT(*c, 0.0);
}

TEST(MaxInformativeC, ScalarClosedForm) {
  InteriorPointBackend ipm;
  int seed = 3;
  for (double a : {-3.0, -1.0, 0.5, 1.0}) {
    for (double b : {1.0, 2.0}) {
      const GramBlocks g = gram_blocks(datasets::scalar(a, b, 256, 1e-2, seed++));
      const double want = scalar_max_c_oracle(g);
      const auto got = max_informative_c(g, 1e-7, ipm);
      ASSERT_TRUE(got.has_value());
      EXPECT_NEAR(*got, want, 1e-5 * std::max(1.0, want)) << "a = " << a << ", b = " << b;
      EXPECT_LE(*got, want + 1e-7);
    }
  }
}

TEST_F(ReactorLmi, MaxInformativeCBracketsTheThreshold) {
  const double tol = 1e-3;
  const auto c = max_informative_c(*noisy_, tol, ipm_);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(solve_feasibility(NoisyLmi(*noisy_, *c), ipm_).verdict, LmiVerdict::kFeasible);
  EXPECT_NE(solve_feasibility(NoisyLmi(*noisy_, *c + tol), ipm_).verdict, LmiVerdict::kFeasible);
}

TEST(Soundness, RandomDatasets) {
  std::mt19937_64 rng(23);
  InteriorPointBackend ipm;
  int feasible = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const GramBlocks g = gram_blocks(datasets::random_system(rng, 1 + trial % 3, 1 + trial % 2, 64, 1e-3));
    const FeasibilityResult fr = solve_feasibility(NoisyLmi(g, 1e-3), ipm);
    ASSERT_NE(fr.verdict, LmiVerdict::kUnknown) << fr.message;
    if (fr.verdict != LmiVerdict::kFeasible) continue;
    ++feasible;
    const LmiSolution& s = *fr.solution;
    const Matrix blk = NoisyLmi(g, 1e-3).assemble(s.P, s.L, s.alpha);
    EXPECT_GE(min_eig(blk), -1e-8 * tolerance_scale(blk));
    EXPECT_GE(min_eig(s.P), default_eps_P(g));
  }
  EXPECT_GT(feasible, 0);
}

}  // namespace
}  // namespace synthctl

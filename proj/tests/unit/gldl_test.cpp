#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "h2spec/errors.hpp"
#include "h2spec/gldl.hpp"
#include "test_support.hpp"

using namespace h2spec;
using h2spec::test::build;
using h2spec::test::count_below;
using h2spec::test::random_symmetric;
using h2spec::test::separated_shifts;
using h2spec::test::spectral_radius;

namespace {

Inertia inertia_by_eigenvalues(const Matrix& A, double tol = 1e-12) {
  Inertia in;
  for (double l : h2spec::test::reference_eigenvalues(A)) {
    if (l < -tol) ++in.neg;
    else if (l > tol) ++in.pos;
    else ++in.zero;
  }
  return in;
}

BasisSplit random_split(int n, int rank, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  const Matrix M = Matrix::NullaryExpr(n, rank, [&] { return g(rng); });
  return rrqr_truncated(M, 1e-14);
}

}  // namespace

TEST(Skeleton, IdentityBasisLeavesBlockUnchanged) {
  std::mt19937_64 rng(1);
  const Matrix D = random_symmetric(6, rng);
  BasisSplit id;
  id.U_R = Matrix::Identity(6, 6);
  id.U_S = Matrix(6, 0);
  EXPECT_EQ(skeletonize_dense(D, id, id), D);
}

TEST(Skeleton, DiagonalBlockKeepsSymmetryAndSpectrum) {
  std::mt19937_64 rng(2);
  const Matrix D = random_symmetric(12, rng);
  const BasisSplit b = random_split(12, 4, rng);
  const Matrix S = skeletonize_dense(D, b, b);
  EXPECT_LE((S - S.transpose()).cwiseAbs().maxCoeff(), 1e-13 * D.cwiseAbs().maxCoeff());
  const std::vector<double> a = eig_oracle(D), c = eig_oracle(S);
  for (int i = 0; i < 12; ++i) EXPECT_NEAR(a[i], c[i], 1e-10);
}

TEST(Skeleton, LowRankEmbedding) {
  const Matrix z = skeletonize_lowrank(Matrix(0, 0), 3, 2);
  EXPECT_TRUE(z.isZero(0.0));
  EXPECT_EQ(z.rows(), 3);
  EXPECT_EQ(z.cols(), 2);
  const Matrix C = Matrix::Random(2, 3);
  const Matrix m = skeletonize_lowrank(C, 4, 1);
  EXPECT_EQ(m.rows(), 6);
  EXPECT_EQ(m.cols(), 4);
  EXPECT_TRUE(m.topRows(4).isZero(0.0));
  EXPECT_TRUE(m.leftCols(1).isZero(0.0));
  EXPECT_EQ(Matrix(m.bottomRightCorner(2, 3)), C);
}

TEST(FactorRedundant, TrivialCase) {
  Matrix S = Matrix::Identity(4, 4);
  S(3, 3) = 5.0;
  const RedundantFactor f = factor_redundant(S, 2);
  EXPECT_TRUE(f.rr.L.isIdentity(0.0));
  EXPECT_TRUE(f.rr.block_diagonal().isIdentity(0.0));
  EXPECT_TRUE(f.L_sr.isZero(0.0));
  EXPECT_EQ(f.schur, S.bottomRightCorner(2, 2));
}

TEST(FactorRedundant, HandEliminationExample) {
  Matrix S(3, 3);
  S << 2, 0, 1, 0, 2, 1, 1, 1, 2;
  const RedundantFactor f = factor_redundant(S, 2);
  ASSERT_EQ(f.schur.rows(), 1);
  EXPECT_NEAR(f.schur(0, 0), 1.0, 1e-15);
}

TEST(FactorRedundant, HaynsworthAdditivity) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> size(2, 20);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = size(rng);
    const int r = std::uniform_int_distribution<int>(1, n - 1)(rng);
    const Matrix S = random_symmetric(n, rng);
    RedundantFactor f;
    try {
      f = factor_redundant(S, r);
    } catch (const Breakdown&) {
      continue;
    }
    Inertia in = inertia_of(f.rr);
    in += inertia_by_eigenvalues(f.schur);
    EXPECT_EQ(in, inertia_by_eigenvalues(S));
  }
}

TEST(Gldl, SingleBlockWrapsDenseLdl) {
  const RankStructuredMatrix H = build(generate_circle(16), Format::H2, 1e-8, 16);
  const double mu = 700.0;
  const GldlFactorization f = generalized_ldl(H, mu);
  Matrix A = H.dense.at({0, 0});
  A.diagonal().array() -= mu;
  const LdlResult ref = ldl_symmetric(A);
  ASSERT_EQ(f.pivots.size(), 1u);
  EXPECT_EQ(f.pivots[0].ldl.diag, ref.diag);
  EXPECT_EQ(f.inertia, inertia_of(ref));
}

TEST(Gldl, InertiaMatchesOracleAllFormats) {
  std::mt19937_64 rng(7);
  const PointCloud circle = generate_circle(256);
  const PointCloud line = generate_grid(200, 1);
  const PointCloud cube = generate_grid(6, 3);
  for (const PointCloud* c : {&circle, &line, &cube})
    for (Format f : {Format::BLR2, Format::HSS, Format::H2}) {
      const double eps = 1e-8;
      const RankStructuredMatrix H = build(*c, f, eps);
      const std::vector<double> ev = eig_oracle(reconstruct_dense(H));
      const double norm = spectral_radius(ev);
      std::vector<double> mus = separated_shifts(ev, 20, 10 * eps * norm, rng);
      std::sort(mus.begin(), mus.end());
      int last = 0;
      for (double mu : mus) {
        const InertiaCount in = inertia(H, mu);
        EXPECT_EQ(in.neg, count_below(ev, mu)) << format_name(f) << " mu=" << mu;
        EXPECT_EQ(in.neg + in.zero + in.pos, H.n());
        EXPECT_GE(in.neg, last);
        last = in.neg;
      }
      const Interval g = gershgorin_interval(H);
      EXPECT_EQ(inertia(H, g.lo - 1.0).neg, 0);
      EXPECT_EQ(inertia(H, g.hi + 1.0).neg, H.n());
    }
}

TEST(Gldl, FactorizationResidual) {
  std::mt19937_64 rng(8);
  const PointCloud circle = generate_circle(256);
  const PointCloud line = generate_grid(256, 1);
  for (const PointCloud* c : {&circle, &line})
    for (Format f : {Format::BLR2, Format::HSS, Format::H2}) {
      const double eps = 1e-8;
      const RankStructuredMatrix H = build(*c, f, eps);
      const Matrix A = reconstruct_dense(H);
      const std::vector<double> ev = eig_oracle(A);
      const double norm = spectral_radius(ev);
      GldlOptions opt;
      opt.record_factors = true;
      for (double mu : separated_shifts(ev, 5, 10 * eps * norm, rng)) {
        const GldlFactorization F = generalized_ldl(H, mu, opt);
        Matrix S = A;
        S.diagonal().array() -= mu;
        EXPECT_LE(spectral_norm_symmetric(S - reconstruct_factorization(F)), 50 * eps * norm) << format_name(f);
      }
    }
  GldlFactorization plain = generalized_ldl(build(circle, Format::HSS, 1e-6), 1.0);
  EXPECT_THROW(reconstruct_factorization(plain), std::invalid_argument);
}

TEST(Gldl, CongruenceInvarianceUnderReordering) {
  const PointCloud c = generate_circle(192);
  std::vector<int> order(192);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> shuffled = sfc_order(c);
  std::reverse(shuffled.begin(), shuffled.end());
  const ClusterTree t1 = build_tree(c, order, 16), t2 = build_tree(c, shuffled, 16);
  const RankStructuredMatrix H1 = construct(laplace_kernel(), t1, classify(t1, Admissibility::strong()), 1e-10);
  const RankStructuredMatrix H2 = construct(laplace_kernel(), t2, classify(t2, Admissibility::strong()), 1e-10);
  const std::vector<double> ev = eig_oracle(reconstruct_dense(H1));
  std::mt19937_64 rng(4);
  for (double mu : separated_shifts(ev, 10, 1e-4, rng)) EXPECT_EQ(inertia(H1, mu).neg, inertia(H2, mu).neg);
}

TEST(Gldl, FillInPatternOnStrongChain) {
  const RankStructuredMatrix H = build(generate_grid(128, 1), Format::H2, 1e-8, 16);
  ASSERT_EQ(H.depth(), 3);
  GldlEngine engine(H, 0.5, {});
  engine.init_leaf_level();
  EXPECT_TRUE(engine.system().fill_pairs().empty());
  engine.eliminate(0);
  // the first leaf only has neighbour 1, so no far pair receives an update
  EXPECT_TRUE(engine.system().fill_pairs().empty());
  engine.eliminate(1);
  const auto fills = engine.system().fill_pairs();
  EXPECT_EQ(fills, (std::vector<std::pair<int, int>>{{0, 2}, {2, 0}}));
}

TEST(Gldl, WeakFormatsNeverFill) {
  for (Format f : {Format::BLR2, Format::HSS}) {
    const RankStructuredMatrix H = build(generate_circle(128), f, 1e-8);
    GldlEngine engine(H, 3.0, {});
    engine.init_leaf_level();
    for (int k = 0; k < static_cast<int>(engine.system().clusters.size()); ++k) {
      engine.eliminate(k);
      EXPECT_TRUE(engine.system().fill_pairs().empty());
    }
  }
}

TEST(Gldl, PivotInertiaSumsToTotal) {
  const RankStructuredMatrix H = build(generate_grid(128, 1), Format::H2, 1e-8);
  const GldlFactorization f = generalized_ldl(H, 100.0);
  Inertia total;
  int coords = 0;
  for (const auto& p : f.pivots) {
    total += inertia_of(p.ldl);
    coords += p.ldl.size();
  }
  EXPECT_EQ(total, f.inertia);
  EXPECT_EQ(coords, H.n());
  EXPECT_FALSE(f.levels.empty());
}

TEST(Gldl, RankZeroLeavesMergeToEmptyRoot) {
  Matrix A = Matrix::Zero(32, 32);
  for (int i = 0; i < 32; ++i) A(i, i) = i + 1.0;
  const RankStructuredMatrix H = compress_dense(A, 8, Format::HSS, 1e-10);
  EXPECT_EQ(max_rank(H), 0);
  const GldlFactorization f = generalized_ldl(H, 10.5);
  EXPECT_EQ(f.inertia, (Inertia{10, 0, 22}));
}

TEST(Inertia, RetryNudgesOffExactEigenvalue) {
  Matrix A = Matrix::Zero(4, 4);
  A.diagonal() << 1, 2, 3, 4;
  const RankStructuredMatrix H = compress_dense(A, 4, Format::HSS, 1e-10);
  EXPECT_THROW(generalized_ldl(H, 2.0), Breakdown);
  const InertiaCount in = inertia(H, 2.0);
  EXPECT_EQ(in.retries, 1);
  EXPECT_GT(in.mu_used, 2.0);
  EXPECT_EQ(in.neg, 2);
  EXPECT_EQ(in.neg + in.zero + in.pos, 4);
}

TEST(Inertia, ZeroMatrixRetriesOnceAtZero) {
  const RankStructuredMatrix H = compress_dense(Matrix::Zero(4, 4), 4, Format::HSS, 1e-10);
  const InertiaCount away = inertia(H, 1.0);
  EXPECT_EQ(away.neg, 4);
  EXPECT_EQ(away.pos, 0);
  EXPECT_EQ(away.retries, 0);
  const InertiaCount at = inertia(H, 0.0);
  EXPECT_EQ(at.retries, 1);
  EXPECT_EQ(at.neg, 4);
}

TEST(Dump, EmitsOneRecordPerPivotBlock) {
  const RankStructuredMatrix H = build(generate_circle(64), Format::HSS, 1e-8);
  const GldlFactorization f = generalized_ldl(H, 500.0);
  std::ostringstream out;
  dump_factorization(out, f);
  std::istringstream in(out.str());
  std::string line;
  int pivots = 0, levels = 0, total = 0;
  while (std::getline(in, line)) {
    ++total;
    EXPECT_EQ(line.front(), '{');
    EXPECT_EQ(line.back(), '}');
    if (line.find("\"type\":\"pivots\"") != std::string::npos) ++pivots;
    if (line.find("\"type\":\"level\"") != std::string::npos) ++levels;
  }
  EXPECT_EQ(pivots, static_cast<int>(f.pivots.size()));
  EXPECT_EQ(levels, static_cast<int>(f.levels.size()));
  EXPECT_EQ(total, pivots + levels + 1);
  EXPECT_NE(out.str().find("\"neg\":" + std::to_string(f.inertia.neg)), std::string::npos);
}

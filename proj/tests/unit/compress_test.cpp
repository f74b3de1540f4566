#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <random>

#include "h2spec/compress.hpp"
#include "h2spec/errors.hpp"
#include "test_support.hpp"

using namespace h2spec;
using h2spec::test::build;

namespace {

Matrix exact(const RankStructuredMatrix& H) { return kernel_matrix(laplace_kernel(), H.tree); }

double rel_error(const RankStructuredMatrix& H) {
  const Matrix A = exact(H);
  return spectral_norm_symmetric(reconstruct_dense(H) - A) / spectral_norm_symmetric(A);
}

}  // namespace

TEST(Format, NamesRoundTrip) {
  for (Format f : {Format::BLR2, Format::HSS, Format::H2}) EXPECT_EQ(parse_format(format_name(f)), f);
  EXPECT_THROW(parse_format("hodlr"), std::invalid_argument);
  EXPECT_EQ(admissibility_for(Format::H2, 2.0).kind, Admissibility::Kind::Strong);
  EXPECT_DOUBLE_EQ(admissibility_for(Format::H2, 2.0).eta, 2.0);
  EXPECT_EQ(admissibility_for(Format::HSS, 1.0).kind, Admissibility::Kind::Weak);
  EXPECT_EQ(admissibility_for(Format::BLR2, 1.0).kind, Admissibility::Kind::Flat);
}

TEST(Construct, SingleLeafIsDense) {
  const RankStructuredMatrix H = build(generate_circle(16), Format::HSS, 1e-8, 16);
  EXPECT_EQ(H.depth(), 0);
  EXPECT_EQ(max_rank(H), 0);
  EXPECT_EQ(H.dense.size(), 1u);
  EXPECT_EQ(reconstruct_dense(H), exact(H));
}

TEST(Construct, GlobalApproximationBound) {
  const PointCloud circle = generate_circle(256);
  const PointCloud line = generate_grid(256, 1);
  const PointCloud cube = generate_lattice({8, 8, 4}, 3);
  for (const PointCloud* c : {&circle, &line, &cube})
    for (Format f : {Format::BLR2, Format::HSS, Format::H2})
      for (double eps : {1e-4, 1e-8, 1e-10}) {
        const RankStructuredMatrix H = build(*c, f, eps);
        EXPECT_LE(rel_error(H), 50 * eps) << format_name(f) << " eps=" << eps << " dim=" << c->dim;
      }
}

TEST(Construct, WeakCircleReconstruction) {
  const RankStructuredMatrix H = build(generate_circle(128), Format::HSS, 1e-10);
  EXPECT_LE(rel_error(H), 1e-8);
}

TEST(Construct, ReconstructionIsSymmetric) {
  for (Format f : {Format::BLR2, Format::HSS, Format::H2}) {
    const RankStructuredMatrix H = build(generate_circle(200), f, 1e-6);
    const Matrix A = reconstruct_dense(H);
    EXPECT_LE((A - A.transpose()).cwiseAbs().maxCoeff(), 1e-13 * A.cwiseAbs().maxCoeff());
    for (const auto& lvl : H.couplings)
      for (const auto& [key, S] : lvl)
        EXPECT_EQ(H.coupling(static_cast<int>(&lvl - H.couplings.data()), key.second, key.first), S.transpose());
  }
}

TEST(Construct, NestedBasesAreOrthonormal) {
  for (Format f : {Format::HSS, Format::H2}) {
    const RankStructuredMatrix H = build(generate_circle(256), f, 1e-8);
    for (int l = 0; l <= H.depth(); ++l) {
      if (!H.has_basis(l)) continue;
      for (int i = 0; i < H.tree.clusters(l); ++i) {
        const BasisSplit& b = H.bases[l][i];
        const Matrix Q = b.ordered();
        EXPECT_LE((Q.transpose() * Q - Matrix::Identity(Q.cols(), Q.cols())).cwiseAbs().maxCoeff(), 1e-12);
        const Matrix U = expanded_basis(H, l, i);
        EXPECT_EQ(U.rows(), H.tree.node(l, i).size());
        EXPECT_EQ(U.cols(), b.rank);
        if (b.rank > 0)
          EXPECT_LE((U.transpose() * U - Matrix::Identity(b.rank, b.rank)).cwiseAbs().maxCoeff(), 1e-12);
        if (l < H.depth() && H.has_basis(l + 1))
          EXPECT_EQ(b.rows(), H.rank(l + 1, 2 * i) + H.rank(l + 1, 2 * i + 1));
      }
    }
  }
}

TEST(Construct, LeafBasisMeetsRowTolerance) {
  const PointCloud c = generate_circle(64);
  const ClusterTree t = build_tree(c, sfc_order(c), 8);
  const BlockStructure s = classify(t, Admissibility::weak());
  for (int i = 0; i < t.clusters(t.depth); ++i) {
    const RowConcat rc = row_concat(laplace_kernel(), t, s, t.depth, i);
    const BasisSplit b = build_leaf_basis(laplace_kernel(), t, s, i, 1e-10);
    EXPECT_EQ(rc.columns.size(), 56u);
    EXPECT_LE(spectral_norm(b.U_S * b.U_S.transpose() * rc.block - rc.block), 1e-10 * spectral_norm(rc.block));
  }
}

TEST(Construct, StrongNeighbourBlocksAreVerbatim) {
  const RankStructuredMatrix H = build(generate_grid(64, 1), Format::H2, 1e-8, 8);
  const Matrix A = exact(H);
  for (const auto& [key, D] : H.dense) {
    const auto& ni = H.tree.node(H.depth(), key.first);
    const auto& nj = H.tree.node(H.depth(), key.second);
    EXPECT_EQ(D, A.block(ni.begin, nj.begin, ni.size(), nj.size()));
  }
  const RankStructuredMatrix H256 = build(generate_grid(256, 1), Format::H2, 1e-8);
  const Matrix R = reconstruct_dense(H256);
  const Matrix A256 = exact(H256);
  for (const auto& [key, D] : H256.dense) {
    const auto& ni = H256.tree.node(H256.depth(), key.first);
    const auto& nj = H256.tree.node(H256.depth(), key.second);
    EXPECT_EQ(R.block(ni.begin, nj.begin, ni.size(), nj.size()), A256.block(ni.begin, nj.begin, ni.size(), nj.size()));
  }
}

TEST(Construct, Blr2MatchesOneLevelHss) {
  const PointCloud c = generate_circle(64);
  const ClusterTree t = build_tree(c, sfc_order(c), 32);
  ASSERT_EQ(t.depth, 1);
  const RankStructuredMatrix weak = construct(laplace_kernel(), t, classify(t, Admissibility::weak()), 1e-8);
  const RankStructuredMatrix flat = construct(laplace_kernel(), t, classify(t, Admissibility::flat()), 1e-8);
  EXPECT_EQ(weak.format, Format::BLR2);
  EXPECT_EQ(flat.format, Format::BLR2);
  EXPECT_EQ(weak.couplings[1].at({0, 1}), flat.couplings[1].at({0, 1}));
}

TEST(Construct, ExactLowRankOffDiagonal) {
  // two well separated groups; the off-diagonal block is x * y^T + 1 * 1^T scaled
  const int n = 32;
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g;
  Matrix X = Matrix::NullaryExpr(n, 3, [&] { return g(rng); });
  Matrix A = X * X.transpose();
  A.topLeftCorner(16, 16) += Matrix::Identity(16, 16) * 50;
  A.bottomRightCorner(16, 16) += Matrix::Identity(16, 16) * 50;
  const RankStructuredMatrix H = compress_dense(A, 16, Format::HSS, 1e-12);
  EXPECT_EQ(max_rank(H), 3);
}

TEST(Construct, RanksStayBoundedOnCircle) {
  std::vector<int> ranks;
  for (int n : {256, 512, 1024}) ranks.push_back(max_rank(build(generate_circle(n), Format::HSS, 1e-8, 32)));
  for (std::size_t i = 1; i < ranks.size(); ++i) EXPECT_LE(ranks[i], 1.2 * ranks[i - 1]);
}

TEST(Shift, ZeroShiftIsIdentical) {
  const RankStructuredMatrix H = build(generate_circle(128), Format::H2, 1e-8);
  const RankStructuredMatrix S = shift_diagonal(H, 0.0);
  EXPECT_EQ(S.dense, H.dense);
  EXPECT_EQ(S.skeleton, H.skeleton);
  EXPECT_EQ(S.couplings, H.couplings);
  EXPECT_EQ(S.shift, 0.0);
}

TEST(Shift, CommutesWithReconstruction) {
  for (Format f : {Format::BLR2, Format::HSS, Format::H2}) {
    const RankStructuredMatrix H = build(generate_circle(128), f, 1e-8);
    const double mu = 37.25;
    const RankStructuredMatrix S = shift_diagonal(H, mu);
    const Matrix expect = reconstruct_dense(H) - mu * Matrix::Identity(H.n(), H.n());
    EXPECT_EQ(reconstruct_dense(S), expect);
    EXPECT_EQ(S.couplings, H.couplings);
    EXPECT_DOUBLE_EQ(S.shift, mu);
    const RankStructuredMatrix back = shift_diagonal(S, -mu);
    EXPECT_LE((reconstruct_dense(back) - reconstruct_dense(H)).cwiseAbs().maxCoeff(),
              1e-15 * reconstruct_dense(H).cwiseAbs().maxCoeff());
  }
}

TEST(Reconstruct, LeafRowsMatchDense) {
  const RankStructuredMatrix H = build(generate_circle(128), Format::H2, 1e-8);
  const Matrix A = reconstruct_dense(H);
  for (int i = 0; i < H.tree.clusters(H.depth()); ++i) {
    const auto& nd = H.tree.node(H.depth(), i);
    EXPECT_EQ(reconstruct_leaf_rows(H, i), A.middleRows(nd.begin, nd.size()));
  }
}

TEST(Reconstruct, RefusesAboveCap) {
  const RankStructuredMatrix H = build(generate_circle(64), Format::HSS, 1e-8);
  setenv("H2SPEC_ORACLE_CAP", "32", 1);
  EXPECT_THROW(reconstruct_dense(H), OracleTooLarge);
  unsetenv("H2SPEC_ORACLE_CAP");
}

TEST(Metrics, StorageAndGershgorin) {
  const RankStructuredMatrix H = build(generate_circle(256), Format::H2, 1e-8);
  EXPECT_GT(storage_bytes(H), 0u);
  EXPECT_LT(storage_bytes(H), sizeof(double) * 256u * 256u);
  const std::vector<int> per_level = max_rank_per_level(H);
  EXPECT_EQ(static_cast<int>(per_level.size()), H.depth() + 1);
  EXPECT_EQ(*std::max_element(per_level.begin(), per_level.end()), max_rank(H));
  const Interval g = gershgorin_interval(H);
  const Interval d = gershgorin_interval(reconstruct_dense(H));
  EXPECT_NEAR(g.lo, d.lo, 1e-9 * std::abs(d.lo) + 1e-9);
  EXPECT_NEAR(g.hi, d.hi, 1e-9 * d.hi);
}

TEST(MatrixFile, RoundTripAndCompress) {
  std::mt19937_64 rng(21);
  const Matrix A = h2spec::test::random_symmetric(40, rng);
  const std::string path = (std::filesystem::temp_directory_path() / "h2spec_matrix_test.bin").string();
  write_symmetric_matrix(path, A);
  const Matrix B = read_symmetric_matrix(path);
  std::remove(path.c_str());
  EXPECT_EQ(A, B);
  EXPECT_THROW(read_symmetric_matrix(path), std::runtime_error);

  const PointCloud idx = index_points(5);
  EXPECT_EQ(idx.dim, 1);
  EXPECT_DOUBLE_EQ(idx.points[3][0], 3.0);
  const KernelFn k = matrix_entry_kernel(std::make_shared<const Matrix>(A));
  EXPECT_DOUBLE_EQ(k(idx.points[1], idx.points[4]), A(1, 4));

  const PointCloud c = generate_circle(96);
  const ClusterTree t = build_tree(c, sfc_order(c), 96);
  const Matrix K = kernel_matrix(laplace_kernel(), t);
  const RankStructuredMatrix H = compress_dense(K, 16, Format::H2, 1e-9);
  EXPECT_EQ(H.format, Format::H2);
  EXPECT_LE(spectral_norm_symmetric(reconstruct_dense(H) - K), 50 * 1e-9 * spectral_norm_symmetric(K));
}

#include "h2spec/compress.hpp"

#include "h2spec/errors.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace h2spec {

const char* format_name(Format f) {
  switch (f) {
    case Format::BLR2: return "blr2";
    case Format::HSS: return "hss";
    case Format::H2: return "h2";
  }
  return "?";
}

Format parse_format(const std::string& name) {
  if (name == "blr2") return Format::BLR2;
  if (name == "hss") return Format::HSS;
  if (name == "h2") return Format::H2;
  throw std::invalid_argument("unknown format '" + name + "' (expected blr2, hss or h2)");
}

Admissibility admissibility_for(Format f, double eta) {
  switch (f) {
    case Format::BLR2: return Admissibility::flat();
    case Format::HSS: return Admissibility::weak();
    case Format::H2: return Admissibility::strong(eta);
  }
  return Admissibility::strong(eta);
}

Matrix RankStructuredMatrix::dense_block(int i, int j) const {
  if (i <= j) return dense.at({i, j});
  return dense.at({j, i}).transpose();
}

Matrix RankStructuredMatrix::coupling(int level, int i, int j) const {
  if (i <= j) return couplings[level].at({i, j});
  return couplings[level].at({j, i}).transpose();
}

namespace {

Matrix kernel_block(const KernelFn& kernel, const PointCloud& pts, int rb, int re,
                    const std::vector<int>& cols) {
  Matrix M(re - rb, static_cast<Eigen::Index>(cols.size()));
  for (Eigen::Index c = 0; c < M.cols(); ++c)
    for (int r = rb; r < re; ++r) M(r - rb, c) = kernel(pts.points[r], pts.points[cols[c]]);
  return M;
}

Matrix kernel_block(const KernelFn& kernel, const PointCloud& pts, int rb, int re, int cb, int ce) {
  Matrix M(re - rb, ce - cb);
  for (int c = cb; c < ce; ++c)
    for (int r = rb; r < re; ++r) M(r - rb, c - cb) = kernel(pts.points[r], pts.points[c]);
  return M;
}

std::vector<int> merge_ranges(const std::vector<int>& base, const ClusterTree& tree, int level,
                              const std::vector<int>& partners) {
  std::vector<int> add;
  for (int j : partners) {
    const auto& nd = tree.node(level, j);
    for (int c = nd.begin; c < nd.end; ++c) add.push_back(c);
  }
  std::sort(add.begin(), add.end());
  std::vector<int> out;
  out.reserve(base.size() + add.size());
  std::set_union(base.begin(), base.end(), add.begin(), add.end(), std::back_inserter(out));
  return out;
}

// Columns of P (indexed by `from`) restricted to the subset `to`.
Matrix restrict_columns(const Matrix& P, const std::vector<int>& from, const std::vector<int>& to) {
  Matrix out(P.rows(), static_cast<Eigen::Index>(to.size()));
  std::size_t f = 0;
  for (std::size_t t = 0; t < to.size(); ++t) {
    while (from[f] != to[t]) ++f;
    out.col(t) = P.col(f);
  }
  return out;
}

Eigen::Index column_offset(const std::vector<int>& cols, int value) {
  return std::lower_bound(cols.begin(), cols.end(), value) - cols.begin();
}

struct Builder {
  const KernelFn& kernel;
  const ClusterTree& tree;
  const BlockStructure& s;
  double eps;
  int lstar;
  RankStructuredMatrix& H;
  std::map<std::tuple<int, int, int>, Matrix> projected;  // (level, i, j) -> Ubig_i^T A(i, j)

  Matrix visit(int level, int i, const std::vector<int>& ff_parent, std::vector<int>& ff) {
    ff = merge_ranges(ff_parent, tree, level, s.far[level][i]);
    const auto& nd = tree.node(level, i);
    Matrix M;
    if (level == tree.depth) {
      if (level < lstar) return {};
      M = kernel_block(kernel, tree.points, nd.begin, nd.end, ff);
    } else {
      std::vector<int> ff1, ff2;
      Matrix P1 = visit(level + 1, 2 * i, ff, ff1);
      Matrix P2 = visit(level + 1, 2 * i + 1, ff, ff2);
      if (level < lstar) return {};
      M.resize(P1.rows() + P2.rows(), static_cast<Eigen::Index>(ff.size()));
      M << restrict_columns(P1, ff1, ff), restrict_columns(P2, ff2, ff);
    }
    H.bases[level][i] = rrqr_truncated(M, eps);
    Matrix P = H.bases[level][i].U_S.transpose() * M;
    for (int j : s.far[level][i]) {
      if (j <= i) continue;
      const auto& nj = tree.node(level, j);
      projected[{level, i, j}] = P.middleCols(column_offset(ff, nj.begin), nj.size());
    }
    return P;
  }
};

Format deduce_format(const BlockStructure& s) {
  switch (s.admissibility.kind) {
    case Admissibility::Kind::Flat: return Format::BLR2;
    case Admissibility::Kind::Weak: return s.depth <= 1 ? Format::BLR2 : Format::HSS;
    case Admissibility::Kind::Strong: return Format::H2;
  }
  return Format::H2;
}

using Expanded = std::vector<std::vector<Matrix>>;

Expanded all_expanded(const RankStructuredMatrix& H) {
  const int L = H.depth();
  Expanded U(L + 1);
  for (int l = L; l >= 0; --l) {
    if (!H.has_basis(l)) break;
    U[l].resize(H.tree.clusters(l));
    for (int i = 0; i < H.tree.clusters(l); ++i) {
      const auto& b = H.bases[l][i];
      if (l == L) {
        U[l][i] = b.U_S;
        continue;
      }
      const Matrix& U1 = U[l + 1][2 * i];
      const Matrix& U2 = U[l + 1][2 * i + 1];
      Matrix E(U1.rows() + U2.rows(), b.rank);
      E.topRows(U1.rows()).noalias() = U1 * b.U_S.topRows(U1.cols());
      E.bottomRows(U2.rows()).noalias() = U2 * b.U_S.bottomRows(U2.cols());
      U[l][i] = std::move(E);
    }
  }
  return U;
}

Matrix leaf_rows(const RankStructuredMatrix& H, const Expanded& U, int leaf) {
  const int L = H.depth();
  const auto& nd = H.tree.node(L, leaf);
  Matrix R = Matrix::Zero(nd.size(), H.n());
  for (int j : H.structure.near[L][leaf]) {
    const auto& nj = H.tree.node(L, j);
    R.middleCols(nj.begin, nj.size()) = H.dense_block(leaf, j);
  }
  for (int l = L; l >= 0; --l) {
    if (!H.has_basis(l)) break;
    const int a = leaf >> (L - l);
    const auto& na = H.tree.node(l, a);
    for (int j : H.structure.far[l][a]) {
      const auto& nj = H.tree.node(l, j);
      R.middleCols(nj.begin, nj.size()).noalias() =
          U[l][a].middleRows(nd.begin - na.begin, nd.size()) * H.coupling(l, a, j) * U[l][j].transpose();
    }
  }
  return R;
}

double max_abs(const Matrix& M) { return M.size() ? M.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

std::vector<int> far_field_columns(const ClusterTree& tree, const BlockStructure& s, int level, int i) {
  std::vector<int> ff;
  for (int l = 1; l <= level; ++l) ff = merge_ranges(ff, tree, l, s.far[l][i >> (level - l)]);
  return ff;
}

RowConcat row_concat(const KernelFn& kernel, const ClusterTree& tree, const BlockStructure& s, int level,
                     int i) {
  RowConcat rc;
  rc.columns = far_field_columns(tree, s, level, i);
  const auto& nd = tree.node(level, i);
  rc.block = kernel_block(kernel, tree.points, nd.begin, nd.end, rc.columns);
  return rc;
}

BasisSplit build_leaf_basis(const KernelFn& kernel, const ClusterTree& tree, const BlockStructure& s,
                            int leaf, double eps) {
  return rrqr_truncated(row_concat(kernel, tree, s, tree.depth, leaf).block, eps);
}

BasisSplit build_transfer(const Matrix& stacked_children_rows, double eps) {
  return rrqr_truncated(stacked_children_rows, eps);
}

RankStructuredMatrix construct(const KernelFn& kernel, const ClusterTree& tree,
                               const BlockStructure& structure, double eps) {
  if (!(eps > 0)) throw std::invalid_argument("construct: eps must be positive");
  if (structure.depth != tree.depth) throw std::invalid_argument("construct: structure/tree mismatch");
  RankStructuredMatrix H;
  H.format = deduce_format(structure);
  H.tree = tree;
  H.structure = structure;
  H.eps = eps;
  const int L = tree.depth;
  const int lstar = structure.coarsest_lowrank_level();
  H.bases.resize(L + 1);
  H.couplings.resize(L + 1);

  if (lstar >= 0) {
    for (int l = lstar; l <= L; ++l) H.bases[l].resize(tree.clusters(l));
    Builder b{kernel, tree, structure, eps, lstar, H, {}};
    std::vector<int> ff;
    b.visit(0, 0, {}, ff);
    const Expanded U = all_expanded(H);
    for (auto& [key, T] : b.projected) {
      const auto [l, i, j] = key;
      H.couplings[l][{i, j}] = T * U[l][j];
    }
  }

  for (int i = 0; i < tree.clusters(L); ++i)
    for (int j : structure.near[L][i]) {
      if (j < i) continue;
      const auto& ni = tree.node(L, i);
      const auto& nj = tree.node(L, j);
      H.dense[{i, j}] = kernel_block(kernel, tree.points, ni.begin, ni.end, nj.begin, nj.end);
    }

  for (const auto& [key, D] : H.dense) {
    H.scale = std::max(H.scale, max_abs(D));
    if (H.has_basis(L)) {
      H.skeleton[key] = H.bases[L][key.first].ordered().transpose() * D * H.bases[L][key.second].ordered();
    } else {
      H.skeleton[key] = D;
    }
  }
  for (const auto& lvl : H.couplings)
    for (const auto& [key, S] : lvl) H.scale = std::max(H.scale, max_abs(S));
  return H;
}

RankStructuredMatrix shift_diagonal(const RankStructuredMatrix& H, double mu) {
  RankStructuredMatrix out = H;
  for (int i = 0; i < H.tree.clusters(H.depth()); ++i) {
    auto& D = out.dense.at({i, i});
    D.diagonal().array() -= mu;
    auto& S = out.skeleton.at({i, i});
    S.diagonal().array() -= mu;
  }
  out.shift += mu;
  return out;
}

Matrix expanded_basis(const RankStructuredMatrix& H, int level, int i) {
  if (!H.has_basis(level)) throw std::invalid_argument("expanded_basis: level has no basis");
  const auto& b = H.bases[level][i];
  if (level == H.depth()) return b.U_S;
  const Matrix U1 = expanded_basis(H, level + 1, 2 * i);
  const Matrix U2 = expanded_basis(H, level + 1, 2 * i + 1);
  Matrix E(U1.rows() + U2.rows(), b.rank);
  E.topRows(U1.rows()) = U1 * b.U_S.topRows(U1.cols());
  E.bottomRows(U2.rows()) = U2 * b.U_S.bottomRows(U2.cols());
  return E;
}

Matrix reconstruct_dense(const RankStructuredMatrix& H) {
  if (static_cast<std::size_t>(H.n()) > oracle_cap())
    throw OracleTooLarge("reconstruct_dense: n exceeds the oracle cap");
  const Expanded U = all_expanded(H);
  const int L = H.depth();
  Matrix A(H.n(), H.n());
  for (int i = 0; i < H.tree.clusters(L); ++i) {
    const auto& nd = H.tree.node(L, i);
    A.middleRows(nd.begin, nd.size()) = leaf_rows(H, U, i);
  }
  return A;
}

Matrix reconstruct_leaf_rows(const RankStructuredMatrix& H, int leaf) {
  return leaf_rows(H, all_expanded(H), leaf);
}

std::vector<int> max_rank_per_level(const RankStructuredMatrix& H) {
  std::vector<int> r(H.depth() + 1, 0);
  for (int l = 0; l <= H.depth(); ++l)
    if (H.has_basis(l))
      for (const auto& b : H.bases[l]) r[l] = std::max(r[l], b.rank);
  return r;
}

int max_rank(const RankStructuredMatrix& H) {
  const auto r = max_rank_per_level(H);
  return r.empty() ? 0 : *std::max_element(r.begin(), r.end());
}

std::size_t storage_bytes(const RankStructuredMatrix& H) {
  std::size_t entries = 0;
  for (const auto& [k, D] : H.dense) entries += D.size();
  for (const auto& lvl : H.bases)
    for (const auto& b : lvl) entries += b.U_S.size() + b.U_R.size();
  for (const auto& lvl : H.couplings)
    for (const auto& [k, S] : lvl) entries += S.size();
  return entries * sizeof(double);
}

Interval gershgorin_interval(const RankStructuredMatrix& H) {
  const Expanded U = all_expanded(H);
  const int L = H.depth();
  Interval iv{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (int i = 0; i < H.tree.clusters(L); ++i) {
    const auto& nd = H.tree.node(L, i);
    const Matrix R = leaf_rows(H, U, i);
    for (int r = 0; r < nd.size(); ++r) {
      const double d = R(r, nd.begin + r);
      const double radius = R.row(r).cwiseAbs().sum() - std::abs(d);
      iv.lo = std::min(iv.lo, d - radius);
      iv.hi = std::max(iv.hi, d + radius);
    }
  }
  return iv;
}

Matrix kernel_matrix(const KernelFn& kernel, const ClusterTree& tree) {
  return kernel_block(kernel, tree.points, 0, tree.n(), 0, tree.n());
}

namespace {

double to_little_endian(double v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(double)];
    std::memcpy(b, &v, sizeof v);
    std::reverse(b, b + sizeof v);
    std::memcpy(&v, b, sizeof v);
    return v;
  }
}

}  // namespace

Matrix read_symmetric_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open matrix file: " + path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  long long n = -1;
  if (!(hs >> n) || n < 1) throw std::runtime_error("matrix file: malformed header in " + path);
  Matrix A(n, n);
  for (long long i = 0; i < n; ++i)
    for (long long j = 0; j <= i; ++j) {
      double v;
      if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw std::runtime_error("matrix file: truncated payload in " + path);
      A(i, j) = A(j, i) = to_little_endian(v);
    }
  return A;
}

void write_symmetric_matrix(const std::string& path, const Matrix& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("write_symmetric_matrix: matrix must be square");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write matrix file: " + path);
  out << A.rows() << '\n';
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = to_little_endian(A(i, j));
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

PointCloud index_points(int n) {
  PointCloud c;
  c.dim = 1;
  c.points.resize(n);
  for (int i = 0; i < n; ++i) c.points[i] = {double(i), 0.0, 0.0};
  return c;
}

KernelFn matrix_entry_kernel(std::shared_ptr<const Matrix> A) {
  return [A = std::move(A)](const Point& x, const Point& y) {
    return (*A)(static_cast<Eigen::Index>(x[0]), static_cast<Eigen::Index>(y[0]));
  };
}

RankStructuredMatrix compress_dense(const Matrix& A, int leaf_size, Format format, double eps, double eta) {
  const int n = static_cast<int>(A.rows());
  const PointCloud pts = index_points(n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const ClusterTree tree = build_tree(pts, order, leaf_size);
  const BlockStructure s = classify(tree, admissibility_for(format, eta));
  return construct(matrix_entry_kernel(std::make_shared<const Matrix>(A)), tree, s, eps);
}

}  // namespace h2spec

#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "h2spec/dense.hpp"
#include "h2spec/geometry.hpp"
#include "h2spec/partition.hpp"

namespace h2spec {

enum class Format { BLR2, HSS, H2 };

const char* format_name(Format f);
Format parse_format(const std::string& name);
Admissibility admissibility_for(Format f, double eta);

using BlockKey = std::pair<int, int>;

// Symmetric rank-structured matrix in tree order. Only blocks with i <= j
// are stored; the (j, i) block is the transpose.
struct RankStructuredMatrix {
  Format format = Format::H2;
  ClusterTree tree;
  BlockStructure structure;
  double eps = 0.0;
  double shift = 0.0;   // accumulated diagonal shift
  double scale = 0.0;   // max |entry| of the stored blocks before shifting

  // Leaf-level dense blocks for near pairs.
  std::map<BlockKey, Matrix> dense;
  // bases[level][i]; empty for levels without low-rank pairs at or above them.
  std::vector<std::vector<BasisSplit>> bases;
  // couplings[level][(i, j)] for low-rank pairs.
  std::vector<std::map<BlockKey, Matrix>> couplings;
  // Q_i^T D_ij Q_j with Q = [U_R U_S] for the dense leaf blocks.
  std::map<BlockKey, Matrix> skeleton;

  int n() const { return tree.n(); }
  int depth() const { return tree.depth; }
  bool has_basis(int level) const {
    return level < static_cast<int>(bases.size()) && !bases[level].empty();
  }
  int rank(int level, int i) const { return has_basis(level) ? bases[level][i].rank : 0; }
  Matrix dense_block(int i, int j) const;
  Matrix coupling(int level, int i, int j) const;
};

// Far-field row block of a cluster: its rows against every column outside its
// near field at its own level and all coarser levels.
struct RowConcat {
  std::vector<int> columns;  // sorted tree indices
  Matrix block;
};

std::vector<int> far_field_columns(const ClusterTree& tree, const BlockStructure& s, int level, int i);
RowConcat row_concat(const KernelFn& kernel, const ClusterTree& tree, const BlockStructure& s, int level,
                     int i);

BasisSplit build_leaf_basis(const KernelFn& kernel, const ClusterTree& tree, const BlockStructure& s,
                            int leaf, double eps);

// Transfer basis over the stacked children skeleton rows.
BasisSplit build_transfer(const Matrix& stacked_children_rows, double eps);

RankStructuredMatrix construct(const KernelFn& kernel, const ClusterTree& tree,
                               const BlockStructure& structure, double eps);

// Copy with the diagonal reduced by mu; only the leaf diagonal blocks change.
RankStructuredMatrix shift_diagonal(const RankStructuredMatrix& H, double mu);

// Expanded basis of a cluster: rows of the cluster range, rank columns.
Matrix expanded_basis(const RankStructuredMatrix& H, int level, int i);

// Dense n x n matrix in tree order; refuses sizes above oracle_cap().
Matrix reconstruct_dense(const RankStructuredMatrix& H);
// Rows of one leaf cluster against all columns, in tree order.
Matrix reconstruct_leaf_rows(const RankStructuredMatrix& H, int leaf);

int max_rank(const RankStructuredMatrix& H);
std::vector<int> max_rank_per_level(const RankStructuredMatrix& H);
std::size_t storage_bytes(const RankStructuredMatrix& H);

Interval gershgorin_interval(const RankStructuredMatrix& H);

// Kernel matrix in tree order.
Matrix kernel_matrix(const KernelFn& kernel, const ClusterTree& tree);

// Symmetric matrix file: ASCII header line "n", then the lower triangle in
// row-major order as little-endian binary doubles.
Matrix read_symmetric_matrix(const std::string& path);
void write_symmetric_matrix(const std::string& path, const Matrix& A);

// 1D index points 0..n-1 and a kernel that looks entries up in A.
PointCloud index_points(int n);
KernelFn matrix_entry_kernel(std::shared_ptr<const Matrix> A);

// Convenience: compress an explicit symmetric matrix on index points.
RankStructuredMatrix compress_dense(const Matrix& A, int leaf_size, Format format, double eps,
                                    double eta = 1.0);

}  // namespace h2spec

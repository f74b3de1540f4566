#pragma once

#include <iosfwd>
#include <vector>

#include "h2spec/compress.hpp"
#include "h2spec/dense.hpp"

namespace h2spec {

// Skeleton coordinates of a dense block: [U_R U_S]_i^T D [U_R U_S]_j.
Matrix skeletonize_dense(const Matrix& block, const BasisSplit& row, const BasisSplit& col);

// A low-rank block in skeleton coordinates: only the S x S quadrant is nonzero.
Matrix skeletonize_lowrank(const Matrix& coupling, int row_redundant, int col_redundant);

// Partial factorization of one diagonal skeleton block [[RR, RS], [SR, SS]]
// with r redundant coordinates: RR = P^T L D L^T P, L_SR, and the Schur
// complement SS - L_SR D L_SR^T.
struct RedundantFactor {
  LdlResult rr;
  Matrix L_sr;
  Matrix schur;
};
RedundantFactor factor_redundant(const Matrix& skeleton, int r, double scale = -1.0);

enum class BlockKind : unsigned char { Near, LowRank, Fill };

struct BlockEntry {
  int col = 0;
  BlockKind kind = BlockKind::Near;
  Matrix m;
};

struct ClusterState {
  std::vector<int> slots;  // global coordinate slots, ordered [R; S]
  int r = 0;               // redundant coordinates still to eliminate
  int s = 0;               // skeleton coordinates passed to the parent
  int s0 = 0;              // skeleton rank from the construction
  bool eliminated = false;
  bool has_fill = false;   // a far block in this row has nonzero R rows

  int dim() const { return r + s; }
};

// Transformation step M_before = F M_after F^T restricted to `slots`.
struct FactorStep {
  std::vector<int> slots;
  Matrix F;
};

struct PivotRecord {
  int level = 0;
  int cluster = 0;
  std::vector<int> slots;
  LdlResult ldl;
};

struct GldlOptions {
  bool record_factors = false;
  // Absolute truncation tolerance for fill-in recompression; negative selects
  // eps * min(1, scale) from the matrix.
  double recompress_tol = -1.0;
};

struct LevelStats {
  int level = 0;
  int max_skeleton = 0;
  int recompressions = 0;
  int fill_blocks = 0;
};

struct GldlFactorization {
  int n = 0;
  double shift = 0.0;
  Inertia inertia;
  std::vector<PivotRecord> pivots;
  std::vector<LevelStats> levels;
  std::vector<FactorStep> steps;  // only with record_factors
  bool recorded = false;
};

// One level of the block system in skeleton coordinates. Blocks are stored
// for both (i, j) and (j, i).
class LevelSystem {
 public:
  int level = 0;
  std::vector<ClusterState> clusters;
  std::vector<std::vector<BlockEntry>> rows;

  BlockEntry* find(int i, int j);
  const BlockEntry* find(int i, int j) const;
  BlockEntry& get_or_create(int i, int j, BlockKind kind);
  std::vector<std::pair<int, int>> fill_pairs() const;
};

class GldlEngine {
 public:
  GldlEngine(const RankStructuredMatrix& H, double shift, const GldlOptions& opt);

  // Leaf-level system with skeletonized dense and low-rank blocks.
  void init_leaf_level();
  // Recompresses pending fill-ins of k, then eliminates its redundant part.
  void eliminate(int k);
  void recompress_fillins(int k);
  // Moves the skeleton parts one level up (or to the root when there are no
  // low-rank blocks above) and transforms them with the parent bases.
  void merge_permute();
  bool at_root() const { return root_; }
  void factor_root();
  GldlFactorization run();

  LevelSystem& system() { return sys_; }
  GldlFactorization& result() { return out_; }

 private:
  void record(std::vector<int> slots, Matrix F);

  const RankStructuredMatrix& H_;
  GldlOptions opt_;
  double shift_;
  double scale_;
  double tol_;
  int lstar_;
  bool root_ = false;
  LevelSystem sys_;
  GldlFactorization out_;
};

// Generalized LDL^T of H - shift I.
GldlFactorization generalized_ldl(const RankStructuredMatrix& H, double shift = 0.0,
                                  const GldlOptions& opt = {});

// Dense L D L^T assembled from recorded factors, in tree order.
Matrix reconstruct_factorization(const GldlFactorization& f);

struct InertiaCount {
  int neg = 0;
  int zero = 0;
  int pos = 0;
  double mu_used = 0.0;
  int retries = 0;
};

// Inertia of H - mu I; on breakdown retries at mu (1 + d) + d with
// d = 1e-11 max(1, |mu|), at most three times.
InertiaCount inertia(const RankStructuredMatrix& H, double mu);

// Per-level pivot values and skeleton ranks as JSON lines.
void dump_factorization(std::ostream& out, const GldlFactorization& f);

}  // namespace h2spec

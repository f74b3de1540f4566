#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

namespace h2spec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Inertia {
  int neg = 0;
  int zero = 0;
  int pos = 0;

  int size() const { return neg + zero + pos; }
  Inertia& operator+=(const Inertia& o) {
    neg += o.neg;
    zero += o.zero;
    pos += o.pos;
    return *this;
  }
  friend bool operator==(const Inertia&, const Inertia&) = default;
};

// P A P^T = L D L^T with unit lower L and block diagonal D (1x1 and 2x2
// pivots). Row i of P A P^T is row perm[i] of A.
struct LdlResult {
  Matrix L;
  Vector diag;           // D(i, i)
  Vector sub;            // sub[i] = D(i + 1, i) when a 2x2 block starts at i
  std::vector<int> block_start;
  std::vector<int> block_size;
  std::vector<int> perm;
  double zero_tol = 0.0;

  int size() const { return static_cast<int>(diag.size()); }
  Matrix block_diagonal() const;
  // Overwrites rhs (size() rows) with D^{-1} rhs.
  void apply_d_inverse(Matrix& rhs) const;
};

// Bunch-Kaufman symmetric indefinite LDL^T. Throws Breakdown when a pivot
// block has an eigenvalue below 1e3 * eps * scale in magnitude; scale
// defaults to max |A_ij|.
LdlResult ldl_symmetric(const Matrix& A, double scale = -1.0);

// Sign counts of D; 2x2 blocks are classified by determinant and trace.
Inertia inertia_of(const LdlResult& f);

// Column basis of M split into a skeleton part U_S (rank columns) and its
// orthogonal complement U_R; [U_S U_R] is square orthogonal.
struct BasisSplit {
  Matrix U_S;
  Matrix U_R;
  int rank = 0;

  int rows() const { return static_cast<int>(U_S.rows()); }
  // [U_R U_S]: redundant coordinates first.
  Matrix ordered() const;
};

// Truncated rank-revealing factorization; smallest rank r with ||M - U_S U_S^T M||_2 <= eps ||M||_2.
BasisSplit rrqr_truncated(const Matrix& M, double eps);
// Same with an absolute tolerance on the discarded part.
BasisSplit rrqr_absolute(const Matrix& M, double tol);

// Eigenvalues of a symmetric matrix in ascending order, by cyclic Jacobi.
// Throws OracleTooLarge above oracle_cap() rows.
std::vector<double> eig_oracle(const Matrix& A);
// H2SPEC_ORACLE_CAP from the environment, 4096 otherwise.
std::size_t oracle_cap();

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

Interval gershgorin_interval(const Matrix& A);

double spectral_norm_symmetric(const Matrix& A);
double spectral_norm(const Matrix& A);

namespace testing_hooks {
// Flips the sign classification in inertia_of; used by the self-test fault check.
void set_inertia_sign_flip(bool on);
bool inertia_sign_flip();
}  // namespace testing_hooks

}  // namespace h2spec

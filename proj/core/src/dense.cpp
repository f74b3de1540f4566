#include "h2spec/dense.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "h2spec/errors.hpp"

namespace h2spec {

namespace {

std::atomic<bool> g_sign_flip{false};

// Eigenvalues of [[a, b], [b, c]], ascending.
std::pair<double, double> eig2(double a, double b, double c) {
  const double m = 0.5 * (a + c);
  const double r = std::hypot(0.5 * (a - c), b);
  return {m - r, m + r};
}

}  // namespace

namespace testing_hooks {
void set_inertia_sign_flip(bool on) { g_sign_flip = on; }
bool inertia_sign_flip() { return g_sign_flip; }
}  // namespace testing_hooks

Matrix LdlResult::block_diagonal() const {
  const int n = size();
  Matrix D = Matrix::Zero(n, n);
  for (std::size_t b = 0; b < block_start.size(); ++b) {
    const int k = block_start[b];
    D(k, k) = diag[k];
    if (block_size[b] == 2) {
      D(k + 1, k + 1) = diag[k + 1];
      D(k + 1, k) = D(k, k + 1) = sub[k];
    }
  }
  return D;
}

void LdlResult::apply_d_inverse(Matrix& rhs) const {
  for (std::size_t b = 0; b < block_start.size(); ++b) {
    const int k = block_start[b];
    if (block_size[b] == 1) {
      rhs.row(k) /= diag[k];
    } else {
      const double a = diag[k], c = diag[k + 1], s = sub[k];
      const double det = a * c - s * s;
      for (Eigen::Index j = 0; j < rhs.cols(); ++j) {
        const double x = rhs(k, j), y = rhs(k + 1, j);
        rhs(k, j) = (c * x - s * y) / det;
        rhs(k + 1, j) = (a * y - s * x) / det;
      }
    }
  }
}

LdlResult ldl_symmetric(const Matrix& A, double scale) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n) throw std::invalid_argument("ldl_symmetric: matrix must be square");
  LdlResult f;
  f.L = Matrix::Identity(n, n);
  f.diag = Vector::Zero(n);
  f.sub = Vector::Zero(n);
  f.perm.resize(n);
  std::iota(f.perm.begin(), f.perm.end(), 0);
  if (n == 0) return f;
  if (scale < 0) scale = A.cwiseAbs().maxCoeff();
  f.zero_tol = 1e3 * std::numeric_limits<double>::epsilon() * scale;
  const double tol = f.zero_tol;
  const double alpha = (1.0 + std::sqrt(17.0)) / 8.0;

  Matrix W = A;
  Eigen::Index k = 0;
  auto swap_sym = [&](Eigen::Index i, Eigen::Index j) {
    if (i == j) return;
    W.row(i).swap(W.row(j));
    W.col(i).swap(W.col(j));
    if (k > 0) f.L.row(i).head(k).swap(f.L.row(j).head(k));
    std::swap(f.perm[i], f.perm[j]);
  };

  while (k < n) {
    int s = 1;
    const double akk = std::abs(W(k, k));
    Eigen::Index r = k;
    double colmax = 0.0;
    for (Eigen::Index i = k + 1; i < n; ++i)
      if (std::abs(W(i, k)) > colmax) {
        colmax = std::abs(W(i, k));
        r = i;
      }
    if (std::max(akk, colmax) <= tol)
      throw Breakdown("ldl_symmetric: zero pivot column at step " + std::to_string(k));
    if (akk < alpha * colmax) {
      double rowmax = 0.0;
      for (Eigen::Index j = k; j < n; ++j)
        if (j != r) rowmax = std::max(rowmax, std::abs(W(r, j)));
      if (akk * rowmax >= alpha * colmax * colmax) {
        // keep the 1x1 pivot at k
      } else if (std::abs(W(r, r)) >= alpha * rowmax) {
        swap_sym(k, r);
      } else {
        swap_sym(k + 1, r);
        s = 2;
      }
    }

    f.block_start.push_back(static_cast<int>(k));
    f.block_size.push_back(s);
    if (s == 1) {
      const double d = W(k, k);
      if (std::abs(d) <= tol)
        throw Breakdown("ldl_symmetric: pivot below tolerance at step " + std::to_string(k));
      f.diag[k] = d;
      const Eigen::Index m = n - k - 1;
      if (m > 0) {
        const Vector w = W.col(k).tail(m);
        f.L.col(k).tail(m) = w / d;
        W.bottomRightCorner(m, m).noalias() -= f.L.col(k).tail(m) * w.transpose();
      }
    } else {
      const double a = W(k, k), b = W(k + 1, k), c = W(k + 1, k + 1);
      const auto [e0, e1] = eig2(a, b, c);
      if (std::min(std::abs(e0), std::abs(e1)) <= tol)
        throw Breakdown("ldl_symmetric: singular 2x2 pivot at step " + std::to_string(k));
      f.diag[k] = a;
      f.diag[k + 1] = c;
      f.sub[k] = b;
      const Eigen::Index m = n - k - 2;
      if (m > 0) {
        const Matrix C = W.block(k + 2, k, m, 2);
        const double det = a * c - b * b;
        Matrix Einv(2, 2);
        Einv << c / det, -b / det, -b / det, a / det;
        f.L.block(k + 2, k, m, 2).noalias() = C * Einv;
        W.bottomRightCorner(m, m).noalias() -= f.L.block(k + 2, k, m, 2) * C.transpose();
      }
    }
    k += s;
  }
  return f;
}

Inertia inertia_of(const LdlResult& f) {
  Inertia in;
  const bool flip = g_sign_flip;
  auto count = [&](double v) {
    if (std::abs(v) <= f.zero_tol) {
      ++in.zero;
    } else if ((v < 0) != flip) {
      ++in.neg;
    } else {
      ++in.pos;
    }
  };
  for (std::size_t b = 0; b < f.block_start.size(); ++b) {
    const int k = f.block_start[b];
    if (f.block_size[b] == 1) {
      count(f.diag[k]);
    } else {
      const double a = f.diag[k], s = f.sub[k], c = f.diag[k + 1];
      const double det = a * c - s * s;
      const auto [e0, e1] = eig2(a, s, c);
      if (std::min(std::abs(e0), std::abs(e1)) <= f.zero_tol) {
        count(e0);
        count(e1);
      } else if (det < 0) {
        count(-1.0);
        count(1.0);
      } else {
        count(a + c);
        count(a + c);
      }
    }
  }
  return in;
}

Matrix BasisSplit::ordered() const {
  Matrix Q(rows(), U_R.cols() + U_S.cols());
  Q << U_R, U_S;
  return Q;
}

namespace {

BasisSplit rrqr_impl(const Matrix& M, double tol, bool relative) {
  const Eigen::Index m = M.rows(), ncols = M.cols();
  BasisSplit out;
  if (m == 0 || ncols == 0 || M.cwiseAbs().maxCoeff() == 0.0) {
    out.U_S = Matrix::Zero(m, 0);
    out.U_R = Matrix::Identity(m, m);
    return out;
  }
  // Wide blocks are first reduced to an m x m triangle: M = R^T Q^T.
  Matrix U;
  Vector sigma;
  if (ncols > m) {
    Eigen::HouseholderQR<Matrix> qr(M.transpose());
    const Matrix Rt = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>().toDenseMatrix().transpose();
    Eigen::JacobiSVD<Matrix> svd(Rt, Eigen::ComputeFullU);
    U = svd.matrixU();
    sigma = svd.singularValues();
  } else {
    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU);
    U = svd.matrixU();
    sigma = svd.singularValues();
  }
  const Eigen::Index k = sigma.size();
  if (relative) tol *= sigma[0];
  // tail2[i] = sum of sigma_j^2 for j >= i
  Vector tail2 = Vector::Zero(k + 1);
  for (Eigen::Index i = k - 1; i >= 0; --i) tail2[i] = tail2[i + 1] + sigma[i] * sigma[i];
  Eigen::Index r = k;
  for (Eigen::Index i = 0; i <= k; ++i)
    if (std::sqrt(tail2[i]) <= tol) {
      r = i;
      break;
    }
  out.rank = static_cast<int>(r);
  out.U_S = U.leftCols(r);
  out.U_R = U.rightCols(m - r);
  return out;
}

}  // namespace

BasisSplit rrqr_truncated(const Matrix& M, double eps) {
  if (!(eps >= 0)) throw std::invalid_argument("rrqr_truncated: eps must be non-negative");
  return rrqr_impl(M, eps, true);
}

BasisSplit rrqr_absolute(const Matrix& M, double tol) {
  if (!(tol >= 0)) throw std::invalid_argument("rrqr_absolute: tol must be non-negative");
  return rrqr_impl(M, tol, false);
}

std::size_t oracle_cap() {
  if (const char* env = std::getenv("H2SPEC_ORACLE_CAP")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return 4096;
}

std::vector<double> eig_oracle(const Matrix& A0) {
  const Eigen::Index n = A0.rows();
  if (A0.cols() != n) throw std::invalid_argument("eig_oracle: matrix must be square");
  if (static_cast<std::size_t>(n) > oracle_cap())
    throw OracleTooLarge("eig_oracle: n = " + std::to_string(n) + " exceeds the oracle cap of " +
                         std::to_string(oracle_cap()));
  Matrix A = 0.5 * (A0 + A0.transpose());
  const double fro = A.norm();
  const double target = 1e-12 * fro;
  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j) s += A(i, j) * A(i, j);
    return std::sqrt(s);
  };
  // Round-robin (tournament) ordering: each round rotates n/2 disjoint pairs,
  // which commute, so the column and row passes both stream contiguous columns.
  const Eigen::Index m = n + (n % 2);
  std::vector<Eigen::Index> players(m);
  std::iota(players.begin(), players.end(), 0);
  struct Rotation {
    Eigen::Index p, q;
    double c, s;
    double app, aqq;  // updated diagonal entries
  };
  std::vector<Rotation> rot;
  rot.reserve(m / 2);
  // One sweep past the stopping test: convergence is quadratic, so the extra
  // sweep takes the diagonal to working precision.
  bool last = false;
  for (int sweep = 0; sweep < 100; ++sweep) {
    if (off_norm() <= target) {
      if (last) break;
      last = true;
    }
    for (Eigen::Index round = 0; round + 1 < m; ++round) {
      rot.clear();
      for (Eigen::Index i = 0; i < m / 2; ++i) {
        Eigen::Index p = players[i], q = players[m - 1 - i];
        if (p >= n || q >= n) continue;
        if (p > q) std::swap(p, q);
        const double apq = A(q, p);
        if (std::abs(apq) <= std::numeric_limits<double>::min()) continue;
        const double tau = (A(q, q) - A(p, p)) / (2.0 * apq);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        rot.push_back({p, q, c, t * c, A(p, p) - t * apq, A(q, q) + t * apq});
      }
      // A <- A J
      for (const auto& r : rot) {
        for (Eigen::Index i = 0; i < n; ++i) {
          const double x = A(i, r.p), y = A(i, r.q);
          A(i, r.p) = r.c * x - r.s * y;
          A(i, r.q) = r.s * x + r.c * y;
        }
      }
      // A <- J^T A, column by column
      for (Eigen::Index j = 0; j < n; ++j) {
        double* col = A.col(j).data();
        for (const auto& r : rot) {
          const double x = col[r.p], y = col[r.q];
          col[r.p] = r.c * x - r.s * y;
          col[r.q] = r.s * x + r.c * y;
        }
      }
      for (const auto& r : rot) {
        A(r.p, r.q) = A(r.q, r.p) = 0.0;
        A(r.p, r.p) = r.app;
        A(r.q, r.q) = r.aqq;
      }
      std::rotate(players.begin() + 1, players.end() - 1, players.end());
    }
  }
  std::vector<double> ev(n);
  for (Eigen::Index i = 0; i < n; ++i) ev[i] = A(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

Interval gershgorin_interval(const Matrix& A) {
  if (A.rows() == 0) return {0.0, 0.0};
  Interval iv{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double radius = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
    iv.lo = std::min(iv.lo, A(i, i) - radius);
    iv.hi = std::max(iv.hi, A(i, i) + radius);
  }
  return iv;
}

double spectral_norm_symmetric(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_norm(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(A);
  return svd.singularValues()(0);
}

}  // namespace h2spec

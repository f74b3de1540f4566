#include "h2spec/spectrum.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>

#include "h2spec/errors.hpp"

namespace h2spec {

void InertiaCache::insert(double mu, int nu) {
  std::unique_lock lock(mu_);
  points_[mu] = nu;
}

std::optional<int> InertiaCache::lookup(double mu) const {
  std::shared_lock lock(mu_);
  auto it = points_.find(mu);
  if (it == points_.end()) return std::nullopt;
  return it->second;
}

std::optional<bool> InertiaCache::implied(double mu, int k) const {
  std::shared_lock lock(mu_);
  auto hi = points_.lower_bound(mu);  // first p >= mu
  if (hi != points_.end() && hi->first == mu) return hi->second >= k;
  if (hi != points_.begin()) {
    auto lo = std::prev(hi);  // largest p < mu
    if (lo->second >= k) return true;
  }
  if (hi != points_.end() && hi->second < k) return false;
  return std::nullopt;
}

std::size_t InertiaCache::size() const {
  std::shared_lock lock(mu_);
  return points_.size();
}

std::map<double, int> InertiaCache::snapshot() const {
  std::shared_lock lock(mu_);
  return points_;
}

InertiaFn inertia_fn(const RankStructuredMatrix& H) {
  return [&H](double mu) { return inertia(H, mu); };
}

int bisection_steps(double a, double b, double eps) {
  int steps = 0;
  double w = b - a;
  while (w >= eps) {
    w *= 0.5;
    ++steps;
  }
  return steps;
}

namespace {

int nu_at(const InertiaFn& nu, double mu, InertiaCache& cache, int& evals) {
  if (auto v = cache.lookup(mu)) return *v;
  const InertiaCount c = nu(mu);
  ++evals;
  cache.insert(c.mu_used, c.neg);
  return c.neg;
}

}  // namespace

EigenvalueEstimate slice_spectrum(const InertiaFn& nu, int k, double a, double b, double eps,
                                  InertiaCache* cache, const SliceOptions& opt) {
  if (!std::isfinite(a) || !std::isfinite(b) || !(a < b))
    throw std::invalid_argument("slice_spectrum: interval must be finite with a < b");
  if (!(eps > 0)) throw std::invalid_argument("slice_spectrum: eps must be positive");
  if (k < 1) throw std::invalid_argument("slice_spectrum: k is 1-based");
  const auto t0 = std::chrono::steady_clock::now();
  InertiaCache local;
  InertiaCache& c = cache ? *cache : local;

  EigenvalueEstimate est;
  est.k = k;
  if (opt.validate_bracket) {
    const int na = nu_at(nu, a, c, est.bracket_evals);
    const int nb = nu_at(nu, b, c, est.bracket_evals);
    if (!(na < k && k <= nb))
      throw NotInInterval("eigenvalue " + std::to_string(k) + " is not in [" + std::to_string(a) + ", " +
                          std::to_string(b) + "]: nu(a) = " + std::to_string(na) +
                          ", nu(b) = " + std::to_string(nb));
  }

  double lo = a, hi = b;
  while (hi - lo >= eps) {
    if (est.iterations >= opt.max_iterations)
      throw InertiaUnstable("slice_spectrum: iteration cap reached for k = " + std::to_string(k));
    const double mid = 0.5 * (lo + hi);
    ++est.iterations;
    bool ge;
    double at = mid;
    if (auto known = c.implied(mid, k)) {
      ge = *known;
    } else {
      const InertiaCount r = nu(mid);
      ++est.inertia_evals;
      c.insert(r.mu_used, r.neg);
      ge = r.neg >= k;
      if (r.mu_used > lo && r.mu_used < hi) at = r.mu_used;
    }
    (ge ? hi : lo) = at;
  }
  est.lower = lo;
  est.upper = hi;
  est.value = 0.5 * (lo + hi);
  est.half_width = 0.5 * (hi - lo);
  est.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return est;
}

EigenvalueEstimate slice_spectrum(const RankStructuredMatrix& H, int k, double a, double b, double eps,
                                  InertiaCache* cache, const SliceOptions& opt) {
  if (k > H.n()) throw std::invalid_argument("slice_spectrum: k exceeds the matrix size");
  return slice_spectrum(inertia_fn(H), k, a, b, eps, cache, opt);
}

std::vector<EigenvalueEstimate> slice_range(const InertiaFn& nu, int k0, int k1, double a, double b,
                                            double eps, InertiaCache* cache, const SliceOptions& opt) {
  if (k0 > k1) throw std::invalid_argument("slice_range: empty index range");
  InertiaCache local;
  InertiaCache& c = cache ? *cache : local;
  std::vector<EigenvalueEstimate> out;
  out.reserve(k1 - k0 + 1);
  out.push_back(slice_spectrum(nu, k0, a, b, eps, &c, opt));
  if (k1 > k0) out.push_back(slice_spectrum(nu, k1, a, b, eps, &c, opt));
  SliceOptions inner = opt;
  inner.validate_bracket = false;
  for (int k = k0 + 1; k < k1; ++k) out.push_back(slice_spectrum(nu, k, a, b, eps, &c, inner));
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.k < y.k; });
  return out;
}

std::vector<EigenvalueEstimate> slice_range(const RankStructuredMatrix& H, int k0, int k1, double a,
                                            double b, double eps, InertiaCache* cache,
                                            const SliceOptions& opt) {
  if (k0 < 1 || k1 > H.n()) throw std::invalid_argument("slice_range: indices outside 1..n");
  return slice_range(inertia_fn(H), k0, k1, a, b, eps, cache, opt);
}

Interval default_interval(const RankStructuredMatrix& H) {
  Interval g = gershgorin_interval(H);
  const double pad = 1e-6 * std::max({1.0, g.hi - g.lo, std::abs(g.lo), std::abs(g.hi)});
  return {g.lo - pad, g.hi + pad};
}

ShiftAccuracyReport verify_shift_accuracy(const RankStructuredMatrix& H, double mu,
                                          const std::vector<double>* eigenvalues) {
  const Matrix A = reconstruct_dense(H);
  GldlOptions opt;
  opt.record_factors = true;
  const GldlFactorization f = generalized_ldl(H, mu, opt);
  Matrix shifted = A;
  shifted.diagonal().array() -= mu;
  ShiftAccuracyReport rep;
  rep.mu = mu;
  rep.residual = spectral_norm_symmetric(shifted - reconstruct_factorization(f));
  std::vector<double> own;
  if (!eigenvalues) {
    own = eig_oracle(A);
    eigenvalues = &own;
  }
  rep.norm_a = 0.0;
  rep.min_gap = std::numeric_limits<double>::infinity();
  for (double l : *eigenvalues) {
    rep.norm_a = std::max(rep.norm_a, std::abs(l));
    rep.min_gap = std::min(rep.min_gap, std::abs(l - mu));
  }
  rep.holds = rep.residual < rep.min_gap;
  return rep;
}

}  // namespace h2spec

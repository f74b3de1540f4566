#pragma once

#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <vector>

#include "h2spec/compress.hpp"
#include "h2spec/gldl.hpp"

namespace h2spec {

struct EigenvalueEstimate {
  int k = 0;
  double value = 0.0;
  double half_width = 0.0;
  double lower = 0.0;  // final bracket, nu(lower) < k <= nu(upper)
  double upper = 0.0;
  int iterations = 0;     // bisection steps
  int inertia_evals = 0;  // fresh inertia evaluations inside the bisection loop
  int bracket_evals = 0;  // fresh evaluations spent validating the bracket
  double wall_time_ms = 0.0;

  friend bool operator==(const EigenvalueEstimate&, const EigenvalueEstimate&) = default;
};

// Monotone map mu -> nu(mu) shared between bisections on the same matrix.
class InertiaCache {
 public:
  void insert(double mu, int nu);
  std::optional<int> lookup(double mu) const;
  // Whether nu(mu) >= k follows from cached points: a cached p <= mu with
  // nu(p) >= k implies true, a cached p >= mu with nu(p) < k implies false.
  std::optional<bool> implied(double mu, int k) const;
  std::size_t size() const;
  std::map<double, int> snapshot() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<double, int> points_;
};

using InertiaFn = std::function<InertiaCount(double)>;

struct SliceOptions {
  bool validate_bracket = true;
  int max_iterations = 200;
};

InertiaFn inertia_fn(const RankStructuredMatrix& H);

// k-th smallest eigenvalue (1-based) by bisection on [a, b] until the bracket
// is narrower than eps; the midpoint is returned.
EigenvalueEstimate slice_spectrum(const InertiaFn& nu, int k, double a, double b, double eps,
                                  InertiaCache* cache = nullptr, const SliceOptions& opt = {});
EigenvalueEstimate slice_spectrum(const RankStructuredMatrix& H, int k, double a, double b, double eps,
                                  InertiaCache* cache = nullptr, const SliceOptions& opt = {});

// Eigenvalues k0..k1: the two extremes first, then the inner indices inside
// brackets narrowed by the shared cache. Sorted by k.
std::vector<EigenvalueEstimate> slice_range(const InertiaFn& nu, int k0, int k1, double a, double b,
                                            double eps, InertiaCache* cache = nullptr,
                                            const SliceOptions& opt = {});
std::vector<EigenvalueEstimate> slice_range(const RankStructuredMatrix& H, int k0, int k1, double a,
                                            double b, double eps, InertiaCache* cache = nullptr,
                                            const SliceOptions& opt = {});

// Gershgorin enclosure of the spectrum, padded so both ends are strict.
Interval default_interval(const RankStructuredMatrix& H);

// ceil(log2((b - a) / eps)), the bisection step count without cache reuse.
int bisection_steps(double a, double b, double eps);

struct ShiftAccuracyReport {
  double mu = 0.0;
  double residual = 0.0;  // ||(A - mu I) - L D L^T||_2
  double norm_a = 0.0;    // ||A||_2
  double min_gap = 0.0;   // min_j |lambda_j(A) - mu|
  bool holds = false;     // residual < min_gap: the computed inertia is exact
};

// Dense diagnostic for small n; eigenvalues of the reconstructed matrix may be
// passed in to avoid recomputing them.
ShiftAccuracyReport verify_shift_accuracy(const RankStructuredMatrix& H, double mu,
                                          const std::vector<double>* eigenvalues = nullptr);

}  // namespace h2spec

#include "h2spec/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace h2spec {

double distance(const Point& a, const Point& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

PointCloud generate_circle(int n) {
  if (n < 1) throw std::invalid_argument("generate_circle: n must be positive");
  PointCloud cloud;
  cloud.dim = 2;
  cloud.points.resize(n);
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * i / n;
    cloud.points[i] = {std::cos(t), std::sin(t), 0.0};
  }
  return cloud;
}

PointCloud generate_lattice(const std::array<int, 3>& extents, int dim) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("lattice dimension must be 1, 2 or 3");
  std::array<int, 3> e{1, 1, 1};
  for (int d = 0; d < dim; ++d) {
    if (extents[d] < 1) throw std::invalid_argument("lattice extents must be positive");
    e[d] = extents[d];
  }
  PointCloud cloud;
  cloud.dim = dim;
  cloud.points.reserve(static_cast<std::size_t>(e[0]) * e[1] * e[2]);
  // x varies fastest
  for (int k = 0; k < e[2]; ++k)
    for (int j = 0; j < e[1]; ++j)
      for (int i = 0; i < e[0]; ++i)
        cloud.points.push_back({double(i), double(j), double(k)});
  return cloud;
}

PointCloud generate_grid(int n_per_axis, int dim) {
  if (dim < 1 || dim > 3) throw std::invalid_argument("grid dimension must be 1, 2 or 3");
  return generate_lattice({n_per_axis, n_per_axis, n_per_axis}, dim);
}

KernelFn laplace_kernel() {
  return [](const Point& x, const Point& y) { return 1.0 / (distance(x, y) + 1e-3); };
}

namespace {

// Skilling's transform from axis coordinates to the transposed Hilbert index.
std::uint64_t hilbert_key(std::array<std::uint32_t, 3> x, int dim, int bits) {
  const std::uint32_t top = 1u << (bits - 1);
  for (std::uint32_t q = top; q > 1; q >>= 1) {
    const std::uint32_t p = q - 1;
    for (int i = 0; i < dim; ++i) {
      if (x[i] & q) {
        x[0] ^= p;
      } else {
        const std::uint32_t t = (x[0] ^ x[i]) & p;
        x[0] ^= t;
        x[i] ^= t;
      }
    }
  }
  for (int i = 1; i < dim; ++i) x[i] ^= x[i - 1];
  std::uint32_t t = 0;
  for (std::uint32_t q = top; q > 1; q >>= 1)
    if (x[dim - 1] & q) t ^= q - 1;
  for (int i = 0; i < dim; ++i) x[i] ^= t;

  std::uint64_t key = 0;
  for (int b = bits - 1; b >= 0; --b)
    for (int i = 0; i < dim; ++i) key = (key << 1) | ((x[i] >> b) & 1u);
  return key;
}

}  // namespace

std::vector<int> sfc_order(const PointCloud& cloud, int bits) {
  const int n = cloud.size();
  const int dim = cloud.dim;
  if (dim < 1 || dim > 3) throw std::invalid_argument("sfc_order: dimension must be 1, 2 or 3");
  if (bits < 1 || bits * dim > 63) throw std::invalid_argument("sfc_order: unsupported bit depth");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (n == 0) return order;

  if (dim == 1) {
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return cloud.points[a][0] < cloud.points[b][0];
    });
    return order;
  }

  Point lo = cloud.points[0], hi = cloud.points[0];
  for (const auto& p : cloud.points)
    for (int d = 0; d < dim; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  double extent = 0.0;
  for (int d = 0; d < dim; ++d) extent = std::max(extent, hi[d] - lo[d]);
  const double cells = std::ldexp(1.0, bits);
  const auto maxq = static_cast<std::uint32_t>(cells - 1);

  std::vector<std::uint64_t> keys(n);
  for (int i = 0; i < n; ++i) {
    std::array<std::uint32_t, 3> q{0, 0, 0};
    if (extent > 0)
      for (int d = 0; d < dim; ++d) {
        const double v = std::floor((cloud.points[i][d] - lo[d]) / extent * cells);
        q[d] = v >= cells ? maxq : static_cast<std::uint32_t>(std::max(v, 0.0));
      }
    keys[i] = hilbert_key(q, dim, bits);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return keys[a] < keys[b]; });
  return order;
}

PointCloud read_point_cloud(std::istream& in) {
  PointCloud cloud;
  int n = -1;
  if (!(in >> cloud.dim >> n) || cloud.dim < 1 || cloud.dim > 3 || n < 0)
    throw std::runtime_error("point cloud: malformed header, expected 'dim n'");
  cloud.points.assign(n, Point{0.0, 0.0, 0.0});
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < cloud.dim; ++d)
      if (!(in >> cloud.points[i][d]))
        throw std::runtime_error("point cloud: truncated at point " + std::to_string(i));
  return cloud;
}

PointCloud read_point_cloud_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open point cloud file: " + path);
  return read_point_cloud(in);
}

void write_point_cloud(std::ostream& out, const PointCloud& cloud) {
  out << cloud.dim << ' ' << cloud.size() << '\n';
  out.precision(17);
  for (const auto& p : cloud.points) {
    for (int d = 0; d < cloud.dim; ++d) out << (d ? " " : "") << p[d];
    out << '\n';
  }
}

}  // namespace h2spec

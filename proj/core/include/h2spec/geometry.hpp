#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace h2spec {

using Point = std::array<double, 3>;

struct PointCloud {
  int dim = 0;
  std::vector<Point> points;

  int size() const { return static_cast<int>(points.size()); }
};

// Kernel entries are evaluated on points; unused trailing coordinates are zero.
using KernelFn = std::function<double(const Point&, const Point&)>;

double distance(const Point& a, const Point& b);

// n points on the unit circle at angles 2*pi*i/n.
PointCloud generate_circle(int n);

// Unit-spaced lattice with n_per_axis points along each of dim axes.
PointCloud generate_grid(int n_per_axis, int dim);

// Unit-spaced lattice with independent extents; extents[d] is ignored for d >= dim.
PointCloud generate_lattice(const std::array<int, 3>& extents, int dim);

// 1 / (|x - y| + 1e-3).
KernelFn laplace_kernel();

// Space-filling-curve ordering: a permutation of 0..n-1. Hilbert order on
// coordinates quantized to `bits` bits per axis; 1D input is sorted by value.
std::vector<int> sfc_order(const PointCloud& cloud, int bits = 16);

// Text format: header line "dim n", then one point per line.
PointCloud read_point_cloud(std::istream& in);
PointCloud read_point_cloud_file(const std::string& path);
void write_point_cloud(std::ostream& out, const PointCloud& cloud);

}  // namespace h2spec

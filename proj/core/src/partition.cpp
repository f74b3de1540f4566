#include "h2spec/partition.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace h2spec {

double Box::diameter() const {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += (hi[d] - lo[d]) * (hi[d] - lo[d]);
  return std::sqrt(s);
}

Box bounding_box(const PointCloud& cloud, int begin, int end) {
  Box box;
  box.dim = cloud.dim;
  if (begin >= end) return box;
  box.lo = box.hi = cloud.points[begin];
  for (int i = begin + 1; i < end; ++i)
    for (int d = 0; d < cloud.dim; ++d) {
      box.lo[d] = std::min(box.lo[d], cloud.points[i][d]);
      box.hi[d] = std::max(box.hi[d], cloud.points[i][d]);
    }
  return box;
}

double box_distance(const Box& a, const Box& b) {
  double s = 0.0;
  for (int d = 0; d < std::max(a.dim, b.dim); ++d) {
    const double gap = std::max({0.0, b.lo[d] - a.hi[d], a.lo[d] - b.hi[d]});
    s += gap * gap;
  }
  return std::sqrt(s);
}

bool admissible(const Box& a, const Box& b, double eta) {
  const double dist = box_distance(a, b);
  if (dist <= 0.0) return false;
  return std::max(a.diameter(), b.diameter()) <= eta * dist;
}

ClusterTree build_tree(const PointCloud& cloud, std::span<const int> order, int leaf_size) {
  const int n = cloud.size();
  if (leaf_size < 2) throw std::invalid_argument("leaf_size must be at least 2");
  if (n < 1) throw std::invalid_argument("cannot build a tree over an empty point cloud");
  if (static_cast<int>(order.size()) != n)
    throw std::invalid_argument("ordering length does not match the point count");

  ClusterTree tree;
  tree.leaf_size = leaf_size;
  tree.perm.assign(order.begin(), order.end());
  std::vector<char> seen(n, 0);
  for (int p : tree.perm) {
    if (p < 0 || p >= n || seen[p]) throw std::invalid_argument("ordering is not a permutation");
    seen[p] = 1;
  }
  tree.points.dim = cloud.dim;
  tree.points.points.resize(n);
  for (int i = 0; i < n; ++i) tree.points.points[i] = cloud.points[tree.perm[i]];

  tree.degenerate = n < leaf_size;
  int depth = 0;
  while ((static_cast<long long>(leaf_size) << depth) < n) ++depth;
  tree.depth = depth;

  tree.levels.resize(depth + 1);
  tree.levels[0].push_back({0, n, bounding_box(tree.points, 0, n)});
  for (int l = 1; l <= depth; ++l) {
    auto& level = tree.levels[l];
    level.reserve(std::size_t(1) << l);
    for (const auto& parent : tree.levels[l - 1]) {
      const int mid = parent.begin + (parent.size() + 1) / 2;
      level.push_back({parent.begin, mid, bounding_box(tree.points, parent.begin, mid)});
      level.push_back({mid, parent.end, bounding_box(tree.points, mid, parent.end)});
    }
  }
  return tree;
}

namespace {

bool contains(const std::vector<int>& sorted, int j) {
  return std::binary_search(sorted.begin(), sorted.end(), j);
}

}  // namespace

BlockClass BlockStructure::classification(int level, int i, int j) const {
  if (level < 0 || level > depth) return BlockClass::None;
  if (contains(far[level][i], j)) return BlockClass::LowRank;
  if (contains(near[level][i], j)) return level == depth ? BlockClass::Dense : BlockClass::Deferred;
  return BlockClass::None;
}

bool BlockStructure::is_near(int level, int i, int j) const {
  return contains(near[level][i], j);
}

bool BlockStructure::is_far(int level, int i, int j) const {
  return contains(far[level][i], j);
}

int BlockStructure::coarsest_lowrank_level() const {
  for (int l = 0; l <= depth; ++l)
    if (lowrank_count(l) > 0) return l;
  return -1;
}

int BlockStructure::lowrank_count(int level) const {
  int c = 0;
  for (const auto& row : far[level]) c += static_cast<int>(row.size());
  return c;
}

BlockStructure classify(const ClusterTree& tree, const Admissibility& adm) {
  BlockStructure s;
  s.admissibility = adm;
  s.depth = tree.depth;
  s.near.resize(tree.depth + 1);
  s.far.resize(tree.depth + 1);
  for (int l = 0; l <= tree.depth; ++l) {
    s.near[l].assign(tree.clusters(l), {});
    s.far[l].assign(tree.clusters(l), {});
  }
  s.near[0][0].push_back(0);
  for (int l = 1; l <= tree.depth; ++l) {
    for (int pi = 0; pi < tree.clusters(l - 1); ++pi) {
      for (int pj : s.near[l - 1][pi]) {
        for (int i = 2 * pi; i <= 2 * pi + 1; ++i) {
          for (int j = 2 * pj; j <= 2 * pj + 1; ++j) {
            bool low = false;
            if (i != j) {
              switch (adm.kind) {
                case Admissibility::Kind::Weak: low = true; break;
                case Admissibility::Kind::Flat: low = l == tree.depth; break;
                case Admissibility::Kind::Strong:
                  low = admissible(tree.node(l, i).box, tree.node(l, j).box, adm.eta);
                  break;
              }
            }
            (low ? s.far : s.near)[l][i].push_back(j);
          }
        }
      }
    }
    for (auto& row : s.near[l]) std::sort(row.begin(), row.end());
    for (auto& row : s.far[l]) std::sort(row.begin(), row.end());
  }
  return s;
}

}  // namespace h2spec

#pragma once

#include <span>
#include <vector>

#include "h2spec/geometry.hpp"

namespace h2spec {

struct Box {
  int dim = 0;
  Point lo{0, 0, 0};
  Point hi{0, 0, 0};

  double diameter() const;
};

Box bounding_box(const PointCloud& cloud, int begin, int end);

// Euclidean distance between boxes built from per-axis gaps; 0 when they touch.
double box_distance(const Box& a, const Box& b);

// max(diam a, diam b) <= eta * dist(a, b); never admissible at distance zero.
bool admissible(const Box& a, const Box& b, double eta);

struct ClusterNode {
  int begin = 0;
  int end = 0;
  Box box;

  int size() const { return end - begin; }
};

// Perfect binary tree over points stored in curve order. Level 0 is the root,
// level depth holds the 2^depth leaves, cluster i at level l has children
// 2i and 2i+1.
struct ClusterTree {
  int depth = 0;
  int leaf_size = 0;
  bool degenerate = false;  // fewer points than leaf_size: a single leaf
  PointCloud points;        // permuted into tree order
  std::vector<int> perm;    // perm[tree index] = original index
  std::vector<std::vector<ClusterNode>> levels;

  int n() const { return points.size(); }
  int clusters(int level) const { return 1 << level; }
  const ClusterNode& node(int level, int i) const { return levels[level][i]; }
};

ClusterTree build_tree(const PointCloud& cloud, std::span<const int> order, int leaf_size);

struct Admissibility {
  enum class Kind { Weak, Strong, Flat };
  Kind kind = Kind::Strong;
  double eta = 1.0;

  static Admissibility weak() { return {Kind::Weak, 0.0}; }
  static Admissibility strong(double eta = 1.0) { return {Kind::Strong, eta}; }
  // Single level of low-rank blocks: every off-diagonal leaf pair.
  static Admissibility flat() { return {Kind::Flat, 0.0}; }
};

enum class BlockClass { None, Dense, LowRank, Deferred };

// Per level and row cluster, the sorted column clusters that are low-rank
// (far) or part of the level system but not low-rank (near). Near pairs at
// the leaf level are the dense blocks.
struct BlockStructure {
  Admissibility admissibility;
  int depth = 0;
  std::vector<std::vector<std::vector<int>>> near;
  std::vector<std::vector<std::vector<int>>> far;

  BlockClass classification(int level, int i, int j) const;
  bool is_near(int level, int i, int j) const;
  bool is_far(int level, int i, int j) const;
  // Coarsest level holding a low-rank pair, or -1 when there is none.
  int coarsest_lowrank_level() const;
  int lowrank_count(int level) const;
};

BlockStructure classify(const ClusterTree& tree, const Admissibility& adm);

}  // namespace h2spec

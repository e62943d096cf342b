// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "treedp/errors.hpp"

namespace treedp {

// Immutable rooted tree of arbitrary shape. Node ids are opaque strings
// supplied by input files (or generated); internally nodes are dense indices
// in construction order, which is also the canonical order every algorithm
// uses for deterministic iteration. Depth is 1-based: the root has depth 1
// and depth() is the number of nodes on the longest root-to-leaf path. Arity
// is never stored; nothing here depends on it.
class TreeShape {
 public:
  // Build from (id, parent_id) pairs in file order; parent_id "-" marks the
  // root. Lines may reference parents defined later. Rejects duplicate ids,
  // zero or multiple roots, unknown parents, and parent cycles.
  static TreeShape from_edges(
      const std::vector<std::pair<std::string, std::string>>& edges) {
    TreeShape t;
    if (edges.empty()) throw input_error("tree: empty definition (no root)");
    t.ids_.reserve(edges.size());
    for (const auto& [id, parent] : edges) {
      if (id.empty() || parent.empty())
        throw input_error("tree: empty node id");
      if (!t.index_.emplace(id, static_cast<int>(t.ids_.size())).second)
        throw input_error("tree: duplicate node id '" + id + "'");
      t.ids_.push_back(id);
    }
    int n = static_cast<int>(t.ids_.size());
    t.parent_.assign(n, -1);
    t.children_.assign(n, {});
    int root = -1;
    for (int i = 0; i < n; ++i) {
      const std::string& parent = edges[i].second;
      if (parent == "-") {
        if (root >= 0)
          throw input_error("tree: multiple roots ('" + t.ids_[root] +
                            "' and '" + t.ids_[i] + "')");
        root = i;
        continue;
      }
      auto it = t.index_.find(parent);
      if (it == t.index_.end())
        throw input_error("tree: unknown parent '" + parent + "' of '" +
                          t.ids_[i] + "'");
      t.parent_[i] = it->second;
      t.children_[it->second].push_back(i);
    }
    t.root_ = root;  // may still be -1: cycles are diagnosed first, and a
    t.finish();      // rootless edge list always contains one
    if (root < 0) throw input_error("tree: no root");
    return t;
  }

  // Complete binary tree of depth d, ids "n1".."n{2^d-1}" in heap order:
  // node "nk" has children "n2k" and "n2k+1"; leaves are the last 2^(d-1)
  // ids. Refuses d that would exceed `node_cap` nodes.
  static TreeShape complete_binary(int d,
                                   std::int64_t node_cap = kDefaultNodeCap) {
    if (d < 1) throw input_error("complete_binary: depth must be >= 1");
    if (d >= 63 || (std::int64_t(1) << d) - 1 > node_cap)
      throw resource_error("complete_binary: 2^" + std::to_string(d) +
                           "-1 nodes exceeds cap " + std::to_string(node_cap));
    std::int64_t n = (std::int64_t(1) << d) - 1;
    std::vector<std::pair<std::string, std::string>> edges;
    edges.reserve(static_cast<std::size_t>(n));
    for (std::int64_t k = 1; k <= n; ++k)
      edges.emplace_back("n" + std::to_string(k),
                         k == 1 ? "-" : "n" + std::to_string(k / 2));
    return from_edges(edges);
  }

  int node_count() const { return static_cast<int>(ids_.size()); }
  int depth() const { return depth_max_; }
  int root() const { return root_; }

  const std::string& id_of(int idx) const { return ids_[idx]; }
  int index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      throw input_error("tree: unknown node id '" + id + "'");
    return it->second;
  }
  bool contains(const std::string& id) const { return index_.count(id) > 0; }

  int parent_of(int idx) const { return parent_[idx]; }
  const std::vector<int>& children_of(int idx) const { return children_[idx]; }
  bool is_leaf(int idx) const { return children_[idx].empty(); }
  int depth_of(int idx) const { return depth_[idx]; }

  // Leaf indices in canonical order.
  const std::vector<int>& leaves() const { return leaves_; }

  // Nodes with depth_of == i (1 <= i <= depth()), canonical order.
  const std::vector<int>& nodes_at_depth(int i) const {
    if (i < 1 || i > depth_max_)
      throw input_error("nodes_at_depth: depth " + std::to_string(i) +
                        " outside [1, " + std::to_string(depth_max_) + "]");
    return by_depth_[static_cast<std::size_t>(i - 1)];
  }

  static constexpr std::int64_t kDefaultNodeCap = std::int64_t(1) << 23;

 private:
  TreeShape() = default;

  // Computes depths (detecting parent cycles), leaves, and depth buckets.
  void finish() {
    int n = node_count();
    depth_.assign(n, 0);
    depth_max_ = 0;
    std::vector<int> chain;
    for (int i = 0; i < n; ++i) {
      if (depth_[i] != 0) continue;
      chain.clear();
      int v = i;
      while (v >= 0 && depth_[v] == 0) {
        chain.push_back(v);
        depth_[v] = -1;  // on the current chain
        v = parent_[v];
      }
      if (v >= 0 && depth_[v] == -1)
        throw input_error("tree: cycle through node '" + ids_[v] + "'");
      int base = v < 0 ? 0 : depth_[v];
      for (auto it = chain.rbegin(); it != chain.rend(); ++it)
        depth_[*it] = ++base;
      if (base > depth_max_) depth_max_ = base;
    }
    by_depth_.assign(static_cast<std::size_t>(depth_max_), {});
    for (int i = 0; i < n; ++i) {
      by_depth_[static_cast<std::size_t>(depth_[i] - 1)].push_back(i);
      if (children_[i].empty()) leaves_.push_back(i);
    }
  }

  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> index_;
  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
  std::vector<int> depth_;
  std::vector<std::vector<int>> by_depth_;
  std::vector<int> leaves_;
  int root_ = -1;
  int depth_max_ = 0;
};

// Free-function spelling of the generator, for call sites that read better
// without the class qualifier.
inline TreeShape complete_binary(
    int d, std::int64_t node_cap = TreeShape::kDefaultNodeCap) {
  return TreeShape::complete_binary(d, node_cap);
}

// Non-negative integer value per leaf; the private input. Absent leaves read
// as zero. Ordered map so iteration (and any serialization) is deterministic.
struct LeafCounts {
  std::map<std::string, std::int64_t> values;
};

// Exact per-node subtree sums (integers).
struct NodeWeights {
  std::vector<std::int64_t> w;  // aligned with TreeShape node indices
};

// Real-valued released estimates, aligned with TreeShape node indices.
struct NodeEstimates {
  std::vector<double> value;
};

// Exact bottom-up aggregation: w_u = sum of counts over leaves under u.
// Rejects counts at unknown or internal nodes, negative counts, and 64-bit
// overflow (checked, not wraparound).
inline NodeWeights aggregate_exact(const TreeShape& tree,
                                   const LeafCounts& counts) {
  NodeWeights out;
  out.w.assign(static_cast<std::size_t>(tree.node_count()), 0);
  for (const auto& [id, v] : counts.values) {
    int idx = tree.index_of(id);  // throws on unknown id
    if (!tree.is_leaf(idx))
      throw input_error("counts: node '" + id + "' is not a leaf");
    if (v < 0)
      throw input_error("counts: negative value at leaf '" + id + "'");
    out.w[static_cast<std::size_t>(idx)] = v;
  }
  // Children precede nothing in particular, so push sums parent-ward from the
  // deepest level upward.
  for (int depth = tree.depth(); depth >= 2; --depth) {
    for (int idx : tree.nodes_at_depth(depth)) {
      int p = tree.parent_of(idx);
      if (__builtin_add_overflow(out.w[static_cast<std::size_t>(p)],
                                 out.w[static_cast<std::size_t>(idx)],
                                 &out.w[static_cast<std::size_t>(p)]))
        throw input_error("aggregate_exact: 64-bit overflow at node '" +
                          tree.id_of(p) + "'");
    }
  }
  return out;
}

// Copy of `counts` with one leaf changed by exactly +-1 (an L1-neighbor of
// the input). Decrementing a zero count is rejected.
inline LeafCounts neighbor(const LeafCounts& counts, const std::string& leaf,
                           int delta) {
  if (delta != 1 && delta != -1)
    throw input_error("neighbor: delta must be +1 or -1");
  LeafCounts out = counts;
  std::int64_t& v = out.values[leaf];  // inserts 0 if absent
  if (v + delta < 0)
    throw input_error("neighbor: count at leaf '" + leaf +
                      "' would become negative");
  v += delta;
  return out;
}

}  // namespace treedp

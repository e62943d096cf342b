// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#include <catch_amalgamated.hpp>

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "treedp/tree.hpp"

using treedp::aggregate_exact;
using treedp::input_error;
using treedp::LeafCounts;
using treedp::neighbor;
using treedp::NodeWeights;
using treedp::resource_error;
using treedp::TreeShape;

namespace {

TreeShape three_node() {
  return TreeShape::from_edges({{"r", "-"}, {"a", "r"}, {"b", "r"}});
}

}  // namespace

TEST_CASE("from_edges builds the documented 3-node tree") {
  TreeShape t = three_node();
  CHECK(t.node_count() == 3);
  CHECK(t.depth() == 2);
  CHECK(t.id_of(t.root()) == "r");
  CHECK(t.is_leaf(t.index_of("a")));
  CHECK(t.is_leaf(t.index_of("b")));
  CHECK_FALSE(t.is_leaf(t.root()));
  CHECK(t.parent_of(t.index_of("a")) == t.root());
  CHECK(t.leaves().size() == 2);
  CHECK(t.depth_of(t.root()) == 1);
  CHECK(t.depth_of(t.index_of("a")) == 2);
}

TEST_CASE("from_edges accepts forward references to parents") {
  TreeShape t = TreeShape::from_edges({{"leaf", "mid"}, {"mid", "root"},
                                       {"root", "-"}});
  CHECK(t.depth() == 3);
  CHECK(t.id_of(t.root()) == "root");
  CHECK(t.parent_of(t.index_of("leaf")) == t.index_of("mid"));
}

TEST_CASE("from_edges rejects malformed structures with distinct messages") {
  CHECK_THROWS_MATCHES(
      TreeShape::from_edges({{"a", "-"}, {"a", "a"}}), input_error,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("duplicate")));
  CHECK_THROWS_MATCHES(
      TreeShape::from_edges({{"a", "-"}, {"b", "-"}}), input_error,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("multiple roots")));
  CHECK_THROWS_MATCHES(
      TreeShape::from_edges({{"a", "-"}, {"b", "zzz"}}), input_error,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("unknown parent")));
  // A rootless parent loop is a cycle, not a missing root.
  CHECK_THROWS_MATCHES(
      TreeShape::from_edges({{"a", "b"}, {"b", "a"}}), input_error,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("cycle")));
  CHECK_THROWS_MATCHES(
      TreeShape::from_edges({{"r", "-"}, {"a", "b"}, {"b", "a"}}), input_error,
      Catch::Matchers::MessageMatches(
          Catch::Matchers::ContainsSubstring("cycle")));
  CHECK_THROWS_AS(TreeShape::from_edges({}), input_error);
  CHECK_THROWS_AS(TreeShape::from_edges({{"", "-"}}), input_error);
}

TEST_CASE("complete_binary uses heap ids and exact sizes") {
  TreeShape t = treedp::complete_binary(4);
  CHECK(t.node_count() == 15);
  CHECK(t.depth() == 4);
  CHECK(t.id_of(t.root()) == "n1");
  CHECK(t.children_of(t.index_of("n3")) ==
        std::vector<int>{t.index_of("n6"), t.index_of("n7")});
  CHECK(t.leaves().size() == 8);
  for (int k = 8; k <= 15; ++k)
    CHECK(t.is_leaf(t.index_of("n" + std::to_string(k))));
  CHECK(t.nodes_at_depth(1).size() == 1);
  CHECK(t.nodes_at_depth(3).size() == 4);
  CHECK(t.nodes_at_depth(4).size() == 8);

  TreeShape d1 = treedp::complete_binary(1);
  CHECK(d1.node_count() == 1);
  CHECK(d1.is_leaf(d1.root()));
}

TEST_CASE("complete_binary refuses sizes past the node cap") {
  CHECK_THROWS_AS(treedp::complete_binary(0), input_error);
  CHECK_THROWS_AS(treedp::complete_binary(24), resource_error);
  CHECK_THROWS_AS(treedp::complete_binary(70), resource_error);
  CHECK_THROWS_AS(treedp::complete_binary(5, 10), resource_error);
  CHECK_NOTHROW(treedp::complete_binary(5, 31));
}

TEST_CASE("aggregate_exact sums bottom-up and validates counts") {
  TreeShape t = three_node();
  LeafCounts counts;
  counts.values = {{"a", 3}};
  NodeWeights w = aggregate_exact(t, counts);
  CHECK(w.w[static_cast<std::size_t>(t.root())] == 3);
  CHECK(w.w[static_cast<std::size_t>(t.index_of("a"))] == 3);
  CHECK(w.w[static_cast<std::size_t>(t.index_of("b"))] == 0);

  LeafCounts bad;
  bad.values = {{"a", -1}};
  CHECK_THROWS_AS(aggregate_exact(t, bad), input_error);
  bad.values = {{"r", 1}};
  CHECK_THROWS_AS(aggregate_exact(t, bad), input_error);
  bad.values = {{"zzz", 1}};
  CHECK_THROWS_AS(aggregate_exact(t, bad), input_error);
}

TEST_CASE("aggregate_exact sums a deeper tree correctly") {
  TreeShape t = treedp::complete_binary(3);
  LeafCounts counts;
  counts.values = {{"n4", 1}, {"n5", 2}, {"n6", 4}, {"n7", 8}};
  NodeWeights w = aggregate_exact(t, counts);
  CHECK(w.w[static_cast<std::size_t>(t.index_of("n1"))] == 15);
  CHECK(w.w[static_cast<std::size_t>(t.index_of("n2"))] == 3);
  CHECK(w.w[static_cast<std::size_t>(t.index_of("n3"))] == 12);
}

TEST_CASE("aggregate_exact detects 64-bit overflow instead of wrapping") {
  TreeShape t = three_node();
  LeafCounts counts;
  std::int64_t big = std::numeric_limits<std::int64_t>::max() / 2 + 1;
  counts.values = {{"a", big}, {"b", big}};
  CHECK_THROWS_MATCHES(aggregate_exact(t, counts), input_error,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("overflow")));
}

TEST_CASE("neighbor changes exactly one leaf by one unit") {
  LeafCounts counts;
  counts.values = {{"a", 3}};
  LeafCounts up = neighbor(counts, "a", +1);
  CHECK(up.values.at("a") == 4);
  LeafCounts down = neighbor(counts, "a", -1);
  CHECK(down.values.at("a") == 2);
  LeafCounts fresh = neighbor(counts, "b", +1);
  CHECK(fresh.values.at("b") == 1);
  CHECK_THROWS_AS(neighbor(counts, "b", -1), input_error);
  CHECK_THROWS_AS(neighbor(counts, "a", 2), input_error);
}

// Copyright 2026-present the dblsh authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "../src/byte_io.hpp"
#include "dblsh/errors.hpp"
#include "dblsh/rng.hpp"
#include "dblsh/spatial_index.hpp"

namespace dblsh {
namespace {

struct Points {
  std::vector<std::uint32_t> ids;
  std::vector<double> coords;
};

Points random_points(std::size_t n, std::size_t dim, std::uint64_t seed, double spread = 10.0) {
  Rng rng(seed);
  Points p;
  for (std::size_t i = 0; i < n; ++i) {
    p.ids.push_back(static_cast<std::uint32_t>(i));
    for (std::size_t j = 0; j < dim; ++j) p.coords.push_back(rng.gaussian() * spread);
  }
  return p;
}

std::vector<std::uint32_t> scan(const Points& p, std::size_t dim, const WindowRegion& win) {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < p.ids.size(); ++i) {
    bool in = true;
    for (std::size_t j = 0; j < dim; ++j) {
      in = in && std::abs(p.coords[i * dim + j] - win.center[j]) <= win.width / 2.0;
    }
    if (in) out.push_back(p.ids[i]);
  }
  return out;
}

std::vector<std::uint32_t> collect(const ProjectedTable& t, const WindowRegion& win) {
  std::vector<std::uint32_t> out;
  auto cursor = t.window_query(win);
  for (const auto& hit : cursor) out.push_back(hit.point_id);
  std::sort(out.begin(), out.end());
  return out;
}

TEST(SpatialIndexTest, BuildsOneDimensionalLeaves) {
  auto p = random_points(1000, 1, 1);
  const auto t = ProjectedTable::bulk_build(0, 1, p.ids, p.coords);
  EXPECT_EQ(t.leaf_count(), 32U);
  EXPECT_EQ(t.height(), 2U);  // leaf level plus root
  t.audit();
}

TEST(SpatialIndexTest, AuditOnLargerBuilds) {
  for (std::size_t dim : {1U, 2U, 5U, 10U}) {
    auto p = random_points(10000, dim, dim);
    const auto t = ProjectedTable::bulk_build(0, dim, p.ids, p.coords);
    EXPECT_NO_THROW(t.audit()) << dim;
    EXPECT_GE(t.leaf_count(), (10000U + 31U) / 32U);
    EXPECT_EQ(t.size(), 10000U);
  }
}

TEST(SpatialIndexTest, SmallAndAwkwardSizes) {
  for (std::size_t n : {1U, 2U, 3U, 31U, 32U, 33U, 65U, 1025U}) {
    auto p = random_points(n, 3, n);
    const auto t = ProjectedTable::bulk_build(0, 3, p.ids, p.coords, 8);
    EXPECT_NO_THROW(t.audit()) << n;
    WindowRegion all{{0.0, 0.0, 0.0}, 1e9};
    EXPECT_EQ(collect(t, all).size(), n);
  }
}

TEST(SpatialIndexTest, RejectsBadBuild) {
  EXPECT_THROW(ProjectedTable::bulk_build(0, 2, {}, {}), BuildError);
  auto p = random_points(10, 2, 1);
  EXPECT_THROW(ProjectedTable::bulk_build(0, 2, p.ids, p.coords, 3), BuildError);
}

TEST(SpatialIndexTest, DeterministicBuild) {
  auto p = random_points(3000, 4, 5);
  const auto a = ProjectedTable::bulk_build(0, 4, p.ids, p.coords);
  const auto b = ProjectedTable::bulk_build(0, 4, p.ids, p.coords);
  EXPECT_EQ(a, b);
}

// Property: window query returns exactly the linear-scan set.
TEST(SpatialIndexTest, WindowMatchesLinearScan) {
  for (std::size_t dim : {1U, 3U, 6U}) {
    auto p = random_points(4000, dim, 17 + dim);
    const auto t = ProjectedTable::bulk_build(0, dim, p.ids, p.coords);
    Rng rng(dim);
    for (int w = 0; w < 60; ++w) {
      WindowRegion win;
      for (std::size_t j = 0; j < dim; ++j) win.center.push_back(rng.gaussian() * 10.0);
      win.width = rng.uniform(0.5, 40.0);
      const auto expected = scan(p, dim, win);
      EXPECT_EQ(collect(t, win), expected) << dim << " " << w;
      EXPECT_EQ(t.count_in_window(win), expected.size());
    }
  }
}

TEST(SpatialIndexTest, ClosedBoundaries) {
  const std::vector<std::uint32_t> ids{0, 1, 2};
  const std::vector<double> coords{0.0, 1.0, 1.0000001};
  const auto t = ProjectedTable::bulk_build(0, 1, ids, coords);
  WindowRegion win{{0.5}, 1.0};
  EXPECT_EQ(collect(t, win), (std::vector<std::uint32_t>{0, 1}));
  EXPECT_TRUE(win.contains(std::vector<double>{1.0}));
  EXPECT_FALSE(win.contains(std::vector<double>{1.0000001}));
}

TEST(SpatialIndexTest, EmptyWindowAndZeroWidth) {
  auto p = random_points(500, 2, 3);
  const auto t = ProjectedTable::bulk_build(0, 2, p.ids, p.coords);
  EXPECT_TRUE(collect(t, WindowRegion{{1e6, 1e6}, 1.0}).empty());
  const std::vector<double> c(p.coords.begin() + 20, p.coords.begin() + 22);
  EXPECT_EQ(collect(t, WindowRegion{c, 0.0}), (std::vector<std::uint32_t>{10}));
}

TEST(SpatialIndexTest, CursorIsLazy) {
  auto p = random_points(10000, 3, 8);
  const auto t = ProjectedTable::bulk_build(0, 3, p.ids, p.coords);
  Rng rng(2);
  for (int w = 0; w < 30; ++w) {
    WindowRegion win{{rng.gaussian() * 10.0, rng.gaussian() * 10.0, rng.gaussian() * 10.0},
                     rng.uniform(1.0, 20.0)};
    auto cursor = t.window_query(win);
    std::size_t hits = 0;
    while (cursor.next()) {
      EXPECT_LE(cursor.nodes_visited(), t.intersecting_nodes(win));
      if (++hits == 3) break;
    }
    EXPECT_LE(cursor.nodes_visited(), t.intersecting_nodes(win));
  }
  // A window far from the data touches at most the root.
  auto far = t.window_query(WindowRegion{{1e6, 1e6, 1e6}, 1.0});
  EXPECT_FALSE(far.next());
  EXPECT_LE(far.nodes_visited(), 1U);
}

TEST(SpatialIndexTest, WrongWindowDimension) {
  auto p = random_points(50, 2, 1);
  const auto t = ProjectedTable::bulk_build(0, 2, p.ids, p.coords);
  EXPECT_THROW(t.window_query(WindowRegion{{0.0}, 1.0}), DimensionMismatch);
}

TEST(SpatialIndexTest, SerializationRoundTrip) {
  auto p = random_points(2000, 4, 12);
  const auto t = ProjectedTable::bulk_build(3, 4, p.ids, p.coords);
  detail::ByteWriter w;
  t.write(w);
  EXPECT_EQ(w.bytes().size(), t.byte_size());
  detail::ByteReader r(w.bytes());
  const auto back = ProjectedTable::read(r);
  EXPECT_TRUE(r.at_end());
  EXPECT_EQ(back, t);

  auto bytes = w.take();
  bytes.resize(bytes.size() / 2);
  detail::ByteReader cut(bytes);
  EXPECT_THROW(ProjectedTable::read(cut), FormatError);
}

}  // namespace
}  // namespace dblsh

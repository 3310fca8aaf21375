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

#include "dblsh/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

#include "byte_io.hpp"
#include "dblsh/errors.hpp"

namespace dblsh {

namespace {

// Sort-tile-recursive grouping of items [first, last) of `order`. Appends
// the size of every produced group to `groups`; groups are contiguous in
// the reordered `order`.
template <typename CenterFn>
void str_tile(std::vector<std::uint32_t>& order, std::size_t first, std::size_t last,
              std::size_t axis, std::size_t dim, std::size_t fanout, const CenterFn& center,
              std::vector<std::size_t>& groups) {
  const std::size_t count = last - first;
  auto by_axis = [&](std::uint32_t a, std::uint32_t b) {
    const double ca = center(a, axis);
    const double cb = center(b, axis);
    return ca < cb || (ca == cb && a < b);
  };
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(first),
            order.begin() + static_cast<std::ptrdiff_t>(last), by_axis);
  if (count <= fanout || axis + 1 == dim) {
    for (std::size_t at = first; at < last; at += fanout) {
      groups.push_back(std::min(fanout, last - at));
    }
    return;
  }
  const std::size_t pages = (count + fanout - 1) / fanout;
  const auto slabs = static_cast<std::size_t>(
      std::ceil(std::pow(static_cast<double>(pages), 1.0 / static_cast<double>(dim - axis))));
  const std::size_t slab_size = fanout * ((pages + slabs - 1) / slabs);
  for (std::size_t at = first; at < last; at += slab_size) {
    str_tile(order, at, std::min(last, at + slab_size), axis + 1, dim, fanout, center, groups);
  }
}

// Only the final group can be short; borrow from its predecessor.
void rebalance_tail(std::vector<std::size_t>& groups) {
  if (groups.size() >= 2 && groups.back() < kMinFanout) {
    const std::size_t need = kMinFanout - groups.back();
    groups[groups.size() - 2] -= need;
    groups.back() += need;
  }
}

// Box tests phrased through differences from the window center so that
// pruning agrees bit-for-bit with the per-point test |p_j - c_j| <= half.
bool box_disjoint(std::span<const double> lo, std::span<const double> hi,
                  std::span<const double> center, double half) {
  for (std::size_t j = 0; j < center.size(); ++j) {
    if (center[j] - hi[j] > half || lo[j] - center[j] > half) {
      return true;
    }
  }
  return false;
}

bool box_inside(std::span<const double> lo, std::span<const double> hi,
                std::span<const double> center, double half) {
  for (std::size_t j = 0; j < center.size(); ++j) {
    if (!(std::abs(center[j] - lo[j]) <= half && std::abs(hi[j] - center[j]) <= half)) {
      return false;
    }
  }
  return true;
}

struct BuildNode {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<std::uint32_t> children;  // indices into the level below
  std::uint32_t entry_begin = 0;        // leaves only, into sorted entries
  std::uint32_t entry_end = 0;
};

}  // namespace

bool WindowRegion::contains(std::span<const double> p) const {
  const double half = width / 2.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (!(std::abs(p[j] - center[j]) <= half)) {
      return false;
    }
  }
  return true;
}

ProjectedTable ProjectedTable::bulk_build(std::size_t table_id, std::size_t dim,
                                          std::vector<std::uint32_t> ids,
                                          std::vector<double> coords, std::size_t max_fanout) {
  if (ids.empty()) {
    throw BuildError("cannot bulk-build a table from zero entries");
  }
  if (dim == 0 || coords.size() != ids.size() * dim) {
    throw BuildError("entry coordinates do not match " + std::to_string(ids.size()) + " x " +
                     std::to_string(dim));
  }
  if (max_fanout < 2 * kMinFanout) {
    throw BuildError("max fanout must be at least " + std::to_string(2 * kMinFanout));
  }
  if (ids.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw BuildError("too many entries for one table");
  }

  // Leaf level.
  std::vector<std::uint32_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0U);
  std::vector<std::size_t> groups;
  str_tile(
      order, 0, order.size(), 0, dim, max_fanout,
      [&](std::uint32_t e, std::size_t axis) { return coords[e * dim + axis]; }, groups);
  rebalance_tail(groups);

  std::vector<std::vector<BuildNode>> levels(1);
  {
    std::size_t at = 0;
    for (std::size_t g : groups) {
      BuildNode node;
      node.lo.assign(dim, std::numeric_limits<double>::infinity());
      node.hi.assign(dim, -std::numeric_limits<double>::infinity());
      node.entry_begin = static_cast<std::uint32_t>(at);
      node.entry_end = static_cast<std::uint32_t>(at + g);
      for (std::size_t s = at; s < at + g; ++s) {
        for (std::size_t j = 0; j < dim; ++j) {
          const double v = coords[order[s] * dim + j];
          node.lo[j] = std::min(node.lo[j], v);
          node.hi[j] = std::max(node.hi[j], v);
        }
      }
      levels[0].push_back(std::move(node));
      at += g;
    }
  }

  // Upper levels: tile the node box centers of the level below.
  while (levels.back().size() > 1) {
    const auto& below = levels.back();
    std::vector<std::uint32_t> node_order(below.size());
    std::iota(node_order.begin(), node_order.end(), 0U);
    std::vector<std::size_t> parent_groups;
    str_tile(
        node_order, 0, node_order.size(), 0, dim, max_fanout,
        [&](std::uint32_t n, std::size_t axis) { return 0.5 * (below[n].lo[axis] + below[n].hi[axis]); },
        parent_groups);
    rebalance_tail(parent_groups);
    std::vector<BuildNode> level;
    std::size_t at = 0;
    for (std::size_t g : parent_groups) {
      BuildNode node;
      node.lo.assign(dim, std::numeric_limits<double>::infinity());
      node.hi.assign(dim, -std::numeric_limits<double>::infinity());
      for (std::size_t s = at; s < at + g; ++s) {
        const auto& child = below[node_order[s]];
        node.children.push_back(node_order[s]);
        for (std::size_t j = 0; j < dim; ++j) {
          node.lo[j] = std::min(node.lo[j], child.lo[j]);
          node.hi[j] = std::max(node.hi[j], child.hi[j]);
        }
      }
      level.push_back(std::move(node));
      at += g;
    }
    levels.push_back(std::move(level));
  }

  ProjectedTable table;
  table.table_id_ = table_id;
  table.dim_ = dim;
  table.max_fanout_ = max_fanout;
  table.height_ = levels.size();

  // Breadth-first node numbering: (level index, node index in level).
  struct Pending {
    std::size_t level;
    std::uint32_t index;
  };
  std::vector<Pending> bfs{{levels.size() - 1, 0}};
  for (std::size_t i = 0; i < bfs.size(); ++i) {
    const auto [lvl, idx] = bfs[i];
    Node out;
    const auto& src = levels[lvl][idx];
    if (lvl == 0) {
      out.leaf = true;
    } else {
      out.first_child = static_cast<std::uint32_t>(bfs.size());
      out.child_count = static_cast<std::uint32_t>(src.children.size());
      for (auto child : src.children) {
        bfs.push_back({lvl - 1, child});
      }
    }
    table.nodes_.push_back(out);
    table.lo_.insert(table.lo_.end(), src.lo.begin(), src.lo.end());
    table.hi_.insert(table.hi_.end(), src.hi.begin(), src.hi.end());
  }

  // Depth-first entry layout.
  table.ids_.reserve(ids.size());
  table.coords_.reserve(coords.size());
  struct Visit {
    std::uint32_t node;
    bool done;
  };
  std::vector<Visit> stack{{0, false}};
  while (!stack.empty()) {
    auto [n, done] = stack.back();
    stack.pop_back();
    Node& node = table.nodes_[n];
    if (done) {
      const Node& first = table.nodes_[node.first_child];
      const Node& last = table.nodes_[node.first_child + node.child_count - 1];
      node.entry_begin = first.entry_begin;
      node.entry_end = last.entry_end;
      continue;
    }
    if (node.leaf) {
      const auto& src = levels[0][bfs[n].index];
      node.entry_begin = static_cast<std::uint32_t>(table.ids_.size());
      for (auto s = src.entry_begin; s < src.entry_end; ++s) {
        const auto e = order[s];
        table.ids_.push_back(ids[e]);
        table.coords_.insert(table.coords_.end(), coords.begin() + e * dim,
                             coords.begin() + (e + 1) * dim);
      }
      node.entry_end = static_cast<std::uint32_t>(table.ids_.size());
      continue;
    }
    stack.push_back({n, true});
    for (std::uint32_t c = node.child_count; c-- > 0;) {
      stack.push_back({node.first_child + c, false});
    }
  }
  return table;
}

std::size_t ProjectedTable::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.leaf; }));
}

void ProjectedTable::check_window(const WindowRegion& window) const {
  if (window.center.size() != dim_) {
    throw DimensionMismatch("window has dimension " + std::to_string(window.center.size()) +
                            ", table " + std::to_string(table_id_) + " has " +
                            std::to_string(dim_));
  }
}

WindowCursor ProjectedTable::window_query(const WindowRegion& window) const {
  check_window(window);
  return WindowCursor(*this, window);
}

std::size_t ProjectedTable::count_in_window(const WindowRegion& window) const {
  check_window(window);
  if (nodes_.empty()) {
    return 0;
  }
  const double half = window.width / 2.0;
  std::size_t count = 0;
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const auto n = stack.back();
    stack.pop_back();
    if (box_disjoint(box_lo(n), box_hi(n), window.center, half)) {
      continue;
    }
    const bool inside = box_inside(box_lo(n), box_hi(n), window.center, half);
    const Node& node = nodes_[n];
    if (inside) {
      count += node.entry_end - node.entry_begin;
    } else if (node.leaf) {
      for (auto s = node.entry_begin; s < node.entry_end; ++s) {
        count += window.contains(entry_coords(s)) ? 1 : 0;
      }
    } else {
      for (std::uint32_t c = 0; c < node.child_count; ++c) {
        stack.push_back(node.first_child + c);
      }
    }
  }
  return count;
}

std::size_t ProjectedTable::intersecting_nodes(const WindowRegion& window) const {
  check_window(window);
  const double half = window.width / 2.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    count += box_disjoint(box_lo(n), box_hi(n), window.center, half) ? 0 : 1;
  }
  return count;
}

void ProjectedTable::audit() const {
  auto fail = [this](const std::string& msg) {
    throw BuildError("table " + std::to_string(table_id_) + ": " + msg);
  };
  if (nodes_.empty()) {
    fail("no nodes");
  }
  if (lo_.size() != nodes_.size() * dim_ || hi_.size() != nodes_.size() * dim_ ||
      coords_.size() != ids_.size() * dim_) {
    fail("array sizes inconsistent");
  }
  std::vector<bool> seen(ids_.size(), false);
  for (auto id : ids_) {
    if (id >= ids_.size() || seen[id]) {
      fail("point id " + std::to_string(id) + " duplicated or out of range");
    }
    seen[id] = true;
  }
  const Node& root = nodes_[0];
  if (root.entry_begin != 0 || root.entry_end != ids_.size()) {
    fail("root does not span all entries");
  }
  // Depth of every leaf must equal the height.
  std::vector<std::pair<std::uint32_t, std::size_t>> stack{{0, 1}};
  while (!stack.empty()) {
    const auto [n, depth] = stack.back();
    stack.pop_back();
    const Node& node = nodes_[n];
    if (node.entry_begin > node.entry_end || node.entry_end > ids_.size()) {
      fail("node " + std::to_string(n) + " has a bad entry range");
    }
    for (auto s = node.entry_begin; s < node.entry_end; ++s) {
      const auto p = entry_coords(s);
      for (std::size_t j = 0; j < dim_; ++j) {
        if (p[j] < box_lo(n)[j] || p[j] > box_hi(n)[j]) {
          fail("node " + std::to_string(n) + " box does not contain entry slot " +
               std::to_string(s));
        }
      }
    }
    const std::size_t fanout =
        node.leaf ? node.entry_end - node.entry_begin : node.child_count;
    if (n != 0 && (fanout < kMinFanout || fanout > max_fanout_)) {
      fail("node " + std::to_string(n) + " fanout " + std::to_string(fanout) +
           " outside [" + std::to_string(kMinFanout) + ", " + std::to_string(max_fanout_) + "]");
    }
    if (n == 0 && (fanout < 1 || fanout > max_fanout_)) {
      fail("root fanout " + std::to_string(fanout) + " out of range");
    }
    if (node.leaf) {
      if (depth != height_) {
        fail("leaf " + std::to_string(n) + " at depth " + std::to_string(depth) +
             ", height is " + std::to_string(height_));
      }
      continue;
    }
    if (node.first_child <= n || node.first_child + node.child_count > nodes_.size()) {
      fail("node " + std::to_string(n) + " has a bad child range");
    }
    std::uint32_t expect = node.entry_begin;
    for (std::uint32_t c = 0; c < node.child_count; ++c) {
      const auto child = node.first_child + c;
      if (nodes_[child].entry_begin != expect) {
        fail("children of node " + std::to_string(n) + " do not tile its entry range");
      }
      expect = nodes_[child].entry_end;
      for (std::size_t j = 0; j < dim_; ++j) {
        if (box_lo(child)[j] < box_lo(n)[j] || box_hi(child)[j] > box_hi(n)[j]) {
          fail("node " + std::to_string(n) + " box does not contain child " +
               std::to_string(child));
        }
      }
      stack.push_back({child, depth + 1});
    }
    if (expect != node.entry_end) {
      fail("children of node " + std::to_string(n) + " do not cover its entry range");
    }
  }
}

std::size_t ProjectedTable::byte_size() const {
  return nodes_.size() * (4 * sizeof(std::uint32_t) + 1) + (lo_.size() + hi_.size()) * 8 +
         ids_.size() * 4 + coords_.size() * 8 + 32;
}

void ProjectedTable::write(detail::ByteWriter& out) const {
  out.put<std::uint32_t>(static_cast<std::uint32_t>(table_id_));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(dim_));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(max_fanout_));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(height_));
  out.put<std::uint64_t>(nodes_.size());
  out.put<std::uint64_t>(ids_.size());
  for (const auto& n : nodes_) {
    out.put<std::uint32_t>(n.first_child);
    out.put<std::uint32_t>(n.child_count);
    out.put<std::uint32_t>(n.entry_begin);
    out.put<std::uint32_t>(n.entry_end);
    out.put<std::uint8_t>(n.leaf ? 1 : 0);
  }
  for (double v : lo_) out.put<double>(v);
  for (double v : hi_) out.put<double>(v);
  for (auto id : ids_) out.put<std::uint32_t>(id);
  for (double v : coords_) out.put<double>(v);
}

ProjectedTable ProjectedTable::read(detail::ByteReader& in) {
  ProjectedTable t;
  const std::size_t start = in.offset();
  t.table_id_ = in.get<std::uint32_t>("table id");
  t.dim_ = in.get<std::uint32_t>("table dimension");
  t.max_fanout_ = in.get<std::uint32_t>("table fanout");
  t.height_ = in.get<std::uint32_t>("table height");
  const auto node_count = in.get<std::uint64_t>("node count");
  const auto entry_count = in.get<std::uint64_t>("entry count");
  if (t.dim_ == 0 || node_count == 0 || entry_count == 0 ||
      node_count > in.remaining() / 17 || entry_count > in.remaining() / 4) {
    throw FormatError("implausible table header", start);
  }
  in.require(node_count * (17 + 16 * t.dim_) + entry_count * (4 + 8 * t.dim_), "table body");
  t.nodes_.resize(node_count);
  for (auto& n : t.nodes_) {
    n.first_child = in.get<std::uint32_t>("node");
    n.child_count = in.get<std::uint32_t>("node");
    n.entry_begin = in.get<std::uint32_t>("node");
    n.entry_end = in.get<std::uint32_t>("node");
    n.leaf = in.get<std::uint8_t>("node") != 0;
  }
  t.lo_.resize(node_count * t.dim_);
  t.hi_.resize(node_count * t.dim_);
  for (auto& v : t.lo_) v = in.get<double>("node box");
  for (auto& v : t.hi_) v = in.get<double>("node box");
  t.ids_.resize(entry_count);
  for (auto& id : t.ids_) id = in.get<std::uint32_t>("entry id");
  t.coords_.resize(entry_count * t.dim_);
  for (auto& v : t.coords_) v = in.get<double>("entry coordinate");
  try {
    t.audit();
  } catch (const BuildError& e) {
    throw FormatError(std::string("corrupt table: ") + e.what(), start);
  }
  return t;
}

WindowCursor::WindowCursor(const ProjectedTable& table, const WindowRegion& window)
    : table_(&table), center_(window.center), half_(window.width / 2.0) {
  if (!table.nodes_.empty()) {
    enter(0, false);
  }
}

// Pushes the node if its box meets the window. Leaves become the active
// scan range instead of a stack frame.
bool WindowCursor::enter(std::uint32_t n, bool parent_inside) {
  const auto blo = table_->box_lo(n);
  const auto bhi = table_->box_hi(n);
  bool inside = parent_inside;
  if (!parent_inside) {
    if (box_disjoint(blo, bhi, center_, half_)) {
      return false;
    }
    inside = box_inside(blo, bhi, center_, half_);
  }
  ++nodes_visited_;
  const auto& node = table_->nodes_[n];
  if (node.leaf) {
    slot_ = node.entry_begin;
    slot_end_ = node.entry_end;
    leaf_inside_ = inside;
  } else {
    stack_.push_back({n, 0, inside});
  }
  return true;
}

std::optional<WindowHit> WindowCursor::next() {
  while (true) {
    while (slot_ < slot_end_) {
      const auto s = slot_++;
      const auto p = table_->entry_coords(s);
      bool hit = leaf_inside_;
      if (!hit) {
        hit = true;
        for (std::size_t j = 0; j < p.size(); ++j) {
          if (!(std::abs(p[j] - center_[j]) <= half_)) {
            hit = false;
            break;
          }
        }
      }
      if (hit) {
        return WindowHit{table_->entry_id(s), p};
      }
    }
    if (stack_.empty()) {
      return std::nullopt;
    }
    auto& top = stack_.back();
    const auto& node = table_->nodes_[top.node];
    if (top.next_child == node.child_count) {
      stack_.pop_back();
      continue;
    }
    const auto child = node.first_child + top.next_child++;
    enter(child, top.inside);
  }
}

}  // namespace dblsh

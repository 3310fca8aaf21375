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

#pragma once

#include <cstddef>
#include <cstdint>
#include <iterator>
#include <optional>
#include <span>
#include <vector>

namespace dblsh {

namespace detail {
class ByteWriter;
class ByteReader;
}  // namespace detail

inline constexpr std::size_t kDefaultMaxFanout = 32;
inline constexpr std::size_t kMinFanout = 2;

/// Axis-aligned hypercube [center_j - width/2, center_j + width/2] in every
/// dimension. All faces are closed: a point exactly on the boundary is
/// inside.
struct WindowRegion {
  std::vector<double> center;
  double width = 0.0;

  bool contains(std::span<const double> p) const;
};

struct WindowHit {
  std::uint32_t point_id;
  std::span<const double> coords;
};

class ProjectedTable;

/// Lazy depth-first enumeration of a window query. Each call to next()
/// does only the work needed to produce one more hit.
class WindowCursor {
 public:
  WindowCursor(const ProjectedTable& table, const WindowRegion& window);

  std::optional<WindowHit> next();

  // Number of tree nodes entered so far; every entered node intersects the
  // window.
  std::size_t nodes_visited() const noexcept { return nodes_visited_; }

  class iterator {
   public:
    using iterator_category = std::input_iterator_tag;
    using value_type = WindowHit;
    using difference_type = std::ptrdiff_t;

    iterator() = default;
    explicit iterator(WindowCursor* cursor) : cursor_(cursor) { ++*this; }

    const WindowHit& operator*() const { return *current_; }
    const WindowHit* operator->() const { return &*current_; }
    iterator& operator++() {
      current_ = cursor_->next();
      if (!current_) {
        cursor_ = nullptr;
      }
      return *this;
    }
    void operator++(int) { ++*this; }
    bool operator==(const iterator& other) const { return cursor_ == other.cursor_; }

   private:
    WindowCursor* cursor_ = nullptr;
    std::optional<WindowHit> current_;
  };

  iterator begin() { return iterator(this); }
  iterator end() { return iterator(); }

 private:
  struct Frame {
    std::uint32_t node;
    std::uint32_t next_child;
    bool inside;  // node box lies entirely within the window
  };

  bool enter(std::uint32_t node, bool parent_inside);

  const ProjectedTable* table_;
  std::vector<double> center_;
  double half_ = 0.0;
  std::vector<Frame> stack_;
  std::uint32_t slot_ = 0;
  std::uint32_t slot_end_ = 0;
  bool leaf_inside_ = false;
  std::size_t nodes_visited_ = 0;
};

/// One K-dimensional projected copy of the dataset, indexed by a
/// sort-tile-recursive packed R-tree. Immutable after construction.
///
/// Nodes are laid out breadth-first so each node's children are
/// contiguous; entries are laid out in depth-first leaf order so each node
/// owns the contiguous entry range [entry_begin, entry_end).
class ProjectedTable {
 public:
  struct Node {
    std::uint32_t first_child = 0;
    std::uint32_t child_count = 0;
    std::uint32_t entry_begin = 0;
    std::uint32_t entry_end = 0;
    bool leaf = false;

    bool operator==(const Node&) const = default;
  };

  ProjectedTable() = default;

  /// coords holds ids.size() rows of dim values. Throws BuildError on empty
  /// input or max_fanout < 4.
  static ProjectedTable bulk_build(std::size_t table_id, std::size_t dim,
                                   std::vector<std::uint32_t> ids, std::vector<double> coords,
                                   std::size_t max_fanout = kDefaultMaxFanout);

  std::size_t table_id() const noexcept { return table_id_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t max_fanout() const noexcept { return max_fanout_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t leaf_count() const;

  const Node& node(std::size_t i) const { return nodes_[i]; }
  std::span<const double> box_lo(std::size_t i) const { return {lo_.data() + i * dim_, dim_}; }
  std::span<const double> box_hi(std::size_t i) const { return {hi_.data() + i * dim_, dim_}; }
  std::uint32_t entry_id(std::size_t slot) const { return ids_[slot]; }
  std::span<const double> entry_coords(std::size_t slot) const {
    return {coords_.data() + slot * dim_, dim_};
  }

  WindowCursor window_query(const WindowRegion& window) const;
  std::size_t count_in_window(const WindowRegion& window) const;

  // Linear scan over all nodes; diagnostic for the laziness bound.
  std::size_t intersecting_nodes(const WindowRegion& window) const;

  // Throws BuildError describing the first structural violation.
  void audit() const;

  std::size_t byte_size() const;
  void write(detail::ByteWriter& out) const;
  static ProjectedTable read(detail::ByteReader& in);

  bool operator==(const ProjectedTable&) const = default;

 private:
  friend class WindowCursor;

  void check_window(const WindowRegion& window) const;

  std::size_t table_id_ = 0;
  std::size_t dim_ = 0;
  std::size_t max_fanout_ = kDefaultMaxFanout;
  std::size_t height_ = 0;
  std::vector<Node> nodes_;
  std::vector<double> lo_;
  std::vector<double> hi_;
  std::vector<std::uint32_t> ids_;
  std::vector<double> coords_;
};

}  // namespace dblsh

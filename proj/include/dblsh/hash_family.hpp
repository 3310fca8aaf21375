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
#include <span>
#include <vector>

#include "dblsh/dataset.hpp"

namespace dblsh {

/// L x K Gaussian projection directions. Table i uses directions
/// (i, 0..K-1); h_ij(o) = a_ij . o. Offsets are stored as fractions
/// u_ij in [0, 1) of the bucket width and only matter for the quantized
/// baseline, where b_ij = u_ij * w.
class HashFamily {
 public:
  HashFamily() = default;

  /// Draws directions table-major, then function, then coordinate, all
  /// from one Box-Muller stream; the L*K offsets follow in the same order.
  static HashFamily generate(std::size_t L, std::size_t K, std::size_t dim, std::uint64_t seed);

  // Explicit directions (L*K*dim, row-major) and offset fractions (L*K).
  HashFamily(std::size_t L, std::size_t K, std::size_t dim, std::vector<double> directions,
             std::vector<double> offsets, std::uint64_t seed = 0);

  std::size_t tables() const noexcept { return L_; }
  std::size_t functions() const noexcept { return K_; }
  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::span<const double> direction(std::size_t table, std::size_t fn) const {
    return {directions_.data() + (table * K_ + fn) * dim_, dim_};
  }
  double offset_fraction(std::size_t table, std::size_t fn) const {
    return offsets_[table * K_ + fn];
  }
  const std::vector<double>& directions() const noexcept { return directions_; }
  const std::vector<double>& offsets() const noexcept { return offsets_; }

  // Writes G_table(o) into out (size K).
  void project_into(std::size_t table, PointView o, std::span<double> out) const;

  // All L compound hashes, row i = G_i(o).
  std::vector<std::vector<double>> project(PointView o) const;

  // floor((a_ij . o + u_ij w) / w) for every (i, j).
  std::vector<std::vector<std::int64_t>> quantize(PointView o, double w) const;

  bool operator==(const HashFamily&) const = default;

 private:
  void check_dim(PointView o) const;

  std::size_t L_ = 0;
  std::size_t K_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> directions_;
  std::vector<double> offsets_;
  std::uint64_t seed_ = 0;
};

}  // namespace dblsh

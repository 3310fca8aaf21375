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

#include "dblsh/hash_family.hpp"

#include <cmath>
#include <string>

#include "dblsh/errors.hpp"
#include "dblsh/rng.hpp"

namespace dblsh {

HashFamily HashFamily::generate(std::size_t L, std::size_t K, std::size_t dim,
                                std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> directions(L * K * dim);
  for (auto& v : directions) {
    v = rng.gaussian();
  }
  std::vector<double> offsets(L * K);
  for (auto& u : offsets) {
    u = rng.uniform();
  }
  return HashFamily(L, K, dim, std::move(directions), std::move(offsets), seed);
}

HashFamily::HashFamily(std::size_t L, std::size_t K, std::size_t dim,
                       std::vector<double> directions, std::vector<double> offsets,
                       std::uint64_t seed)
    : L_(L), K_(K), dim_(dim), directions_(std::move(directions)),
      offsets_(std::move(offsets)), seed_(seed) {
  if (L_ == 0 || K_ == 0 || dim_ == 0) {
    throw ParameterError("hash family needs L, K and dim >= 1");
  }
  if (directions_.size() != L_ * K_ * dim_) {
    throw DimensionMismatch("hash family expects " + std::to_string(L_ * K_ * dim_) +
                            " direction entries, got " + std::to_string(directions_.size()));
  }
  if (offsets_.size() != L_ * K_) {
    throw DimensionMismatch("hash family expects " + std::to_string(L_ * K_) +
                            " offsets, got " + std::to_string(offsets_.size()));
  }
}

void HashFamily::check_dim(PointView o) const {
  if (o.size() != dim_) {
    throw DimensionMismatch("point has dimension " + std::to_string(o.size()) +
                            ", hash family expects " + std::to_string(dim_));
  }
}

void HashFamily::project_into(std::size_t table, PointView o, std::span<double> out) const {
  check_dim(o);
  for (std::size_t j = 0; j < K_; ++j) {
    const double* a = directions_.data() + (table * K_ + j) * dim_;
    double dot = 0.0;
    for (std::size_t x = 0; x < dim_; ++x) {
      dot += a[x] * o[x];
    }
    out[j] = dot;
  }
}

std::vector<std::vector<double>> HashFamily::project(PointView o) const {
  std::vector<std::vector<double>> out(L_, std::vector<double>(K_));
  for (std::size_t i = 0; i < L_; ++i) {
    project_into(i, o, out[i]);
  }
  return out;
}

std::vector<std::vector<std::int64_t>> HashFamily::quantize(PointView o, double w) const {
  if (!(w > 0.0)) {
    throw DomainError("bucket width must be positive");
  }
  const auto projected = project(o);
  std::vector<std::vector<std::int64_t>> out(L_, std::vector<std::int64_t>(K_));
  for (std::size_t i = 0; i < L_; ++i) {
    for (std::size_t j = 0; j < K_; ++j) {
      const double b = offset_fraction(i, j) * w;
      out[i][j] = static_cast<std::int64_t>(std::floor((projected[i][j] + b) / w));
    }
  }
  return out;
}

}  // namespace dblsh

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
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace dblsh {

using PointView = std::span<const double>;

/// Immutable set of n points in R^d. Point ids are the storage indices
/// 0..n-1 and are never written to disk. Coordinates are held as doubles
/// in one row-major buffer.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t dim, std::vector<double> coords, std::string name = {});

  static Dataset from_rows(const std::vector<std::vector<double>>& rows,
                           std::string name = {});

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const noexcept { return size() == 0; }
  const std::string& name() const noexcept { return name_; }
  const std::vector<double>& coords() const noexcept { return coords_; }

  PointView point(std::size_t id) const {
    return PointView(coords_.data() + id * dim_, dim_);
  }
  PointView operator[](std::size_t id) const { return point(id); }

  // Throws ParameterError when an invariant does not hold.
  void validate() const;

  // FNV-1a over (dim, n, coordinate bit patterns).
  std::uint64_t checksum() const;

  Dataset scaled(double factor) const;
  Dataset subset(std::span<const std::size_t> ids, std::string name = {}) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
  std::string name_;
};

double squared_distance(PointView a, PointView b);
double distance(PointView a, PointView b);

Dataset load_fvecs(const std::filesystem::path& path);
void write_fvecs(const Dataset& ds, const std::filesystem::path& path);

struct UniformCube {};

struct GaussianClusters {
  std::size_t clusters = 10;
  double spread = 0.05;  // per-coordinate standard deviation
};

using Distribution = std::variant<UniformCube, GaussianClusters>;

// Accepts "uniform" or "clusters:<k>,<spread>".
Distribution parse_distribution(const std::string& text);
std::string to_string(const Distribution& dist);

/// Deterministic for a fixed seed. Draw order: for clusters, all k centers
/// (center-major, coordinate-minor, uniform in [0,1)), then per point one
/// cluster index followed by its d Gaussian offsets.
Dataset generate_synthetic(std::size_t n, std::size_t d, const Distribution& dist,
                           std::uint64_t seed);

struct HoldoutSplit {
  Dataset data;
  Dataset queries;
};

// The last query_count points become the query set.
HoldoutSplit split_holdout(const Dataset& ds, std::size_t query_count);

// Mean distance from sample_size randomly chosen points to their nearest
// other point in ds. Used to rescale data so the unit search radius is
// meaningful.
double mean_nn_distance(const Dataset& ds, std::size_t sample_size, std::uint64_t seed);

}  // namespace dblsh

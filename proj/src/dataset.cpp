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

#include "dblsh/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "byte_io.hpp"
#include "dblsh/errors.hpp"
#include "dblsh/rng.hpp"

namespace dblsh {

namespace detail {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path + "' for reading");
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw IoError("read failure on '" + path + "'");
  }
  return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) {
    throw IoError("write failure on '" + path + "'");
  }
}

}  // namespace detail

Dataset::Dataset(std::size_t dim, std::vector<double> coords, std::string name)
    : dim_(dim), coords_(std::move(coords)), name_(std::move(name)) {
  if (dim_ == 0 && !coords_.empty()) {
    throw ParameterError("dataset dimension must be positive");
  }
  if (dim_ != 0 && coords_.size() % dim_ != 0) {
    throw DimensionMismatch("coordinate buffer size " + std::to_string(coords_.size()) +
                            " is not a multiple of dim " + std::to_string(dim_));
  }
}

Dataset Dataset::from_rows(const std::vector<std::vector<double>>& rows, std::string name) {
  if (rows.empty()) {
    return Dataset(0, {}, std::move(name));
  }
  const std::size_t dim = rows.front().size();
  std::vector<double> coords;
  coords.reserve(dim * rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) {
      throw DimensionMismatch("row " + std::to_string(i) + " has " +
                              std::to_string(rows[i].size()) + " coordinates, expected " +
                              std::to_string(dim));
    }
    coords.insert(coords.end(), rows[i].begin(), rows[i].end());
  }
  return Dataset(dim, std::move(coords), std::move(name));
}

void Dataset::validate() const {
  if (size() > 0 && dim_ == 0) {
    throw ParameterError("dataset dimension must be positive");
  }
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    if (!std::isfinite(coords_[i])) {
      throw ParameterError("point " + std::to_string(i / dim_) + " coordinate " +
                           std::to_string(i % dim_) + " is not finite");
    }
  }
}

std::uint64_t Dataset::checksum() const {
  detail::Fnv1a h;
  h.update_u64(dim_);
  h.update_u64(size());
  for (double v : coords_) {
    h.update_u64(std::bit_cast<std::uint64_t>(v));
  }
  return h.value();
}

Dataset Dataset::scaled(double factor) const {
  std::vector<double> coords(coords_);
  for (auto& v : coords) {
    v *= factor;
  }
  return Dataset(dim_, std::move(coords), name_);
}

Dataset Dataset::subset(std::span<const std::size_t> ids, std::string name) const {
  std::vector<double> coords;
  coords.reserve(ids.size() * dim_);
  for (auto id : ids) {
    if (id >= size()) {
      throw ParameterError("subset id " + std::to_string(id) + " out of range");
    }
    auto p = point(id);
    coords.insert(coords.end(), p.begin(), p.end());
  }
  return Dataset(dim_, std::move(coords), std::move(name));
}

double squared_distance(PointView a, PointView b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return sum;
}

double distance(PointView a, PointView b) { return std::sqrt(squared_distance(a, b)); }

Dataset load_fvecs(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path.string());
  detail::ByteReader reader(bytes);
  std::vector<double> coords;
  std::size_t dim = 0;
  std::size_t record = 0;
  while (!reader.at_end()) {
    const std::size_t record_offset = reader.offset();
    if (reader.remaining() < 4) {
      throw FormatError("truncated dimension header in record " + std::to_string(record),
                        record_offset);
    }
    const auto d = reader.get<std::int32_t>("record dimension");
    if (d <= 0) {
      throw FormatError("non-positive dimension " + std::to_string(d) + " in record " +
                            std::to_string(record),
                        record_offset);
    }
    if (record == 0) {
      dim = static_cast<std::size_t>(d);
    } else if (static_cast<std::size_t>(d) != dim) {
      throw DimensionMismatch("record " + std::to_string(record) + " declares dimension " +
                              std::to_string(d) + ", expected " + std::to_string(dim));
    }
    if (reader.remaining() < dim * 4) {
      throw FormatError("truncated coordinates in record " + std::to_string(record),
                        reader.offset());
    }
    for (std::size_t j = 0; j < dim; ++j) {
      const std::size_t at = reader.offset();
      const auto v = reader.get<float>("coordinate");
      if (!std::isfinite(v)) {
        throw FormatError("non-finite coordinate in record " + std::to_string(record), at);
      }
      coords.push_back(static_cast<double>(v));
    }
    ++record;
  }
  return Dataset(dim, std::move(coords), path.filename().string());
}

void write_fvecs(const Dataset& ds, const std::filesystem::path& path) {
  detail::ByteWriter writer;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    writer.put<std::int32_t>(static_cast<std::int32_t>(ds.dim()));
    for (double v : ds.point(i)) {
      writer.put<float>(static_cast<float>(v));
    }
  }
  detail::write_file(path.string(), writer.bytes());
}

Distribution parse_distribution(const std::string& text) {
  if (text == "uniform" || text == "uniform-cube") {
    return UniformCube{};
  }
  const std::string prefix = "clusters:";
  if (text.rfind(prefix, 0) == 0) {
    std::istringstream in(text.substr(prefix.size()));
    GaussianClusters g;
    char comma = 0;
    long long k = 0;
    if (!(in >> k >> comma >> g.spread) || comma != ',' || k <= 0 || !(g.spread >= 0.0)) {
      throw ParameterError("bad cluster distribution '" + text +
                           "', expected clusters:<k>,<spread>");
    }
    in >> std::ws;
    if (!in.eof()) {
      throw ParameterError("trailing characters in distribution '" + text + "'");
    }
    g.clusters = static_cast<std::size_t>(k);
    return g;
  }
  throw ParameterError("unknown distribution '" + text + "'");
}

std::string to_string(const Distribution& dist) {
  if (const auto* g = std::get_if<GaussianClusters>(&dist)) {
    std::ostringstream out;
    out << "clusters:" << g->clusters << ',' << g->spread;
    return out.str();
  }
  return "uniform";
}

Dataset generate_synthetic(std::size_t n, std::size_t d, const Distribution& dist,
                           std::uint64_t seed) {
  if (n == 0) {
    throw ParameterError("generate_synthetic requires n >= 1");
  }
  if (d == 0) {
    throw ParameterError("generate_synthetic requires d >= 1");
  }
  Rng rng(seed);
  std::vector<double> coords(n * d);
  if (const auto* g = std::get_if<GaussianClusters>(&dist)) {
    if (g->clusters == 0) {
      throw ParameterError("cluster count must be positive");
    }
    std::vector<double> centers(g->clusters * d);
    for (auto& c : centers) {
      c = rng.uniform();
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = rng.below(g->clusters);
      for (std::size_t j = 0; j < d; ++j) {
        coords[i * d + j] = centers[c * d + j] + g->spread * rng.gaussian();
      }
    }
  } else {
    for (auto& v : coords) {
      v = rng.uniform();
    }
  }
  return Dataset(d, std::move(coords), "synthetic-" + to_string(dist));
}

HoldoutSplit split_holdout(const Dataset& ds, std::size_t query_count) {
  if (query_count >= ds.size()) {
    throw ParameterError("holdout of " + std::to_string(query_count) + " queries leaves no data");
  }
  const std::size_t keep = ds.size() - query_count;
  const auto& c = ds.coords();
  const auto split = c.begin() + static_cast<std::ptrdiff_t>(keep * ds.dim());
  return {Dataset(ds.dim(), std::vector<double>(c.begin(), split), ds.name()),
          Dataset(ds.dim(), std::vector<double>(split, c.end()), ds.name() + "-queries")};
}

double mean_nn_distance(const Dataset& ds, std::size_t sample_size, std::uint64_t seed) {
  if (ds.size() < 2) {
    throw ParameterError("nearest-neighbor scale needs at least two points");
  }
  Rng rng(seed);
  const std::size_t samples = std::min(sample_size, ds.size());
  double total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t i = rng.below(ds.size());
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < ds.size(); ++j) {
      if (j != i) {
        best = std::min(best, squared_distance(ds[i], ds[j]));
      }
    }
    total += std::sqrt(best);
  }
  return total / static_cast<double>(samples);
}

}  // namespace dblsh

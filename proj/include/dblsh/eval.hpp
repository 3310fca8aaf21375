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
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dblsh/dataset.hpp"
#include "dblsh/index.hpp"

namespace dblsh {

// Exact k nearest neighbors of every query, ascending and id-tiebroken.
using GroundTruth = std::vector<std::vector<Neighbor>>;

/// Exact k-NN by full scan with partial sort. Throws ParameterError unless
/// 1 <= k <= n.
std::vector<Neighbor> brute_force_knn(const Dataset& ds, PointView q, std::size_t k);

GroundTruth compute_ground_truth(const Dataset& ds, const Dataset& queries, std::size_t k,
                                 std::size_t threads = 1);

void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);

/// Reads gt_<data checksum>_<query checksum>_<k>.bin from cache_dir when
/// present, otherwise computes and stores it there.
GroundTruth cached_ground_truth(const Dataset& ds, const Dataset& queries, std::size_t k,
                                const std::filesystem::path& cache_dir, std::size_t threads = 1);

/// Mean of positionwise ratios result_i / truth_i. A zero true distance
/// contributes 1 when the result distance is also zero and makes the whole
/// ratio +infinity otherwise (a warning goes to stderr).
double overall_ratio(std::span<const Neighbor> result, std::span<const Neighbor> truth);

// |ids(result) ∩ ids(truth)| / |truth|.
double recall(std::span<const Neighbor> result, std::span<const Neighbor> truth);

enum class Algorithm : std::uint8_t { kDbLsh, kFbLsh, kOracle };

std::string to_string(Algorithm alg);
Algorithm parse_algorithm(const std::string& text);

struct BenchCell {
  Algorithm algorithm = Algorithm::kDbLsh;
  IndexParams params;
  BudgetAccounting accounting = BudgetAccounting::kCumulative;
};

struct BenchRow {
  BenchCell cell;
  bool ok = true;
  std::string error;
  double mean_query_ms = 0.0;
  double overall_ratio = 0.0;
  double recall = 0.0;
  double mean_candidates = 0.0;
  double build_seconds = 0.0;
  std::size_t index_bytes = 0;
  // Quality per repetition, for determinism checks.
  std::vector<double> repetition_recall;
  std::vector<double> repetition_ratio;
};

struct CurvePoint {
  std::string label;
  double c = 0.0;
  double mean_query_ms = 0.0;
  double recall = 0.0;
  double overall_ratio = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<CurvePoint> curve;
};

struct BenchOptions {
  std::size_t k = 50;
  std::size_t repetitions = 1;
  std::size_t threads = 1;
};

/// Runs every cell over all queries `repetitions` times. Timings cover the
/// query call only. A failing cell is recorded with ok = false and the run
/// continues.
BenchReport run_benchmark(const Dataset& ds, const Dataset& queries, const GroundTruth& truth,
                          const std::vector<BenchCell>& cells, const BenchOptions& options);

void write_report_csv(const BenchReport& report, std::ostream& out);
void write_report_json(const BenchReport& report, std::ostream& out);
void write_curve_csv(const BenchReport& report, std::ostream& out);

/// Benchmark manifest. Text format, one `key = value` per line, `#`
/// comments, comma-separated lists for grid keys. The grid is the
/// Cartesian product of algorithms x c x w0 x t x K x L x seed; the w0
/// value `auto` means 4 c^2.
struct BenchConfig {
  std::string dataset;
  std::string queries;
  std::string cache_dir;
  std::string report_csv = "bench_report.csv";
  std::string report_json = "bench_report.json";
  std::string curve_csv = "bench_curve.csv";
  // Used when `dataset` is empty: generate, then hold out query_count points.
  std::size_t synthetic_n = 10000;
  std::size_t synthetic_d = 32;
  std::string synthetic_dist = "clusters:10,0.05";
  std::size_t query_count = 100;
  std::vector<Algorithm> algorithms{Algorithm::kDbLsh, Algorithm::kFbLsh};
  std::vector<double> c_values{1.5};
  std::vector<std::optional<double>> w0_values{std::nullopt};
  std::vector<std::size_t> t_values{10};
  std::vector<std::size_t> K_values{10};
  std::vector<std::size_t> L_values{5};
  std::vector<std::uint64_t> seeds{1};
  ParamMode mode = ParamMode::kPractical;
  BudgetAccounting accounting = BudgetAccounting::kCumulative;
  std::size_t max_fanout = kDefaultMaxFanout;
  double scale = 1.0;
  bool rescale = false;
  BenchOptions options;

  // Applies one key/value pair; throws ParameterError on unknown keys or
  // malformed values.
  void set(const std::string& key, const std::string& value);
  std::vector<BenchCell> cells() const;
};

BenchConfig parse_bench_config(std::istream& in);
BenchConfig load_bench_config(const std::filesystem::path& path);

}  // namespace dblsh

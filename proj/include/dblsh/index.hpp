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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dblsh/dataset.hpp"
#include "dblsh/hash_family.hpp"
#include "dblsh/lsh_math.hpp"
#include "dblsh/spatial_index.hpp"

namespace dblsh {

enum class ParamMode : std::uint8_t { kTheoretical = 0, kPractical = 1 };

// Where candidates come from at query time.
enum class Bucketing : std::uint8_t {
  kDynamic,  // query-centric windows of width w0 * r
  kFixed,    // quantized cells floor((a.o + b) / (w0 * r)), the FB-LSH baseline
};

// kCumulative counts distinct verified points across all rounds of a query;
// kPerRound restarts the counter at every radius, counting every streamed
// point as printed in the single-radius procedure.
enum class BudgetAccounting : std::uint8_t { kCumulative, kPerRound };

std::string to_string(ParamMode mode);
std::string to_string(Bucketing bucketing);
std::string to_string(BudgetAccounting accounting);
ParamMode parse_param_mode(const std::string& text);
Bucketing parse_bucketing(const std::string& text);
BudgetAccounting parse_accounting(const std::string& text);

struct IndexParams {
  double c = 1.5;
  double w0 = 9.0;  // 4 c^2
  std::size_t t = 10;
  std::size_t K = 10;
  std::size_t L = 5;
  ParamMode mode = ParamMode::kPractical;
  std::uint64_t seed = 0;
  std::size_t max_fanout = kDefaultMaxFanout;
  // Coordinates are multiplied by `scale` before hashing and distance
  // tests, so radius 1 corresponds to 1/scale in data units.
  double scale = 1.0;

  void validate() const;
  std::size_t budget(std::size_t k) const { return 2 * t * L + k; }

  bool operator==(const IndexParams&) const = default;
};

struct Neighbor {
  std::uint32_t id = 0;
  double distance = 0.0;

  bool operator==(const Neighbor&) const = default;
};

// Ascending distance, ties by ascending id.
inline bool closer(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
}

enum class QueryStatus : std::uint8_t {
  kFound,            // k-th best verified point within c r
  kBudgetExhausted,  // verified-candidate budget reached
  kScheduleExhausted,  // largest radius examined without either condition
};

std::string to_string(QueryStatus status);

struct RoundTrace {
  double radius = 0.0;
  double window_width = 0.0;
  std::vector<std::size_t> table_hits;      // points streamed per table
  std::vector<std::size_t> table_verified;  // new points verified per table
};

struct QueryTimings {
  double project_seconds = 0.0;
  double search_seconds = 0.0;
  double total_seconds = 0.0;
};

struct QueryOutcome {
  std::vector<Neighbor> neighbors;  // ascending, id-tiebroken
  QueryStatus status = QueryStatus::kScheduleExhausted;
  double terminating_radius = 0.0;  // in index units (after scaling)
  std::size_t candidates_verified = 0;
  std::size_t rounds = 0;
  QueryTimings timings;
  std::vector<RoundTrace> trace;  // filled when QueryOptions::explain is set

  // Equality on results only; timings are excluded.
  bool same_result(const QueryOutcome& other) const;
};

struct QueryOptions {
  Bucketing bucketing = Bucketing::kDynamic;
  BudgetAccounting accounting = BudgetAccounting::kCumulative;
  bool explain = false;
  // Replaces 2tL + k when set.
  std::optional<std::size_t> budget;
};

enum class RcStatus : std::uint8_t { kFound, kBudgetExhausted, kNotFound };

struct RcResult {
  RcStatus status = RcStatus::kNotFound;
  Neighbor best;  // meaningful unless kNotFound
};

/// Mutable per-query state shared by the rounds of one query: the visited
/// set with cached exact distances, the k best verified points, and the
/// candidate counters.
class QueryState {
 public:
  explicit QueryState(std::size_t k = 1);

  std::size_t k() const noexcept { return k_; }
  std::size_t verified() const noexcept { return distances_.size(); }
  bool visited(std::uint32_t id) const { return distances_.contains(id); }
  // Distance (data units) of a visited point.
  double cached_distance(std::uint32_t id) const { return distances_.at(id); }

  // Records a newly verified point.
  void record(std::uint32_t id, double dist);

  // k-th best verified so far, if k points have been verified.
  std::optional<Neighbor> kth() const;
  std::optional<Neighbor> best() const;
  std::vector<Neighbor> sorted_best() const;

 private:
  friend class DbLshIndex;

  std::size_t k_;
  std::unordered_map<std::uint32_t, double> distances_;
  std::vector<Neighbor> heap_;  // max-heap by `closer`, size <= k
  std::optional<Neighbor> best_;
  std::size_t round_accesses_ = 0;
  RoundTrace* trace_ = nullptr;
};

struct BuildMeta {
  double project_seconds = 0.0;
  double tree_seconds = 0.0;
  std::size_t threads = 1;
};

/// L projected tables over one dataset plus the hash family that produced
/// them. Immutable after construction; queries are const and may run
/// concurrently, each with its own QueryState.
class DbLshIndex {
 public:
  static constexpr char kMagic[9] = "DBLSHIDX";
  static constexpr std::uint32_t kFormatVersion = 1;

  /// In theoretical mode K and L are derived from (n, t, c, w0) and
  /// written back into params(). `threads` splits table construction and
  /// never changes the result.
  static DbLshIndex build(std::shared_ptr<const Dataset> ds, IndexParams params,
                          std::size_t threads = 1);
  static DbLshIndex build(const Dataset& ds, IndexParams params, std::size_t threads = 1);

  // Uses the given directions instead of drawing them from params.seed.
  static DbLshIndex build_with_family(std::shared_ptr<const Dataset> ds, IndexParams params,
                                      HashFamily family);

  const IndexParams& params() const noexcept { return params_; }
  const HashFamily& family() const noexcept { return family_; }
  const Dataset& dataset() const noexcept { return *dataset_; }
  std::size_t table_count() const noexcept { return tables_.size(); }
  const ProjectedTable& table(std::size_t i) const { return tables_[i]; }
  const BuildMeta& build_meta() const noexcept { return meta_; }
  std::size_t byte_size() const;

  /// G_i(q) for every table, in index units (scaled).
  std::vector<std::vector<double>> project_query(PointView q) const;

  /// One (r, c)-NN round. Streams the L windows in table order, verifying
  /// points not yet in `state`. Found when the state's k-th best verified
  /// point lies within c r (checked before streaming and after each
  /// verification), BudgetExhausted when the counter reaches `budget`,
  /// NotFound when every stream drains.
  RcResult rc_nn(PointView q, double r, std::size_t budget, QueryState& state,
                 const QueryOptions& options = {}) const;

  // Same round over a precomputed projection of q.
  RcResult rc_nn_projected(PointView q, const std::vector<std::vector<double>>& projected,
                           double r, std::size_t budget, QueryState& state,
                           const QueryOptions& options = {}) const;

  QueryOutcome c_ann(PointView q, const QueryOptions& options = {}) const;
  QueryOutcome ck_ann(PointView q, std::size_t k, const QueryOptions& options = {}) const;

  // Fixed-bucket baseline over the same tables.
  RcResult fb_rc_nn(PointView q, double r, std::size_t budget, QueryState& state) const;
  QueryOutcome fb_c_ann(PointView q) const;
  QueryOutcome fb_ck_ann(PointView q, std::size_t k) const;

  /// Smallest radius in the schedule beyond which every table's window
  /// (or cell, for fixed buckets) covers all indexed points.
  double cover_radius(const std::vector<std::vector<double>>& projected,
                      Bucketing bucketing) const;

  std::vector<std::uint8_t> serialize() const;
  static DbLshIndex deserialize(std::span<const std::uint8_t> bytes,
                                std::shared_ptr<const Dataset> ds);
  void save(const std::filesystem::path& path) const;
  static DbLshIndex load(const std::filesystem::path& path, std::shared_ptr<const Dataset> ds);

  // Recomputes the projections of `sample` points and compares them with
  // the stored table entries; throws BuildError on mismatch.
  void audit_projections(std::size_t sample) const;

 private:
  DbLshIndex() = default;
  void build_tables(std::size_t threads);
  void check_query(PointView q) const;
  bool verify(std::uint32_t id, PointView q, QueryState& state) const;

  IndexParams params_;
  HashFamily family_;
  std::vector<ProjectedTable> tables_;
  std::shared_ptr<const Dataset> dataset_;
  BuildMeta meta_;
};

}  // namespace dblsh

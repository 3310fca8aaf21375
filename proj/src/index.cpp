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

#include "dblsh/index.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "byte_io.hpp"
#include "dblsh/errors.hpp"

namespace dblsh {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Max-heap order: the farthest of the kept neighbors sits on top.
bool heap_order(const Neighbor& a, const Neighbor& b) { return closer(a, b); }

std::int64_t cell_of(double projected, double offset, double width) {
  return static_cast<std::int64_t>(std::floor((projected + offset) / width));
}

}  // namespace

std::string to_string(ParamMode mode) {
  return mode == ParamMode::kTheoretical ? "theoretical" : "practical";
}

std::string to_string(Bucketing bucketing) {
  return bucketing == Bucketing::kDynamic ? "dynamic" : "fixed";
}

std::string to_string(BudgetAccounting accounting) {
  return accounting == BudgetAccounting::kCumulative ? "cumulative" : "per-round";
}

std::string to_string(QueryStatus status) {
  switch (status) {
    case QueryStatus::kFound:
      return "found";
    case QueryStatus::kBudgetExhausted:
      return "budget-exhausted";
    case QueryStatus::kScheduleExhausted:
      return "schedule-exhausted";
  }
  return "unknown";
}

ParamMode parse_param_mode(const std::string& text) {
  if (text == "theoretical") return ParamMode::kTheoretical;
  if (text == "practical") return ParamMode::kPractical;
  throw ParameterError("unknown parameter mode '" + text + "'");
}

Bucketing parse_bucketing(const std::string& text) {
  if (text == "dynamic" || text == "db-lsh") return Bucketing::kDynamic;
  if (text == "fixed" || text == "fb-lsh") return Bucketing::kFixed;
  throw ParameterError("unknown bucketing '" + text + "'");
}

BudgetAccounting parse_accounting(const std::string& text) {
  if (text == "cumulative") return BudgetAccounting::kCumulative;
  if (text == "per-round") return BudgetAccounting::kPerRound;
  throw ParameterError("unknown budget accounting '" + text + "'");
}

void IndexParams::validate() const {
  if (!(c > 1.0)) {
    throw ParameterError("approximation ratio c must exceed 1, got " + std::to_string(c));
  }
  if (!(w0 > 0.0) || !std::isfinite(w0)) {
    throw ParameterError("initial width w0 must be positive, got " + std::to_string(w0));
  }
  if (t < 1) {
    throw ParameterError("candidate multiplier t must be at least 1");
  }
  if (mode == ParamMode::kPractical && (K < 1 || L < 1)) {
    throw ParameterError("K and L must be at least 1");
  }
  if (max_fanout < 2 * kMinFanout) {
    throw ParameterError("max fanout must be at least " + std::to_string(2 * kMinFanout));
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ParameterError("scale must be positive and finite");
  }
}

bool QueryOutcome::same_result(const QueryOutcome& other) const {
  return neighbors == other.neighbors && status == other.status &&
         terminating_radius == other.terminating_radius &&
         candidates_verified == other.candidates_verified && rounds == other.rounds;
}

QueryState::QueryState(std::size_t k) : k_(k) {
  if (k_ == 0) {
    throw ParameterError("k must be at least 1");
  }
}

void QueryState::record(std::uint32_t id, double dist) {
  distances_.emplace(id, dist);
  const Neighbor n{id, dist};
  if (!best_ || closer(n, *best_)) {
    best_ = n;
  }
  if (heap_.size() < k_) {
    heap_.push_back(n);
    std::push_heap(heap_.begin(), heap_.end(), heap_order);
  } else if (closer(n, heap_.front())) {
    std::pop_heap(heap_.begin(), heap_.end(), heap_order);
    heap_.back() = n;
    std::push_heap(heap_.begin(), heap_.end(), heap_order);
  }
}

std::optional<Neighbor> QueryState::kth() const {
  if (heap_.size() < k_) {
    return std::nullopt;
  }
  return heap_.front();
}

std::optional<Neighbor> QueryState::best() const { return best_; }

std::vector<Neighbor> QueryState::sorted_best() const {
  std::vector<Neighbor> out(heap_);
  std::sort(out.begin(), out.end(), closer);
  return out;
}

DbLshIndex DbLshIndex::build(const Dataset& ds, IndexParams params, std::size_t threads) {
  return build(std::make_shared<const Dataset>(ds), params, threads);
}

DbLshIndex DbLshIndex::build(std::shared_ptr<const Dataset> ds, IndexParams params,
                             std::size_t threads) {
  if (!ds || ds->empty()) {
    throw BuildError("cannot build an index over an empty dataset");
  }
  ds->validate();
  params.validate();
  if (params.mode == ParamMode::kTheoretical) {
    const auto derived = derive_params(ds->size(), params.t, params.c, params.w0);
    params.K = derived.K;
    params.L = derived.L;
  }
  DbLshIndex idx;
  idx.params_ = params;
  idx.dataset_ = std::move(ds);
  idx.family_ = HashFamily::generate(params.L, params.K, idx.dataset_->dim(), params.seed);
  idx.build_tables(threads);
  return idx;
}

DbLshIndex DbLshIndex::build_with_family(std::shared_ptr<const Dataset> ds, IndexParams params,
                                         HashFamily family) {
  if (!ds || ds->empty()) {
    throw BuildError("cannot build an index over an empty dataset");
  }
  ds->validate();
  params.validate();
  if (family.dim() != ds->dim()) {
    throw DimensionMismatch("hash family dimension " + std::to_string(family.dim()) +
                            " does not match dataset dimension " + std::to_string(ds->dim()));
  }
  params.K = family.functions();
  params.L = family.tables();
  params.seed = family.seed();
  DbLshIndex idx;
  idx.params_ = params;
  idx.dataset_ = std::move(ds);
  idx.family_ = std::move(family);
  idx.build_tables(1);
  return idx;
}

void DbLshIndex::build_tables(std::size_t threads) {
  const Dataset& ds = *dataset_;
  const std::size_t n = ds.size();
  const std::size_t K = params_.K;
  if (n > std::numeric_limits<std::uint32_t>::max()) {
    throw BuildError("dataset too large for 32-bit point ids");
  }
  threads = std::clamp<std::size_t>(threads, 1, params_.L);
  tables_.assign(params_.L, ProjectedTable{});
  std::vector<double> project_time(params_.L, 0.0);
  std::vector<double> tree_time(params_.L, 0.0);

  auto work = [&](std::size_t worker) {
    for (std::size_t i = worker; i < params_.L; i += threads) {
      const auto start = Clock::now();
      std::vector<std::uint32_t> ids(n);
      std::vector<double> coords(n * K);
      for (std::size_t p = 0; p < n; ++p) {
        ids[p] = static_cast<std::uint32_t>(p);
        std::span<double> out(coords.data() + p * K, K);
        family_.project_into(i, ds[p], out);
        for (auto& v : out) {
          v *= params_.scale;
        }
      }
      project_time[i] = seconds_since(start);
      const auto tree_start = Clock::now();
      tables_[i] = ProjectedTable::bulk_build(i, K, std::move(ids), std::move(coords),
                                              params_.max_fanout);
      tree_time[i] = seconds_since(tree_start);
    }
  };

  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back(work, w);
    }
    for (auto& th : pool) {
      th.join();
    }
  }
  meta_.threads = threads;
  for (std::size_t i = 0; i < params_.L; ++i) {
    meta_.project_seconds += project_time[i];
    meta_.tree_seconds += tree_time[i];
  }
}

std::size_t DbLshIndex::byte_size() const {
  // Fixed header: magic, version, parameters, dataset identity, table count.
  std::size_t total = 117 + family_.directions().size() * 8 + family_.offsets().size() * 8;
  for (const auto& t : tables_) {
    total += t.byte_size();
  }
  return total;
}

void DbLshIndex::check_query(PointView q) const {
  if (q.size() != dataset_->dim()) {
    throw DimensionMismatch("query has dimension " + std::to_string(q.size()) +
                            ", index expects " + std::to_string(dataset_->dim()));
  }
}

std::vector<std::vector<double>> DbLshIndex::project_query(PointView q) const {
  check_query(q);
  auto projected = family_.project(q);
  for (auto& row : projected) {
    for (auto& v : row) {
      v *= params_.scale;
    }
  }
  return projected;
}

bool DbLshIndex::verify(std::uint32_t id, PointView q, QueryState& state) const {
  if (state.visited(id)) {
    return false;
  }
  state.record(id, distance(q, dataset_->point(id)));
  return true;
}

RcResult DbLshIndex::rc_nn(PointView q, double r, std::size_t budget, QueryState& state,
                           const QueryOptions& options) const {
  return rc_nn_projected(q, project_query(q), r, budget, state, options);
}

RcResult DbLshIndex::rc_nn_projected(PointView q,
                                     const std::vector<std::vector<double>>& projected,
                                     double r, std::size_t budget, QueryState& state,
                                     const QueryOptions& options) const {
  check_query(q);
  if (!(r > 0.0)) {
    throw ParameterError("search radius must be positive");
  }
  const double reach = params_.c * r;
  const double scale = params_.scale;
  auto found = [&]() {
    const auto kth = state.kth();
    return kth && kth->distance * scale <= reach;
  };
  auto best_or_empty = [&]() { return state.best().value_or(Neighbor{}); };

  // Points verified in earlier rounds lie inside the current, wider windows.
  if (found()) {
    return {RcStatus::kFound, best_or_empty()};
  }
  const bool cumulative = options.accounting == BudgetAccounting::kCumulative;
  if (cumulative && state.verified() >= budget) {
    return {state.best() ? RcStatus::kBudgetExhausted : RcStatus::kNotFound, best_or_empty()};
  }
  state.round_accesses_ = 0;
  // Every point has been verified; the streams can only repeat them.
  if (cumulative && state.verified() == dataset_->size()) {
    return {RcStatus::kNotFound, {}};
  }

  const double width = params_.w0 * r;
  const std::size_t K = params_.K;
  RoundTrace* trace = state.trace_;
  if (trace) {
    trace->radius = r;
    trace->window_width = width;
    trace->table_hits.assign(tables_.size(), 0);
    trace->table_verified.assign(tables_.size(), 0);
  }

  std::vector<std::int64_t> cell(K);
  std::vector<double> offsets(K);
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    WindowRegion window;
    if (options.bucketing == Bucketing::kDynamic) {
      window = {projected[i], width};
    } else {
      // The cell is half-open; widen the closed window a hair and filter
      // exactly by cell index below.
      window.center.resize(K);
      for (std::size_t j = 0; j < K; ++j) {
        offsets[j] = family_.offset_fraction(i, j) * width;
        cell[j] = cell_of(projected[i][j], offsets[j], width);
        window.center[j] = (static_cast<double>(cell[j]) + 0.5) * width - offsets[j];
      }
      window.width = width * (1.0 + 1e-9);
    }
    auto cursor = tables_[i].window_query(window);
    while (auto hit = cursor.next()) {
      if (options.bucketing == Bucketing::kFixed) {
        bool same = true;
        for (std::size_t j = 0; j < K && same; ++j) {
          same = cell_of(hit->coords[j], offsets[j], width) == cell[j];
        }
        if (!same) {
          continue;
        }
      }
      const bool fresh = verify(hit->point_id, q, state);
      if (trace) {
        ++trace->table_hits[i];
        trace->table_verified[i] += fresh ? 1 : 0;
      }
      if (fresh && found()) {
        return {RcStatus::kFound, best_or_empty()};
      }
      if (cumulative) {
        if (fresh && state.verified() >= budget) {
          return {RcStatus::kBudgetExhausted, best_or_empty()};
        }
      } else if (++state.round_accesses_ >= budget) {
        return {RcStatus::kBudgetExhausted, best_or_empty()};
      }
    }
  }
  return {RcStatus::kNotFound, {}};
}

double DbLshIndex::cover_radius(const std::vector<std::vector<double>>& projected,
                                Bucketing bucketing) const {
  const std::size_t K = params_.K;
  if (bucketing == Bucketing::kDynamic) {
    double need = 0.0;
    for (std::size_t i = 0; i < tables_.size(); ++i) {
      const auto lo = tables_[i].box_lo(0);
      const auto hi = tables_[i].box_hi(0);
      for (std::size_t j = 0; j < K; ++j) {
        const double reach = std::max(std::abs(projected[i][j] - lo[j]),
                                      std::abs(hi[j] - projected[i][j]));
        need = std::max(need, 2.0 * reach / params_.w0);
      }
    }
    return std::max(1.0, need);
  }
  for (int step = 0;; ++step) {
    const double r = std::pow(params_.c, step);
    if (!std::isfinite(r)) {
      return std::numeric_limits<double>::infinity();
    }
    const double width = params_.w0 * r;
    bool covered = true;
    for (std::size_t i = 0; i < tables_.size() && covered; ++i) {
      const auto lo = tables_[i].box_lo(0);
      const auto hi = tables_[i].box_hi(0);
      for (std::size_t j = 0; j < K && covered; ++j) {
        const double b = family_.offset_fraction(i, j) * width;
        const auto target = cell_of(projected[i][j], b, width);
        covered = cell_of(lo[j], b, width) == target && cell_of(hi[j], b, width) == target;
      }
    }
    if (covered) {
      return r;
    }
  }
}

QueryOutcome DbLshIndex::c_ann(PointView q, const QueryOptions& options) const {
  return ck_ann(q, 1, options);
}

QueryOutcome DbLshIndex::ck_ann(PointView q, std::size_t k, const QueryOptions& options) const {
  const auto start = Clock::now();
  check_query(q);
  if (k < 1 || k > dataset_->size()) {
    throw ParameterError("k must lie in [1, n=" + std::to_string(dataset_->size()) + "], got " +
                         std::to_string(k));
  }
  const auto projected = project_query(q);
  QueryOutcome out;
  out.timings.project_seconds = seconds_since(start);
  const auto search_start = Clock::now();

  const std::size_t budget = options.budget.value_or(params_.budget(k));
  QueryState state(k);
  out.status = QueryStatus::kScheduleExhausted;
  for (int step = 0;; ++step) {
    const double r = std::pow(params_.c, step);
    if (!std::isfinite(r)) {
      break;
    }
    RoundTrace trace;
    state.trace_ = options.explain ? &trace : nullptr;
    const auto result = rc_nn_projected(q, projected, r, budget, state, options);
    state.trace_ = nullptr;
    ++out.rounds;
    out.terminating_radius = r;
    if (options.explain) {
      trace.radius = r;
      trace.window_width = params_.w0 * r;
      out.trace.push_back(std::move(trace));
    }
    if (result.status == RcStatus::kFound) {
      out.status = QueryStatus::kFound;
      break;
    }
    if (result.status == RcStatus::kBudgetExhausted) {
      out.status = QueryStatus::kBudgetExhausted;
      break;
    }
  }
  out.neighbors = state.sorted_best();
  out.candidates_verified = state.verified();
  out.timings.search_seconds = seconds_since(search_start);
  out.timings.total_seconds = seconds_since(start);
  return out;
}

RcResult DbLshIndex::fb_rc_nn(PointView q, double r, std::size_t budget,
                              QueryState& state) const {
  QueryOptions options;
  options.bucketing = Bucketing::kFixed;
  return rc_nn(q, r, budget, state, options);
}

QueryOutcome DbLshIndex::fb_c_ann(PointView q) const { return fb_ck_ann(q, 1); }

QueryOutcome DbLshIndex::fb_ck_ann(PointView q, std::size_t k) const {
  QueryOptions options;
  options.bucketing = Bucketing::kFixed;
  return ck_ann(q, k, options);
}

std::vector<std::uint8_t> DbLshIndex::serialize() const {
  detail::ByteWriter out;
  out.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 8));
  out.put<std::uint32_t>(kFormatVersion);
  out.put<double>(params_.c);
  out.put<double>(params_.w0);
  out.put<std::uint64_t>(params_.t);
  out.put<std::uint64_t>(params_.K);
  out.put<std::uint64_t>(params_.L);
  out.put<std::uint8_t>(static_cast<std::uint8_t>(params_.mode));
  out.put<std::uint64_t>(params_.seed);
  out.put<std::uint64_t>(params_.max_fanout);
  out.put<double>(params_.scale);
  out.put<std::uint64_t>(dataset_->size());
  out.put<std::uint64_t>(dataset_->dim());
  out.put<std::uint64_t>(dataset_->checksum());
  out.put<std::uint64_t>(family_.seed());
  for (double v : family_.directions()) out.put<double>(v);
  for (double v : family_.offsets()) out.put<double>(v);
  out.put<std::uint64_t>(tables_.size());
  for (const auto& t : tables_) {
    t.write(out);
  }
  return out.take();
}

DbLshIndex DbLshIndex::deserialize(std::span<const std::uint8_t> bytes,
                                   std::shared_ptr<const Dataset> ds) {
  if (!ds) {
    throw ParameterError("loading an index requires its dataset");
  }
  detail::ByteReader in(bytes);
  const auto magic = in.get_bytes(8, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic)) {
    throw FormatError("not a DB-LSH index file (bad magic)", 0);
  }
  const auto version_at = in.offset();
  const auto version = in.get<std::uint32_t>("format version");
  if (version != kFormatVersion) {
    throw FormatError("unsupported index format version " + std::to_string(version),
                      version_at);
  }
  IndexParams p;
  p.c = in.get<double>("c");
  p.w0 = in.get<double>("w0");
  p.t = in.get<std::uint64_t>("t");
  p.K = in.get<std::uint64_t>("K");
  p.L = in.get<std::uint64_t>("L");
  const auto mode_at = in.offset();
  const auto mode = in.get<std::uint8_t>("mode");
  if (mode > 1) {
    throw FormatError("unknown parameter mode", mode_at);
  }
  p.mode = static_cast<ParamMode>(mode);
  p.seed = in.get<std::uint64_t>("seed");
  p.max_fanout = in.get<std::uint64_t>("max fanout");
  p.scale = in.get<double>("scale");
  try {
    p.validate();
  } catch (const ParameterError& e) {
    throw FormatError(std::string("invalid stored parameters: ") + e.what(), 12);
  }
  const auto n = in.get<std::uint64_t>("dataset size");
  const auto dim = in.get<std::uint64_t>("dataset dimension");
  const auto checksum = in.get<std::uint64_t>("dataset checksum");
  if (n != ds->size() || dim != ds->dim() || checksum != ds->checksum()) {
    throw ChecksumError("index was built over a different dataset (stored n=" +
                        std::to_string(n) + ", dim=" + std::to_string(dim) +
                        "; given n=" + std::to_string(ds->size()) +
                        ", dim=" + std::to_string(ds->dim()) + ")");
  }
  const auto family_seed = in.get<std::uint64_t>("family seed");
  const std::size_t fam_at = in.offset();
  if (p.K == 0 || p.L == 0 || p.L * p.K > in.remaining() / 8 ||
      p.L * p.K * dim > in.remaining() / 8) {
    throw FormatError("implausible hash family size", fam_at);
  }
  in.require(p.L * p.K * (dim + 1) * 8, "hash family");
  std::vector<double> directions(p.L * p.K * dim);
  for (auto& v : directions) v = in.get<double>("direction");
  std::vector<double> offsets(p.L * p.K);
  for (auto& v : offsets) v = in.get<double>("offset");

  DbLshIndex idx;
  idx.params_ = p;
  idx.dataset_ = std::move(ds);
  idx.family_ = HashFamily(p.L, p.K, dim, std::move(directions), std::move(offsets), family_seed);
  const auto tables_at = in.offset();
  const auto table_count = in.get<std::uint64_t>("table count");
  if (table_count != p.L) {
    throw FormatError("table count " + std::to_string(table_count) + " does not match L",
                      tables_at);
  }
  for (std::size_t i = 0; i < table_count; ++i) {
    const auto at = in.offset();
    auto table = ProjectedTable::read(in);
    if (table.dim() != p.K || table.size() != n || table.table_id() != i) {
      throw FormatError("table " + std::to_string(i) + " header inconsistent with index", at);
    }
    idx.tables_.push_back(std::move(table));
  }
  if (!in.at_end()) {
    throw FormatError("trailing bytes after index", in.offset());
  }
  return idx;
}

void DbLshIndex::save(const std::filesystem::path& path) const {
  detail::write_file(path.string(), serialize());
}

DbLshIndex DbLshIndex::load(const std::filesystem::path& path,
                            std::shared_ptr<const Dataset> ds) {
  const auto bytes = detail::read_file(path.string());
  return deserialize(bytes, std::move(ds));
}

void DbLshIndex::audit_projections(std::size_t sample) const {
  const std::size_t n = dataset_->size();
  sample = std::min(sample, n);
  std::vector<double> expect(params_.K);
  for (const auto& table : tables_) {
    std::vector<std::uint32_t> slot_of(n);
    for (std::size_t s = 0; s < n; ++s) {
      slot_of[table.entry_id(s)] = static_cast<std::uint32_t>(s);
    }
    for (std::size_t k = 0; k < sample; ++k) {
      const std::size_t id = sample == 1 ? 0 : k * (n - 1) / (sample - 1);
      family_.project_into(table.table_id(), dataset_->point(id), expect);
      const auto stored = table.entry_coords(slot_of[id]);
      for (std::size_t j = 0; j < params_.K; ++j) {
        if (stored[j] != expect[j] * params_.scale) {
          throw BuildError("table " + std::to_string(table.table_id()) + " projection of point " +
                           std::to_string(id) + " differs from the hash family");
        }
      }
    }
  }
}

}  // namespace dblsh

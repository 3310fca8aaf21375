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

#include "dblsh/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <json.hpp>

#include "byte_io.hpp"
#include "dblsh/errors.hpp"

namespace dblsh {

namespace {

using Clock = std::chrono::steady_clock;

// Runs fn(i) for i in [0, count) split across `threads` workers.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, const Fn& fn) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += threads) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  if (out.empty()) {
    throw ParameterError("empty list value");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !std::isfinite(v)) {
    throw ParameterError("bad number '" + text + "' for " + key);
  }
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw ParameterError("bad non-negative integer '" + text + "' for " + key);
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw ParameterError("integer out of range '" + text + "' for " + key);
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ParameterError("bad boolean '" + text + "' for " + key);
}

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream out;
  out << std::setprecision(10) << v;
  return out.str();
}

nlohmann::json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

std::string cell_label(const BenchCell& cell) {
  std::ostringstream out;
  out << to_string(cell.algorithm);
  if (cell.algorithm != Algorithm::kOracle) {
    out << " c=" << cell.params.c << " w0=" << cell.params.w0 << " t=" << cell.params.t
        << " K=" << cell.params.K << " L=" << cell.params.L << " seed=" << cell.params.seed;
  }
  return out.str();
}

}  // namespace

std::vector<Neighbor> brute_force_knn(const Dataset& ds, PointView q, std::size_t k) {
  if (k < 1 || k > ds.size()) {
    throw ParameterError("k must lie in [1, n=" + std::to_string(ds.size()) + "], got " +
                         std::to_string(k));
  }
  if (q.size() != ds.dim()) {
    throw DimensionMismatch("query dimension " + std::to_string(q.size()) +
                            " does not match dataset dimension " + std::to_string(ds.dim()));
  }
  std::vector<Neighbor> all(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    all[i] = {static_cast<std::uint32_t>(i), distance(q, ds[i])};
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    closer);
  all.resize(k);
  return all;
}

GroundTruth compute_ground_truth(const Dataset& ds, const Dataset& queries, std::size_t k,
                                 std::size_t threads) {
  GroundTruth gt(queries.size());
  parallel_for(queries.size(), threads,
               [&](std::size_t i) { gt[i] = brute_force_knn(ds, queries[i], k); });
  return gt;
}

void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
  detail::ByteWriter out;
  out.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>("DBLSHGT1"), 8));
  out.put<std::uint64_t>(gt.size());
  out.put<std::uint64_t>(gt.empty() ? 0 : gt.front().size());
  for (const auto& row : gt) {
    for (const auto& n : row) {
      out.put<std::uint32_t>(n.id);
      out.put<double>(n.distance);
    }
  }
  detail::write_file(path.string(), out.bytes());
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path.string());
  detail::ByteReader in(bytes);
  const auto magic = in.get_bytes(8, "magic");
  if (std::string(magic.begin(), magic.end()) != "DBLSHGT1") {
    throw FormatError("not a ground-truth file", 0);
  }
  const auto rows = in.get<std::uint64_t>("row count");
  const auto k = in.get<std::uint64_t>("k");
  if (k != 0 && rows > in.remaining() / (12 * k)) {
    throw FormatError("truncated ground truth", in.offset());
  }
  in.require(rows * k * 12, "ground truth rows");
  GroundTruth gt(rows, std::vector<Neighbor>(k));
  for (auto& row : gt) {
    for (auto& n : row) {
      n.id = in.get<std::uint32_t>("id");
      n.distance = in.get<double>("distance");
    }
  }
  return gt;
}

GroundTruth cached_ground_truth(const Dataset& ds, const Dataset& queries, std::size_t k,
                                const std::filesystem::path& cache_dir, std::size_t threads) {
  std::ostringstream name;
  name << "gt_" << std::hex << ds.checksum() << '_' << queries.checksum() << std::dec << '_' << k
       << ".bin";
  const auto path = cache_dir / name.str();
  if (std::filesystem::exists(path)) {
    auto gt = load_ground_truth(path);
    if (gt.size() == queries.size() && (gt.empty() || gt.front().size() == k)) {
      return gt;
    }
  }
  auto gt = compute_ground_truth(ds, queries, k, threads);
  std::filesystem::create_directories(cache_dir);
  save_ground_truth(gt, path);
  return gt;
}

double overall_ratio(std::span<const Neighbor> result, std::span<const Neighbor> truth) {
  if (result.size() != truth.size() || truth.empty()) {
    throw ParameterError("overall ratio needs equally sized, non-empty result and truth (" +
                         std::to_string(result.size()) + " vs " + std::to_string(truth.size()) +
                         ")");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i].distance == 0.0) {
      if (result[i].distance == 0.0) {
        sum += 1.0;
        continue;
      }
      std::cerr << "warning: overall ratio undefined at position " << i
                << " (exact distance 0); reporting infinity\n";
      return std::numeric_limits<double>::infinity();
    }
    sum += result[i].distance / truth[i].distance;
  }
  return sum / static_cast<double>(truth.size());
}

double recall(std::span<const Neighbor> result, std::span<const Neighbor> truth) {
  if (truth.empty()) {
    throw ParameterError("recall needs a non-empty truth set");
  }
  std::unordered_set<std::uint32_t> truth_ids;
  for (const auto& n : truth) truth_ids.insert(n.id);
  std::unordered_set<std::uint32_t> hits;
  for (const auto& n : result) {
    if (truth_ids.contains(n.id)) hits.insert(n.id);
  }
  return static_cast<double>(hits.size()) / static_cast<double>(truth.size());
}

std::string to_string(Algorithm alg) {
  switch (alg) {
    case Algorithm::kDbLsh:
      return "db-lsh";
    case Algorithm::kFbLsh:
      return "fb-lsh";
    case Algorithm::kOracle:
      return "oracle";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& text) {
  if (text == "db-lsh") return Algorithm::kDbLsh;
  if (text == "fb-lsh") return Algorithm::kFbLsh;
  if (text == "oracle") return Algorithm::kOracle;
  throw ParameterError("unknown algorithm '" + text + "'");
}

BenchReport run_benchmark(const Dataset& ds, const Dataset& queries, const GroundTruth& truth,
                          const std::vector<BenchCell>& cells, const BenchOptions& options) {
  if (truth.size() != queries.size()) {
    throw ParameterError("ground truth has " + std::to_string(truth.size()) + " rows for " +
                         std::to_string(queries.size()) + " queries");
  }
  if (options.repetitions < 1) {
    throw ParameterError("repetitions must be at least 1");
  }
  const auto shared = std::make_shared<const Dataset>(ds);
  const std::size_t nq = queries.size();
  BenchReport report;
  for (const auto& cell : cells) {
    BenchRow row;
    row.cell = cell;
    try {
      std::optional<DbLshIndex> index;
      if (cell.algorithm != Algorithm::kOracle) {
        const auto start = Clock::now();
        index.emplace(DbLshIndex::build(shared, cell.params));
        row.build_seconds = std::chrono::duration<double>(Clock::now() - start).count();
        row.index_bytes = index->byte_size();
        row.cell.params = index->params();
      }
      QueryOptions qopts;
      qopts.bucketing =
          cell.algorithm == Algorithm::kFbLsh ? Bucketing::kFixed : Bucketing::kDynamic;
      qopts.accounting = cell.accounting;

      double total_seconds = 0.0;
      double total_candidates = 0.0;
      for (std::size_t rep = 0; rep < options.repetitions; ++rep) {
        std::vector<double> rec(nq), ratio(nq), secs(nq), cand(nq);
        parallel_for(nq, options.threads, [&](std::size_t i) {
          const std::size_t k = truth[i].size();
          std::vector<Neighbor> result;
          const auto start = Clock::now();
          if (index) {
            auto outcome = index->ck_ann(queries[i], k, qopts);
            secs[i] = std::chrono::duration<double>(Clock::now() - start).count();
            cand[i] = static_cast<double>(outcome.candidates_verified);
            result = std::move(outcome.neighbors);
          } else {
            result = brute_force_knn(ds, queries[i], k);
            secs[i] = std::chrono::duration<double>(Clock::now() - start).count();
            cand[i] = static_cast<double>(ds.size());
          }
          rec[i] = recall(result, truth[i]);
          ratio[i] = result.size() == k ? overall_ratio(result, truth[i])
                                        : std::numeric_limits<double>::infinity();
        });
        const auto mean = [nq](const std::vector<double>& v) {
          return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(nq);
        };
        row.repetition_recall.push_back(mean(rec));
        row.repetition_ratio.push_back(mean(ratio));
        total_seconds += std::accumulate(secs.begin(), secs.end(), 0.0);
        total_candidates += mean(cand);
      }
      const auto reps = static_cast<double>(options.repetitions);
      row.recall = std::accumulate(row.repetition_recall.begin(), row.repetition_recall.end(),
                                   0.0) / reps;
      row.overall_ratio = std::accumulate(row.repetition_ratio.begin(),
                                          row.repetition_ratio.end(), 0.0) / reps;
      row.mean_candidates = total_candidates / reps;
      row.mean_query_ms = nq == 0 ? 0.0 : 1e3 * total_seconds / (reps * static_cast<double>(nq));
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    if (row.ok) {
      report.curve.push_back({cell_label(row.cell), row.cell.params.c, row.mean_query_ms,
                              row.recall, row.overall_ratio});
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_report_csv(const BenchReport& report, std::ostream& out) {
  out << "algorithm,mode,c,w0,t,K,L,seed,accounting,ok,mean_query_ms,overall_ratio,recall,"
         "mean_candidates,build_seconds,index_bytes,error\n";
  for (const auto& row : report.rows) {
    const auto& p = row.cell.params;
    std::string error = row.error;
    std::replace(error.begin(), error.end(), '"', '\'');
    out << to_string(row.cell.algorithm) << ',' << to_string(p.mode) << ',' << number(p.c)
        << ',' << number(p.w0) << ',' << p.t << ',' << p.K << ',' << p.L << ',' << p.seed << ','
        << to_string(row.cell.accounting) << ',' << (row.ok ? "true" : "false") << ','
        << number(row.mean_query_ms) << ',' << number(row.overall_ratio) << ','
        << number(row.recall) << ',' << number(row.mean_candidates) << ','
        << number(row.build_seconds) << ',' << row.index_bytes << ",\"" << error << "\"\n";
  }
}

void write_report_json(const BenchReport& report, std::ostream& out) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    const auto& p = row.cell.params;
    rows.push_back({{"algorithm", to_string(row.cell.algorithm)},
                    {"mode", to_string(p.mode)},
                    {"c", p.c},
                    {"w0", p.w0},
                    {"t", p.t},
                    {"K", p.K},
                    {"L", p.L},
                    {"seed", p.seed},
                    {"accounting", to_string(row.cell.accounting)},
                    {"ok", row.ok},
                    {"error", row.error},
                    {"mean_query_ms", json_number(row.mean_query_ms)},
                    {"overall_ratio", json_number(row.overall_ratio)},
                    {"recall", json_number(row.recall)},
                    {"mean_candidates", json_number(row.mean_candidates)},
                    {"build_seconds", json_number(row.build_seconds)},
                    {"index_bytes", row.index_bytes}});
  }
  out << nlohmann::json{{"rows", rows}}.dump(2) << '\n';
}

void write_curve_csv(const BenchReport& report, std::ostream& out) {
  out << "label,c,mean_query_ms,recall,overall_ratio\n";
  for (const auto& p : report.curve) {
    out << '"' << p.label << "\"," << number(p.c) << ',' << number(p.mean_query_ms) << ','
        << number(p.recall) << ',' << number(p.overall_ratio) << '\n';
  }
}

void BenchConfig::set(const std::string& key, const std::string& value) {
  if (key == "dataset") {
    dataset = value;
  } else if (key == "queries") {
    queries = value;
  } else if (key == "cache_dir") {
    cache_dir = value;
  } else if (key == "report_csv") {
    report_csv = value;
  } else if (key == "report_json") {
    report_json = value;
  } else if (key == "curve_csv") {
    curve_csv = value;
  } else if (key == "synthetic_n") {
    synthetic_n = parse_uint(key, value);
  } else if (key == "synthetic_d") {
    synthetic_d = parse_uint(key, value);
  } else if (key == "synthetic_dist") {
    parse_distribution(value);
    synthetic_dist = value;
  } else if (key == "query_count") {
    query_count = parse_uint(key, value);
  } else if (key == "algorithms") {
    algorithms.clear();
    for (const auto& a : split_list(value)) algorithms.push_back(parse_algorithm(a));
  } else if (key == "c") {
    c_values.clear();
    for (const auto& v : split_list(value)) c_values.push_back(parse_double(key, v));
  } else if (key == "w0") {
    w0_values.clear();
    for (const auto& v : split_list(value)) {
      if (v == "auto") {
        w0_values.emplace_back(std::nullopt);
      } else {
        w0_values.emplace_back(parse_double(key, v));
      }
    }
  } else if (key == "t") {
    t_values.clear();
    for (const auto& v : split_list(value)) t_values.push_back(parse_uint(key, v));
  } else if (key == "K") {
    K_values.clear();
    for (const auto& v : split_list(value)) K_values.push_back(parse_uint(key, v));
  } else if (key == "L") {
    L_values.clear();
    for (const auto& v : split_list(value)) L_values.push_back(parse_uint(key, v));
  } else if (key == "seed" || key == "seeds") {
    seeds.clear();
    for (const auto& v : split_list(value)) seeds.push_back(parse_uint(key, v));
  } else if (key == "mode") {
    mode = parse_param_mode(value);
  } else if (key == "accounting") {
    accounting = parse_accounting(value);
  } else if (key == "fanout") {
    max_fanout = parse_uint(key, value);
  } else if (key == "scale") {
    scale = parse_double(key, value);
  } else if (key == "rescale") {
    rescale = parse_bool(key, value);
  } else if (key == "k") {
    options.k = parse_uint(key, value);
  } else if (key == "repetitions") {
    options.repetitions = parse_uint(key, value);
  } else if (key == "threads") {
    options.threads = parse_uint(key, value);
  } else {
    throw ParameterError("unknown config key '" + key + "'");
  }
}

std::vector<BenchCell> BenchConfig::cells() const {
  std::vector<BenchCell> out;
  for (auto alg : algorithms) {
    if (alg == Algorithm::kOracle) {
      BenchCell cell;
      cell.algorithm = alg;
      out.push_back(cell);
      continue;
    }
    for (double c : c_values)
      for (const auto& w0 : w0_values)
        for (auto t : t_values)
          for (auto K : K_values)
            for (auto L : L_values)
              for (auto seed : seeds) {
                BenchCell cell;
                cell.algorithm = alg;
                cell.accounting = accounting;
                cell.params.c = c;
                cell.params.w0 = w0.value_or(4.0 * c * c);
                cell.params.t = t;
                cell.params.K = K;
                cell.params.L = L;
                cell.params.seed = seed;
                cell.params.mode = mode;
                cell.params.max_fanout = max_fanout;
                cell.params.scale = scale;
                out.push_back(cell);
              }
  }
  return out;
}

BenchConfig parse_bench_config(std::istream& in) {
  BenchConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParameterError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ParameterError& e) {
      throw ParameterError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return config;
}

BenchConfig load_bench_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config '" + path.string() + "'");
  }
  return parse_bench_config(in);
}

}  // namespace dblsh

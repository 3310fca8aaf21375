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

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "dblsh/dataset.hpp"
#include "dblsh/errors.hpp"
#include "dblsh/eval.hpp"
#include "dblsh/index.hpp"
#include "dblsh/lsh_math.hpp"
#include "dblsh/rng.hpp"

namespace dblsh::cli {

namespace {

using nlohmann::json;

struct GenArgs {
  std::size_t n = 0;
  std::size_t d = 0;
  std::string dist = "uniform";
  std::uint64_t seed = 0;
  std::string out;
  std::size_t holdout = 0;
  std::string queries_out;
};

struct ParamsArgs {
  std::optional<std::size_t> n;
  std::size_t t = 10;
  double c = 2.0;
  std::optional<double> w0;
  std::optional<double> gamma;
};

struct BuildArgs {
  std::string data;
  std::string out;
  std::string mode = "practical";
  std::size_t t = 10;
  double c = 1.5;
  std::optional<double> w0;
  std::size_t K = 10;
  std::size_t L = 5;
  std::uint64_t seed = 0;
  std::size_t fanout = kDefaultMaxFanout;
  bool rescale = false;
  std::optional<double> scale;
  std::size_t threads = 1;
};

struct QueryArgs {
  std::string index;
  std::string data;
  std::string queries;
  std::string point;
  std::size_t k = 1;
  bool explain = false;
  std::string bucketing = "dynamic";
  std::string accounting = "cumulative";
};

struct BenchArgs {
  std::string config;
  std::vector<std::string> overrides;
};

json outcome_json(const QueryOutcome& o, bool explain) {
  json neighbors = json::array();
  for (const auto& n : o.neighbors) {
    neighbors.push_back({{"id", n.id}, {"distance", n.distance}});
  }
  json j{{"neighbors", neighbors},
         {"terminating_radius", o.terminating_radius},
         {"candidates_verified", o.candidates_verified},
         {"rounds", o.rounds},
         {"status", to_string(o.status)},
         {"query_ms", 1e3 * o.timings.total_seconds}};
  if (explain) {
    json rounds = json::array();
    for (const auto& r : o.trace) {
      rounds.push_back({{"radius", r.radius},
                        {"window_width", r.window_width},
                        {"table_hits", r.table_hits},
                        {"table_verified", r.table_verified}});
    }
    j["explain"] = rounds;
  }
  return j;
}

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> v;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || !std::isfinite(x)) {
      throw ParameterError("bad coordinate '" + item + "' in --point");
    }
    v.push_back(x);
  }
  if (v.empty()) {
    throw ParameterError("--point needs at least one coordinate");
  }
  return v;
}

int cmd_gen(const GenArgs& a, std::ostream& out) {
  const auto dist = parse_distribution(a.dist);
  const auto all = generate_synthetic(a.n + a.holdout, a.d, dist,
                                      derive_seed(a.seed, SeedStream::kDataset));
  if (a.holdout > 0) {
    const auto split = split_holdout(all, a.holdout);
    write_fvecs(split.data, a.out);
    write_fvecs(split.queries, a.queries_out);
  } else {
    write_fvecs(all, a.out);
  }
  out << "n=" << a.n << " d=" << a.d << " seed=" << a.seed << " dist=" << to_string(dist)
      << '\n';
  if (a.holdout > 0) {
    out << "queries=" << a.holdout << " -> " << a.queries_out << '\n';
  }
  return kExitOk;
}

int cmd_params(const ParamsArgs& a, std::ostream& out) {
  if (a.w0 && a.gamma) {
    throw ParameterError("give either --w0 or --gamma, not both");
  }
  const double w0 = a.w0 ? *a.w0 : 2.0 * a.gamma.value_or(2.0) * a.c * a.c;
  const auto profile = collision_profile(a.c, w0);
  const double gamma = w0 / (2.0 * a.c * a.c);
  const double bound = std::pow(a.c, -profile.alpha);
  json j{{"c", a.c},
         {"w0", w0},
         {"gamma", gamma},
         {"p1", profile.p1},
         {"p2", profile.p2},
         {"rho_star", profile.rho_star},
         {"alpha", profile.alpha},
         {"rho_star_bound", bound},
         {"bound_holds", profile.rho_star <= bound}};
  if (a.n) {
    const auto derived = derive_params(*a.n, a.t, a.c, w0);
    j["n"] = *a.n;
    j["t"] = a.t;
    j["K"] = derived.K;
    j["L"] = derived.L;
    j["budget"] = 2 * a.t * derived.L + 1;
  }
  out << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_build(const BuildArgs& a, std::ostream& out) {
  auto ds = std::make_shared<const Dataset>(load_fvecs(a.data));
  IndexParams p;
  p.mode = parse_param_mode(a.mode);
  p.t = a.t;
  p.c = a.c;
  p.w0 = a.w0.value_or(4.0 * a.c * a.c);
  p.K = a.K;
  p.L = a.L;
  p.seed = derive_seed(a.seed, SeedStream::kHashFamily);
  p.max_fanout = a.fanout;
  if (a.scale && a.rescale) {
    throw ParameterError("give either --scale or --rescale, not both");
  }
  if (a.scale) {
    p.scale = *a.scale;
  } else if (a.rescale) {
    p.scale = 1.0 / mean_nn_distance(*ds, 100, derive_seed(a.seed, SeedStream::kSample));
  }
  const auto start = std::chrono::steady_clock::now();
  const auto index = DbLshIndex::build(ds, p, a.threads);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  index.save(a.out);
  const auto& q = index.params();
  out << "built " << a.out << " from " << a.data << " (n=" << ds->size() << ", d=" << ds->dim()
      << ")\n"
      << "build_seconds=" << secs << " K=" << q.K << " L=" << q.L << " seed=" << a.seed
      << " mode=" << to_string(q.mode) << " c=" << q.c << " w0=" << q.w0 << " t=" << q.t
      << " scale=" << q.scale << '\n';
  return kExitOk;
}

int cmd_query(const QueryArgs& a, std::ostream& out) {
  if (a.queries.empty() == a.point.empty()) {
    throw ParameterError("give exactly one of --queries or --point");
  }
  auto ds = std::make_shared<const Dataset>(load_fvecs(a.data));
  const auto index = DbLshIndex::load(a.index, ds);
  Dataset queries = a.point.empty() ? load_fvecs(a.queries)
                                    : Dataset::from_rows({parse_vector(a.point)}, "inline");
  if (queries.dim() != ds->dim()) {
    throw DimensionMismatch("query dimension " + std::to_string(queries.dim()) +
                            " does not match dataset dimension " + std::to_string(ds->dim()));
  }
  QueryOptions options;
  options.bucketing = parse_bucketing(a.bucketing);
  options.accounting = parse_accounting(a.accounting);
  options.explain = a.explain;
  json results = json::array();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto j = outcome_json(index.ck_ann(queries[i], a.k, options), a.explain);
    j["query"] = i;
    results.push_back(std::move(j));
  }
  out << json{{"k", a.k}, {"bucketing", a.bucketing}, {"results", results}}.dump(2) << '\n';
  return kExitOk;
}

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  BenchConfig config = a.config.empty() ? BenchConfig{} : load_bench_config(a.config);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ParameterError("--set expects key=value, got '" + kv + "'");
    }
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  const std::uint64_t seed = config.seeds.front();
  Dataset data;
  Dataset queries;
  if (config.dataset.empty()) {
    const auto all = generate_synthetic(config.synthetic_n + config.query_count,
                                        config.synthetic_d,
                                        parse_distribution(config.synthetic_dist),
                                        derive_seed(seed, SeedStream::kDataset));
    auto split = split_holdout(all, config.query_count);
    data = std::move(split.data);
    queries = std::move(split.queries);
  } else {
    if (config.queries.empty()) {
      throw ParameterError("config sets dataset but not queries");
    }
    data = load_fvecs(config.dataset);
    queries = load_fvecs(config.queries);
  }
  if (config.rescale) {
    config.scale = 1.0 / mean_nn_distance(data, 100, derive_seed(seed, SeedStream::kSample));
  }
  const GroundTruth truth =
      config.cache_dir.empty()
          ? compute_ground_truth(data, queries, config.options.k, config.options.threads)
          : cached_ground_truth(data, queries, config.options.k, config.cache_dir,
                                config.options.threads);
  const auto report = run_benchmark(data, queries, truth, config.cells(), config.options);

  auto open = [](const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    return f;
  };
  {
    auto f = open(config.report_csv);
    write_report_csv(report, f);
  }
  {
    auto f = open(config.report_json);
    write_report_json(report, f);
  }
  {
    auto f = open(config.curve_csv);
    write_curve_csv(report, f);
  }
  std::size_t failed = 0;
  for (const auto& row : report.rows) {
    if (!row.ok) {
      ++failed;
      err << "cell " << to_string(row.cell.algorithm) << " failed: " << row.error << '\n';
    }
  }
  out << "cells=" << report.rows.size() << " failed=" << failed << " report=" << config.report_csv
      << '\n';
  return !report.rows.empty() && failed == report.rows.size() ? kExitFailure : kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Approximate nearest-neighbor search with query-centric dynamic bucketing",
               "dblsh"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic dataset as fvecs");
  g->add_option("--n", gen.n, "Number of points")->required()->check(CLI::PositiveNumber);
  g->add_option("--d", gen.d, "Dimensionality")->required()->check(CLI::PositiveNumber);
  g->add_option("--dist", gen.dist, "uniform | clusters:<k>,<spread>");
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("-o,--out", gen.out, "Output fvecs path")->required();
  auto* holdout = g->add_option("--holdout", gen.holdout, "Extra points written as queries");
  g->add_option("--queries-out", gen.queries_out, "Query fvecs path")->needs(holdout);

  ParamsArgs params;
  auto* p = app.add_subcommand("params", "Derive K, L, rho* and alpha");
  p->add_option("--n", params.n, "Dataset cardinality");
  p->add_option("--t", params.t, "Candidate multiplier")->check(CLI::PositiveNumber);
  p->add_option("--c", params.c, "Approximation ratio (> 1)")
      ->check(CLI::Range(1.0, std::numeric_limits<double>::max()) &
              CLI::Validator([](std::string& s) {
                return std::stod(s) > 1.0 ? std::string{} : "c must exceed 1";
              }, "> 1"));
  p->add_option("--w0", params.w0, "Initial bucket width")->check(CLI::PositiveNumber);
  p->add_option("--gamma", params.gamma, "Use w0 = 2 gamma c^2")->check(CLI::PositiveNumber);

  BuildArgs build;
  auto* b = app.add_subcommand("build", "Build and save an index");
  b->add_option("--data", build.data, "Dataset fvecs")->required();
  b->add_option("-o,--out", build.out, "Index output path")->required();
  b->add_option("--mode", build.mode, "theoretical | practical")
      ->check(CLI::IsMember({"theoretical", "practical"}));
  b->add_option("--t", build.t, "Candidate multiplier")->check(CLI::PositiveNumber);
  b->add_option("--c", build.c, "Approximation ratio (> 1)");
  b->add_option("--w0", build.w0, "Initial bucket width (default 4c^2)")
      ->check(CLI::PositiveNumber);
  b->add_option("--K", build.K, "Hash functions per table (practical mode)")
      ->check(CLI::PositiveNumber);
  b->add_option("--L", build.L, "Tables (practical mode)")->check(CLI::PositiveNumber);
  b->add_option("--seed", build.seed, "Random seed");
  b->add_option("--fanout", build.fanout, "R-tree max fanout")->check(CLI::Range(4, 1 << 16));
  b->add_flag("--rescale", build.rescale, "Scale data so the mean NN distance is 1");
  b->add_option("--scale", build.scale, "Explicit coordinate scale")->check(CLI::PositiveNumber);
  b->add_option("--threads", build.threads, "Build threads")->check(CLI::PositiveNumber);

  QueryArgs query;
  auto* q = app.add_subcommand("query", "Answer (c,k)-ANN queries");
  q->add_option("--index", query.index, "Index file")->required();
  q->add_option("--data", query.data, "Dataset the index was built on")->required();
  q->add_option("--queries", query.queries, "Query fvecs");
  q->add_option("--point", query.point, "Inline query, comma separated");
  q->add_option("--k", query.k, "Neighbors to return")->check(CLI::PositiveNumber);
  q->add_flag("--explain", query.explain, "Per-round window sizes and per-table counts");
  q->add_option("--bucketing", query.bucketing, "dynamic | fixed")
      ->check(CLI::IsMember({"dynamic", "fixed"}));
  q->add_option("--accounting", query.accounting, "cumulative | per-round")
      ->check(CLI::IsMember({"cumulative", "per-round"}));

  BenchArgs bench;
  auto* be = app.add_subcommand("bench", "Run a benchmark grid");
  be->add_option("--config", bench.config, "Benchmark manifest")->check(CLI::ExistingFile);
  be->add_option("--set", bench.overrides, "Override a manifest key: key=value");

  std::vector<std::string> argv_rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv_rest.begin(), argv_rest.end());
  try {
    app.parse(argv_rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (g->parsed()) {
      if (gen.holdout > 0 && gen.queries_out.empty()) {
        throw ParameterError("--holdout needs --queries-out");
      }
      return cmd_gen(gen, out);
    }
    if (p->parsed()) return cmd_params(params, out);
    if (b->parsed()) return cmd_build(build, out);
    if (q->parsed()) return cmd_query(query, out);
    if (be->parsed()) return cmd_bench(bench, out, err);
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DimensionMismatch& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace dblsh::cli

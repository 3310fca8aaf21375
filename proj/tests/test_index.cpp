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

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "dblsh/errors.hpp"
#include "dblsh/eval.hpp"
#include "dblsh/index.hpp"
#include "dblsh/rng.hpp"
#include "oracles.hpp"

namespace dblsh {
namespace {

namespace fs = std::filesystem;

std::shared_ptr<const Dataset> clusters(std::size_t n, std::size_t d, std::uint64_t seed,
                                        double scale = 10.0) {
  const auto raw = generate_synthetic(n, d, GaussianClusters{10, 0.05}, seed);
  return std::make_shared<const Dataset>(raw.scaled(scale / mean_nn_distance(raw, 100, seed)));
}

std::vector<std::vector<double>> rows(const Dataset& ds) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < ds.size(); ++i) out.emplace_back(ds[i].begin(), ds[i].end());
  return out;
}

// Two-dimensional setup with halved coordinate projections: the neighbor
// o4 = (2, 0) projects to (1, 0), outside the r = 1 window of width 1.5.
class WorkedExampleTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ds_ = std::make_shared<const Dataset>(Dataset::from_rows(
        {{50.0, 50.0}, {-60.0, 40.0}, {70.0, -80.0}, {2.0, 0.0}, {-90.0, -90.0}}));
    IndexParams params;
    params.c = 1.5;
    params.w0 = 1.5;
    params.K = 2;
    params.L = 1;
    HashFamily family(1, 2, 2, {0.5, 0.0, 0.0, 0.5}, {0.0, 0.0});
    index_ = std::make_unique<DbLshIndex>(DbLshIndex::build_with_family(ds_, params, family));
  }

  std::shared_ptr<const Dataset> ds_;
  std::unique_ptr<DbLshIndex> index_;
  const std::vector<double> q_{0.0, 0.0};
};

TEST_F(WorkedExampleTest, RoundsByRadius) {
  QueryState state;
  auto r1 = index_->rc_nn(q_, 1.0, 100, state);
  EXPECT_EQ(r1.status, RcStatus::kNotFound);
  EXPECT_EQ(state.verified(), 0U);
  auto r2 = index_->rc_nn(q_, 1.5, 100, state);
  EXPECT_EQ(r2.status, RcStatus::kFound);
  EXPECT_EQ(r2.best.id, 3U);
  EXPECT_DOUBLE_EQ(r2.best.distance, 2.0);
}

TEST_F(WorkedExampleTest, CAnnStopsAtSecondRadius) {
  const auto out = index_->c_ann(q_);
  EXPECT_EQ(out.status, QueryStatus::kFound);
  ASSERT_EQ(out.neighbors.size(), 1U);
  EXPECT_EQ(out.neighbors[0].id, 3U);
  EXPECT_DOUBLE_EQ(out.terminating_radius, 1.5);
  EXPECT_EQ(out.rounds, 2U);
  EXPECT_EQ(out.candidates_verified, 1U);
}

TEST_F(WorkedExampleTest, ExplainTrace) {
  QueryOptions opts;
  opts.explain = true;
  const auto out = index_->c_ann(q_, opts);
  ASSERT_EQ(out.trace.size(), 2U);
  EXPECT_DOUBLE_EQ(out.trace[0].window_width, 1.5);
  EXPECT_EQ(out.trace[0].table_hits, (std::vector<std::size_t>{0}));
  EXPECT_DOUBLE_EQ(out.trace[1].window_width, 2.25);
  EXPECT_EQ(out.trace[1].table_verified, (std::vector<std::size_t>{1}));
}

TEST(FixedBucketTest, BoundaryMiss) {
  // q and o straddle the cell boundary at 1.0 although they are 0.1 apart.
  const auto ds = std::make_shared<const Dataset>(Dataset::from_rows({{1.05}, {40.0}}));
  IndexParams params;
  params.c = 1.5;
  params.w0 = 1.0;
  params.K = 1;
  params.L = 1;
  const auto index = DbLshIndex::build_with_family(ds, params, HashFamily(1, 1, 1, {1.0}, {0.0}));
  const std::vector<double> q{0.95};

  QueryState fixed_state;
  EXPECT_EQ(index.fb_rc_nn(q, 1.0, 100, fixed_state).status, RcStatus::kNotFound);
  QueryState dyn_state;
  const auto dyn = index.rc_nn(q, 1.0, 100, dyn_state);
  EXPECT_EQ(dyn.status, RcStatus::kFound);
  EXPECT_EQ(dyn.best.id, 0U);

  EXPECT_DOUBLE_EQ(index.c_ann(q).terminating_radius, 1.0);
  EXPECT_GT(index.fb_c_ann(q).terminating_radius, 1.0);
}

class QueryEngineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    auto split = split_holdout(*clusters(3040, 16, 4), 40);
    ds_ = std::make_shared<const Dataset>(std::move(split.data));
    queries_ = new Dataset(std::move(split.queries));
    IndexParams params;
    params.c = 1.5;
    params.w0 = 9.0;
    params.t = 20;
    params.K = 8;
    params.L = 5;
    params.seed = 77;
    index_ = new DbLshIndex(DbLshIndex::build(ds_, params));
  }
  static void TearDownTestSuite() {
    delete index_;
    delete queries_;
    ds_.reset();
  }

  static std::shared_ptr<const Dataset> ds_;
  static DbLshIndex* index_;
  static Dataset* queries_;
};

std::shared_ptr<const Dataset> QueryEngineTest::ds_;
DbLshIndex* QueryEngineTest::index_ = nullptr;
Dataset* QueryEngineTest::queries_ = nullptr;

TEST_F(QueryEngineTest, BudgetRespected) {
  for (std::size_t k : {1U, 10U, 50U}) {
    for (std::size_t i = 0; i < queries_->size(); ++i) {
      const auto out = index_->ck_ann((*queries_)[i], k);
      EXPECT_LE(out.candidates_verified, index_->params().budget(k));
      EXPECT_EQ(out.neighbors.size(), std::min(k, out.candidates_verified));
    }
  }
}

TEST_F(QueryEngineTest, CorrectWhenFound) {
  for (std::size_t i = 0; i < queries_->size(); ++i) {
    const auto q = (*queries_)[i];
    const auto out = index_->ck_ann(q, 10);
    if (out.status != QueryStatus::kFound) continue;
    const double limit = index_->params().c * out.terminating_radius;
    EXPECT_LE(out.neighbors.back().distance * index_->params().scale, limit);
  }
}

TEST_F(QueryEngineTest, NeighborsSortedAndExact) {
  for (std::size_t i = 0; i < queries_->size(); ++i) {
    const auto q = (*queries_)[i];
    const auto out = index_->ck_ann(q, 20);
    EXPECT_TRUE(std::is_sorted(out.neighbors.begin(), out.neighbors.end(), closer));
    for (const auto& nb : out.neighbors) {
      EXPECT_EQ(nb.distance, distance(q, ds_->point(nb.id)));
    }
  }
}

TEST_F(QueryEngineTest, SingleNeighborMatchesCAnn) {
  for (std::size_t i = 0; i < queries_->size(); ++i) {
    const auto q = (*queries_)[i];
    EXPECT_TRUE(index_->ck_ann(q, 1).same_result(index_->c_ann(q)));
  }
}

TEST_F(QueryEngineTest, Deterministic) {
  for (std::size_t i = 0; i < 10; ++i) {
    const auto q = (*queries_)[i];
    EXPECT_TRUE(index_->ck_ann(q, 5).same_result(index_->ck_ann(q, 5)));
  }
}

TEST_F(QueryEngineTest, RejectsBadK) {
  EXPECT_THROW(index_->ck_ann((*queries_)[0], 0), ParameterError);
  EXPECT_THROW(index_->ck_ann((*queries_)[0], ds_->size() + 1), ParameterError);
  const std::vector<double> wrong(3, 0.0);
  EXPECT_THROW(index_->c_ann(wrong), DimensionMismatch);
}

TEST_F(QueryEngineTest, PerRoundAccounting) {
  QueryOptions opts;
  opts.accounting = BudgetAccounting::kPerRound;
  for (std::size_t i = 0; i < queries_->size(); ++i) {
    const auto out = index_->ck_ann((*queries_)[i], 10, opts);
    EXPECT_FALSE(out.neighbors.empty());
  }
}

TEST(ExhaustiveTest, FullKEqualsBruteForce) {
  const auto ds = clusters(300, 6, 9);
  IndexParams params;
  params.K = 4;
  params.L = 3;
  params.t = 5;
  const auto index = DbLshIndex::build(ds, params);
  const auto points = rows(*ds);
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> q(6);
    for (auto& v : q) v = rng.gaussian() * 10.0;
    // A budget of n verifies everything eventually, so the answer is exact.
    QueryOptions opts;
    opts.budget = ds->size() + 1;
    const auto out = index.ck_ann(q, ds->size(), opts);
    const auto truth = testing::heap_knn(points, q, ds->size());
    ASSERT_EQ(out.neighbors.size(), truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      EXPECT_DOUBLE_EQ(out.neighbors[i].distance, truth[i].first);
    }
  }
}

TEST(BuildTest, TheoreticalModeDerivesShape) {
  const auto ds = clusters(10000, 8, 2);
  IndexParams params;
  params.mode = ParamMode::kTheoretical;
  params.c = 2.0;
  params.w0 = 1.0;
  params.t = 10;
  const auto index = DbLshIndex::build(ds, params);
  EXPECT_EQ(index.params().K, 5U);
  EXPECT_EQ(index.params().L, 60U);
  EXPECT_EQ(index.table_count(), 60U);
}

TEST(BuildTest, ThreadsDoNotChangeResult) {
  const auto ds = clusters(2000, 8, 3);
  IndexParams params;
  params.seed = 4;
  const auto a = DbLshIndex::build(ds, params, 1);
  const auto b = DbLshIndex::build(ds, params, 3);
  EXPECT_EQ(a.serialize(), b.serialize());
  EXPECT_NO_THROW(a.audit_projections(100));
}

TEST(BuildTest, RejectsBadParams) {
  const auto ds = clusters(100, 4, 1);
  IndexParams params;
  params.c = 1.0;
  EXPECT_THROW(DbLshIndex::build(ds, params), ParameterError);
  params = {};
  params.L = 0;
  EXPECT_THROW(DbLshIndex::build(ds, params), ParameterError);
}

class PersistenceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    path_ = fs::temp_directory_path() / "dblsh_persistence_test.idx";
    ds_ = clusters(2000, 12, 6);
    IndexParams params;
    params.seed = 8;
    params.t = 15;
    index_ = std::make_unique<DbLshIndex>(DbLshIndex::build(ds_, params));
  }
  void TearDown() override { fs::remove(path_); }

  fs::path path_;
  std::shared_ptr<const Dataset> ds_;
  std::unique_ptr<DbLshIndex> index_;
};

TEST_F(PersistenceTest, SaveLoadSameAnswers) {
  index_->save(path_);
  EXPECT_EQ(fs::file_size(path_), index_->byte_size());
  const auto back = DbLshIndex::load(path_, ds_);
  EXPECT_EQ(back.serialize(), index_->serialize());
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto q = ds_->point(rng.below(ds_->size()));
    EXPECT_TRUE(back.ck_ann(q, 10).same_result(index_->ck_ann(q, 10)));
  }
}

TEST_F(PersistenceTest, WrongDatasetRejected) {
  const auto bytes = index_->serialize();
  const auto other = std::make_shared<const Dataset>(ds_->scaled(1.5));
  EXPECT_THROW(DbLshIndex::deserialize(bytes, other), ChecksumError);
}

TEST_F(PersistenceTest, CorruptFilesRejected) {
  auto bytes = index_->serialize();
  for (std::size_t cut : {std::size_t{4}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> shorter(bytes.begin(), bytes.begin() + cut);
    EXPECT_THROW(DbLshIndex::deserialize(shorter, ds_), FormatError) << cut;
  }
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_THROW(DbLshIndex::deserialize(longer, ds_), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(DbLshIndex::deserialize(bad_magic, ds_), FormatError);
  auto bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(DbLshIndex::deserialize(bad_version, ds_), FormatError);
}

TEST(EnumTest, ParseRoundTrip) {
  EXPECT_EQ(parse_bucketing("fb-lsh"), Bucketing::kFixed);
  EXPECT_EQ(parse_bucketing(to_string(Bucketing::kDynamic)), Bucketing::kDynamic);
  EXPECT_EQ(parse_param_mode(to_string(ParamMode::kTheoretical)), ParamMode::kTheoretical);
  EXPECT_EQ(parse_accounting(to_string(BudgetAccounting::kPerRound)),
            BudgetAccounting::kPerRound);
  EXPECT_THROW(parse_bucketing("nope"), ParameterError);
}

}  // namespace
}  // namespace dblsh

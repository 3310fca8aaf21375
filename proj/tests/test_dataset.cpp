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

#include <filesystem>
#include <fstream>
#include <bit>
#include <limits>
#include <random>

#include "../src/byte_io.hpp"
#include "dblsh/dataset.hpp"
#include "dblsh/errors.hpp"

namespace dblsh {
namespace {

namespace fs = std::filesystem;

class DatasetIoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dblsh_dataset_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
            "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void write_raw(const fs::path& p, const std::vector<std::uint8_t>& bytes) const {
    detail::write_file(p.string(), bytes);
  }

  fs::path dir_;
};

std::vector<std::uint8_t> record(std::int32_t d, const std::vector<float>& values) {
  detail::ByteWriter w;
  w.put<std::int32_t>(d);
  for (float v : values) w.put<float>(v);
  return w.take();
}

TEST_F(DatasetIoTest, LoadsTwoRecordFile) {
  auto bytes = record(2, {0.0F, 0.0F});
  auto second = record(2, {3.0F, 4.0F});
  bytes.insert(bytes.end(), second.begin(), second.end());
  write_raw(path("two.fvecs"), bytes);

  const auto ds = load_fvecs(path("two.fvecs"));
  EXPECT_EQ(ds.dim(), 2U);
  ASSERT_EQ(ds.size(), 2U);
  EXPECT_EQ(ds[1][0], 3.0);
  EXPECT_EQ(ds[1][1], 4.0);
  EXPECT_DOUBLE_EQ(distance(ds[0], ds[1]), 5.0);
}

TEST_F(DatasetIoTest, InconsistentDimensionNamesRecord) {
  auto bytes = record(2, {1.0F, 2.0F});
  auto bad = record(3, {1.0F, 2.0F, 3.0F});
  bytes.insert(bytes.end(), bad.begin(), bad.end());
  write_raw(path("bad.fvecs"), bytes);
  try {
    load_fvecs(path("bad.fvecs"));
    FAIL() << "expected DimensionMismatch";
  } catch (const DimensionMismatch& e) {
    EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos) << e.what();
  }
}

TEST_F(DatasetIoTest, TruncatedRecordReportsOffset) {
  auto bytes = record(3, {1.0F, 2.0F, 3.0F});
  auto second = record(3, {1.0F, 2.0F, 3.0F});
  bytes.insert(bytes.end(), second.begin(), second.end() - 2);
  write_raw(path("trunc.fvecs"), bytes);
  try {
    load_fvecs(path("trunc.fvecs"));
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 20U);  // coordinates of record 1 start after 16 + 4 bytes
  }
}

TEST_F(DatasetIoTest, MissingFileIsIoError) {
  EXPECT_THROW(load_fvecs(path("absent.fvecs")), IoError);
}

TEST_F(DatasetIoTest, SingleRecordLayout) {
  write_fvecs(Dataset::from_rows({{1.5}}), path("one.fvecs"));
  const auto bytes = detail::read_file(path("one.fvecs").string());
  const std::vector<std::uint8_t> expected{0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0xC0, 0x3F};
  EXPECT_EQ(bytes, expected);
}

TEST_F(DatasetIoTest, EmptyDatasetWritesZeroBytes) {
  write_fvecs(Dataset(4, {}), path("empty.fvecs"));
  EXPECT_EQ(fs::file_size(path("empty.fvecs")), 0U);
  EXPECT_EQ(load_fvecs(path("empty.fvecs")).size(), 0U);
}

// Property: for random valid files, write(load(f)) reproduces f byte for byte.
TEST_F(DatasetIoTest, ByteRoundTripOnRandomFiles) {
  std::mt19937_64 gen(42);
  for (int trial = 0; trial < 25; ++trial) {
    const int d = 1 + static_cast<int>(gen() % 20);
    const int n = static_cast<int>(gen() % 40);
    std::vector<std::uint8_t> bytes;
    for (int i = 0; i < n; ++i) {
      std::vector<float> values(d);
      for (auto& v : values) {
        // Arbitrary finite bit patterns, including subnormals and -0.
        std::uint32_t bits;
        do {
          bits = static_cast<std::uint32_t>(gen());
        } while (((bits >> 23) & 0xFF) == 0xFF);
        v = std::bit_cast<float>(bits);
      }
      auto r = record(d, values);
      bytes.insert(bytes.end(), r.begin(), r.end());
    }
    write_raw(path("in.fvecs"), bytes);
    write_fvecs(load_fvecs(path("in.fvecs")), path("out.fvecs"));
    EXPECT_EQ(detail::read_file(path("out.fvecs").string()), bytes) << "trial " << trial;
  }
}

// Property: load(write(ds)) equals ds up to float32 rounding.
TEST_F(DatasetIoTest, ValueRoundTripUpToFloatPrecision) {
  const auto ds = generate_synthetic(50, 7, GaussianClusters{3, 0.2}, 9);
  write_fvecs(ds, path("v.fvecs"));
  const auto back = load_fvecs(path("v.fvecs"));
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.coords().size(); ++i) {
    EXPECT_EQ(back.coords()[i], static_cast<double>(static_cast<float>(ds.coords()[i])));
  }
}

TEST(SyntheticTest, DeterministicForSeed) {
  const auto a = generate_synthetic(5, 2, UniformCube{}, 7);
  const auto b = generate_synthetic(5, 2, UniformCube{}, 7);
  EXPECT_EQ(a.coords(), b.coords());
  EXPECT_NE(a.coords(), generate_synthetic(5, 2, UniformCube{}, 8).coords());
  for (double v : a.coords()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(SyntheticTest, ClusterMeansInsideUnitCube) {
  const auto ds = generate_synthetic(1000, 32, GaussianClusters{10, 0.05}, 1);
  ds.validate();
  for (std::size_t j = 0; j < ds.dim(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) mean += ds[i][j];
    mean /= static_cast<double>(ds.size());
    EXPECT_GE(mean, 0.0);
    EXPECT_LE(mean, 1.0);
  }
}

TEST(SyntheticTest, RejectsEmpty) {
  EXPECT_THROW(generate_synthetic(0, 3, UniformCube{}, 1), ParameterError);
  EXPECT_THROW(generate_synthetic(3, 0, UniformCube{}, 1), ParameterError);
}

TEST(SyntheticTest, DistributionParsing) {
  EXPECT_TRUE(std::holds_alternative<UniformCube>(parse_distribution("uniform")));
  const auto g = std::get<GaussianClusters>(parse_distribution("clusters:10,0.05"));
  EXPECT_EQ(g.clusters, 10U);
  EXPECT_DOUBLE_EQ(g.spread, 0.05);
  EXPECT_THROW(parse_distribution("clusters:10"), ParameterError);
  EXPECT_THROW(parse_distribution("clusters:0,0.1"), ParameterError);
  EXPECT_THROW(parse_distribution("normal"), ParameterError);
}

TEST(DatasetTest, ValidateRejectsNonFinite) {
  auto ds = Dataset(2, {0.0, std::numeric_limits<double>::quiet_NaN()});
  EXPECT_THROW(ds.validate(), ParameterError);
  EXPECT_THROW(Dataset(3, {1.0, 2.0}), DimensionMismatch);
  EXPECT_THROW(Dataset::from_rows({{1.0}, {1.0, 2.0}}), DimensionMismatch);
}

TEST(DatasetTest, ChecksumTracksContent) {
  const auto a = Dataset::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  const auto b = Dataset::from_rows({{1.0, 2.0}, {3.0, 4.5}});
  EXPECT_EQ(a.checksum(), Dataset::from_rows({{1.0, 2.0}, {3.0, 4.0}}).checksum());
  EXPECT_NE(a.checksum(), b.checksum());
  EXPECT_NE(a.checksum(), Dataset::from_rows({{1.0, 2.0, 3.0, 4.0}}).checksum());
}

TEST(DatasetTest, HoldoutSplitKeepsOrder) {
  const auto ds = Dataset::from_rows({{0.0}, {1.0}, {2.0}, {3.0}});
  const auto split = split_holdout(ds, 1);
  EXPECT_EQ(split.data.size(), 3U);
  EXPECT_EQ(split.queries.size(), 1U);
  EXPECT_EQ(split.queries[0][0], 3.0);
  EXPECT_THROW(split_holdout(ds, 4), ParameterError);
}

TEST(DatasetTest, MeanNearestNeighborDistance) {
  // Points on a line with unit gaps: every nearest neighbor is at distance 1.
  const auto ds = Dataset::from_rows({{0.0}, {1.0}, {2.0}, {3.0}, {4.0}});
  EXPECT_DOUBLE_EQ(mean_nn_distance(ds, 50, 3), 1.0);
  EXPECT_DOUBLE_EQ(mean_nn_distance(ds.scaled(2.5), 50, 3), 2.5);
}

}  // namespace
}  // namespace dblsh

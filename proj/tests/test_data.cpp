#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "bsord/data.hpp"

namespace bsord {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("bsord_data_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string write(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p) << content;
    return p.string();
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

TEST(LoadCsv, RanksNumericTargetsAscending) {
  TempDir dir;
  const auto path = dir.write("t.csv", "a,b,target\n1,2,3\n4,5,5\n6,7,3\n8,9,8\n");
  const auto ds = load_csv(path, "target");
  EXPECT_EQ(ds.labels, (std::vector<std::int64_t>{0, 1, 0, 2}));
  EXPECT_EQ(ds.k_states, 3);
  EXPECT_EQ(ds.label_dictionary, (std::vector<std::string>{"3", "5", "8"}));
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(ds.features(3, 1), 9.0);
}

TEST(LoadCsv, NumericOrderNotLexicographic) {
  TempDir dir;
  const auto path = dir.write("t.csv", "x,y\n0,10\n1,9\n2,-1\n3,9.5\n");
  const auto ds = load_csv(path, "y");
  EXPECT_EQ(ds.labels, (std::vector<std::int64_t>{3, 1, 0, 2}));
}

TEST(LoadCsv, ExplicitOrder) {
  TempDir dir;
  const auto path = dir.write("t.csv", "x,level\n1,mid\n2,high\n3,low\n4,mid\n");
  const auto ds = load_csv(path, "level", std::vector<std::string>{"low", "mid", "high"});
  EXPECT_EQ(ds.labels, (std::vector<std::int64_t>{1, 2, 0, 1}));
  EXPECT_THROW(load_csv(path, "level", std::vector<std::string>{"low", "mid"}), LabelError);
  EXPECT_THROW(load_csv(path, "level"), LabelError);
}

TEST(LoadCsv, Errors) {
  TempDir dir;
  const auto good = dir.write("g.csv", "x,y\n1,0\n2,1\n");
  EXPECT_THROW(load_csv(good, "z"), SchemaError);
  const auto bad = dir.write("b.csv", "x,w,y\n1,2,0\n2,oops,1\n");
  try {
    load_csv(bad, "y");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
    EXPECT_EQ(e.column(), 1u);
    EXPECT_NE(std::string(e.what()).find("'w'"), std::string::npos);
  }
  EXPECT_THROW(load_csv(dir.write("e.csv", ""), "y"), DataError);
  EXPECT_THROW(load_csv(dir.write("h.csv", "x,y\n"), "y"), DataError);
  EXPECT_THROW(load_csv(dir.write("m.csv", "x,y\n,1\n2,0\n"), "y"), ParseError);
  EXPECT_THROW(load_csv(dir.write("r.csv", "x,y\n1,1,3\n"), "y"), SchemaError);
  EXPECT_THROW(load_csv(dir.write("c.csv", "x,y\n1,1\n2,1\n"), "y"), DataError);
  EXPECT_THROW(load_csv(dir.file("missing.csv"), "y"), DataError);
}

TEST(LoadCsv, LosslessFeatureRoundTrip) {
  TempDir dir;
  auto ds = synthesize(50, 4, 3, 0.5, 1);
  ds.features(0, 0) = 0.1;
  ds.features(1, 1) = 1e-300;
  ds.features(2, 2) = -123456789.123456789;
  write_csv(ds, dir.file("s.csv"));
  const auto back = load_csv(dir.file("s.csv"), "y");
  EXPECT_EQ(back.features, ds.features);
  EXPECT_EQ(back.labels, ds.labels);
  write_csv(back, dir.file("s2.csv"));
  std::ifstream a(dir.file("s.csv")), b(dir.file("s2.csv"));
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}),
            std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST(LoadCsv, MonotoneRanking) {
  TempDir dir;
  std::string csv = "x,y\n";
  std::vector<double> targets{2.5, -1, 7, 7, 0, 3.25, 2.5, 100};
  for (double t : targets) csv += "1," + std::to_string(t) + "\n";
  const auto ds = load_csv(dir.write("t.csv", csv), "y");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (std::size_t j = 0; j < targets.size(); ++j) {
      if (targets[i] < targets[j]) EXPECT_LT(ds.labels[i], ds.labels[j]);
    }
  }
}

void expect_partition(const FoldPlan& plan, std::size_t n) {
  std::vector<int> seen(n, 0);
  std::size_t lo = n, hi = 0;
  for (const auto& f : plan.folds) {
    EXPECT_FALSE(f.empty());
    lo = std::min(lo, f.size());
    hi = std::max(hi, f.size());
    for (auto i : f) ++seen.at(i);
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_LE(hi - lo, 1u);
}

TEST(KFold, EqualFolds) {
  std::vector<std::int64_t> labels(100);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::int64_t>(i % 4);
  const auto plan = kfold_split(labels, 10, 3);
  ASSERT_EQ(plan.size(), 10u);
  for (const auto& f : plan.folds) EXPECT_EQ(f.size(), 10u);
  expect_partition(plan, 100);
}

TEST(KFold, Stratified) {
  std::vector<std::int64_t> labels{0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  const auto plan = kfold_split(labels, 2, 9);
  EXPECT_TRUE(plan.stratified);
  for (const auto& f : plan.folds) {
    int ones = 0;
    for (auto i : f) ones += static_cast<int>(labels[i]);
    EXPECT_EQ(f.size(), 6u);
    EXPECT_EQ(ones, 3);
  }
}

TEST(KFold, RareClassFallsBackToShuffle) {
  std::vector<std::int64_t> labels(30, 0);
  labels[4] = 1;
  const auto plan = kfold_split(labels, 5, 1);
  EXPECT_FALSE(plan.stratified);
  expect_partition(plan, 30);
}

TEST(KFold, DeterministicAndValidated) {
  std::vector<std::int64_t> labels(37);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::int64_t>(i % 3);
  const auto a = kfold_split(labels, 4, 77);
  EXPECT_EQ(a.folds, kfold_split(labels, 4, 77).folds);
  EXPECT_NE(a.folds, kfold_split(labels, 4, 78).folds);
  expect_partition(a, 37);
  EXPECT_THROW(kfold_split(std::vector<std::int64_t>{0, 1}, 3, 0), DataError);
  EXPECT_THROW(kfold_split(labels, 1, 0), ConfigError);
  const auto j = fold_plan_to_json(a);
  EXPECT_EQ(j.at("folds").size(), 4u);
}

TEST(Synthesize, EqualFrequencyBins) {
  const auto ds = synthesize(1003, 5, 8, 0.0, 4);
  std::vector<int> counts(8, 0);
  for (auto y : ds.labels) ++counts.at(static_cast<std::size_t>(y));
  for (int c : counts) EXPECT_LE(std::abs(c - 1003.0 / 8.0), 1.0);
  EXPECT_EQ(ds.k_states, 8);
  EXPECT_EQ(ds.features.cols(), 5);
}

TEST(Synthesize, NoiseFreeLabelsAreMonotoneInALinearScore) {
  const auto ds = synthesize(500, 3, 5, 0.0, 5);
  const auto again = synthesize(500, 3, 5, 0.0, 5);
  EXPECT_EQ(ds.features, again.features);
  EXPECT_EQ(ds.labels, again.labels);
  // The weight vector is the first draw of the seeded stream; its scale does
  // not affect the ordering.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd w(3);
  for (auto& v : w) v = normal(rng);
  const Eigen::VectorXd s = ds.features * w;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.size(); ++j) {
      if (s[static_cast<Eigen::Index>(i)] < s[static_cast<Eigen::Index>(j)]) {
        ASSERT_LE(ds.labels[i], ds.labels[j]);
      }
    }
  }
}

TEST(Synthesize, SeedChangesData) {
  EXPECT_NE(synthesize(20, 2, 3, 0.1, 1).features, synthesize(20, 2, 3, 0.1, 2).features);
}

}  // namespace
}  // namespace bsord

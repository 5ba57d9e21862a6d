#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bsord/bsord.hpp"
#include "commands.hpp"

namespace bsord {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bsord_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(const std::vector<std::string>& args) {
    out_.str("");
    err_.str("");
    return cli::run(args, out_, err_);
  }

  std::string fixture(std::size_t n, long d, long k, std::uint64_t seed = 1) {
    const auto p = path("fixture.csv");
    EXPECT_EQ(run({"synth", "--samples", std::to_string(n), "--features", std::to_string(d), "--states",
                   std::to_string(k), "--seed", std::to_string(seed), "--out", p}),
              0);
    return p;
  }

  std::string config(const std::string& json) {
    const auto p = path("config.json");
    std::ofstream(p) << json;
    return p;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  static std::vector<std::vector<std::string>> rows(const std::string& p) {
    std::vector<std::vector<std::string>> out;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) out.push_back(detail::split_row(line));
    return out;
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliTest, TrainThenPredictOnNoiseFreeFixture) {
  const auto data = fixture(2000, 5, 8, 2024);
  ASSERT_EQ(run({"train", "--data", data, "--target", "y", "--seed", "42", "--out", path("m.json")}), 0)
      << err_.str();
  ASSERT_EQ(run({"predict", "--model", path("m.json"), "--data", data, "--target", "y", "--out",
                 path("p.csv")}),
            0)
      << err_.str();
  const auto table = rows(path("p.csv"));
  ASSERT_EQ(table.size(), 2001u);
  EXPECT_EQ(table[0][0], "y");
  EXPECT_EQ(table[0][1], "predicted_rank");
  EXPECT_EQ(table[0][2], "predicted_label");
  EXPECT_EQ(table[0].back(), "p_7");
  std::size_t hits = 0;
  for (std::size_t i = 1; i < table.size(); ++i) {
    if (table[i][0] == table[i][2]) ++hits;
    double total = 0.0;
    for (std::size_t j = 3; j < table[i].size(); ++j) total += std::stod(table[i][j]);
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
  EXPECT_GE(static_cast<double>(hits) / 2000.0, 0.95);
}

TEST_F(CliTest, SavedModelGivesIdenticalPredictions) {
  const auto data = fixture(200, 3, 4);
  const auto cfg = config(R"({"epochs": 10})");
  ASSERT_EQ(run({"train", "--data", data, "--target", "y", "--config", cfg, "--out", path("m.json")}), 0);
  const auto ds = load_csv(data, "y");
  const auto fitted = fit(ds, load_config(cfg)).model;
  const auto loaded = load_model(path("m.json"));
  for (Eigen::Index i = 0; i < ds.features.rows(); ++i) {
    const Vector raw = ds.features.row(i).transpose();
    const auto x = fitted.standardize({raw.data(), static_cast<std::size_t>(raw.size())});
    EXPECT_EQ(predict_distribution(fitted, x), predict_distribution(loaded, x));
  }
}

TEST_F(CliTest, PredictFeatureCountMismatch) {
  const auto data = fixture(100, 3, 3);
  const auto cfg = config(R"({"epochs": 2})");
  ASSERT_EQ(run({"train", "--data", data, "--target", "y", "--config", cfg, "--out", path("m.json")}), 0);
  const auto other = path("other.csv");
  ASSERT_EQ(run({"synth", "--samples", "20", "--features", "5", "--states", "3", "--out", other}), 0);
  EXPECT_EQ(run({"predict", "--model", path("m.json"), "--data", other, "--target", "y"}), 2);
  EXPECT_NE(err_.str().find("expects 3"), std::string::npos) << err_.str();
  EXPECT_NE(err_.str().find("found 5"), std::string::npos) << err_.str();
}

TEST_F(CliTest, EvaluateDeterministicAndMissingTarget) {
  const auto data = fixture(150, 3, 4);
  const auto cfg = config(R"({"epochs": 5, "batch_size": 16})");
  std::vector<std::string> args{"evaluate", "--data", data, "--target", "y", "--config", cfg,
                                "--folds", "3", "--resamples", "100", "--seed", "7"};
  auto with_out = [&](const std::string& o) {
    auto a = args;
    a.insert(a.end(), {"--out", o});
    return a;
  };
  ASSERT_EQ(run(with_out(path("a.json"))), 0) << err_.str();
  EXPECT_NE(out_.str().find("95% CI"), std::string::npos);
  ASSERT_EQ(run(with_out(path("b.json"))), 0);
  auto threaded = with_out(path("c.json"));
  threaded.insert(threaded.end(), {"--jobs", "3"});
  ASSERT_EQ(run(threaded), 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  EXPECT_EQ(slurp(path("a.json")), slurp(path("c.json")));
  const auto report = nlohmann::json::parse(slurp(path("a.json")));
  EXPECT_EQ(report.at("k_folds"), 3);
  EXPECT_EQ(report.at("seed"), 7);

  EXPECT_EQ(run({"evaluate", "--data", data, "--target", "quality"}), 2);
  const std::string diagnostic = err_.str();
  EXPECT_NE(diagnostic.find("'quality'"), std::string::npos);
  EXPECT_EQ(std::count(diagnostic.begin(), diagnostic.end(), '\n'), 1);
  EXPECT_EQ(diagnostic.rfind("bsord evaluate: load:", 0), 0u) << diagnostic;
}

TEST_F(CliTest, ExitCodes) {
  const auto data = fixture(60, 2, 3);
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_EQ(run({"evaluate", "--folds", "x"}), 2);
  EXPECT_EQ(run({"evaluate", "--data", path("nope.csv"), "--target", "y"}), 1);
  EXPECT_EQ(run({"evaluate", "--data", data, "--target", "y", "--config", config(R"({"lr": 1})")}), 2);
  EXPECT_EQ(run({"evaluate", "--data", data, "--target", "y", "--order", "0,1"}), 2);
  EXPECT_EQ(run({"train", "--data", data, "--target", "y"}), 2);
  const auto diverge = config(R"({"optimizer": "gradient-descent", "learning_rate": 1e300, "epochs": 3})");
  EXPECT_EQ(run({"train", "--data", data, "--target", "y", "--config", diverge, "--out", path("m.json")}), 1);
  EXPECT_NE(err_.str().find("training"), std::string::npos);
}

TEST_F(CliTest, ExplicitOrder) {
  const auto p = path("levels.csv");
  std::ofstream(p) << "x,level\n1,low\n2,mid\n3,high\n1.5,low\n2.5,mid\n3.5,high\n";
  const auto cfg = config(R"({"epochs": 2})");
  EXPECT_EQ(run({"train", "--data", p, "--target", "level", "--order", "low, mid, high", "--config", cfg,
                 "--out", path("m.json")}),
            0)
      << err_.str();
  EXPECT_EQ(load_model(path("m.json")).label_dictionary, (std::vector<std::string>{"low", "mid", "high"}));
}

TEST_F(CliTest, ProjectOutputs) {
  const auto data = fixture(120, 4, 4);
  const auto cfg = config(R"({"epochs": 5})");
  const std::vector<std::string> base{"project", "--data", data, "--target", "y", "--config", cfg, "--seed", "3"};
  auto with = [&](std::vector<std::string> extra) {
    auto a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  ASSERT_EQ(run(with({"--out", path("a")})), 0) << err_.str();
  ASSERT_EQ(run(with({"--out", path("b")})), 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  const auto table = rows(path("a.csv"));
  EXPECT_EQ(table.size(), 121u);
  EXPECT_EQ(table[0], (std::vector<std::string>{"e0", "e1", "rank"}));
  const auto svg = slurp(path("a.svg"));
  std::size_t circles = 0;
  for (auto pos = svg.find("<circle"); pos != std::string::npos; pos = svg.find("<circle", pos + 1)) ++circles;
  EXPECT_EQ(circles, 120u);

  EXPECT_EQ(run(with({"--hidden", "3", "--format", "svg", "--out", path("c")})), 2);
  EXPECT_NE(err_.str().find("--format csv"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("c.svg")));
  EXPECT_EQ(run(with({"--hidden", "3", "--out", path("d")})), 0);
  EXPECT_TRUE(fs::exists(path("d.csv")));
  EXPECT_FALSE(fs::exists(path("d.svg")));
  EXPECT_EQ(rows(path("d.csv"))[0].size(), 4u);
  EXPECT_EQ(run(with({"--format", "png", "--out", path("e")})), 2);
}

TEST_F(CliTest, ProjectFromModelWithoutTarget) {
  const auto data = fixture(80, 3, 3);
  const auto cfg = config(R"({"epochs": 3, "h_hidden": 2})");
  ASSERT_EQ(run({"train", "--data", data, "--target", "y", "--config", cfg, "--out", path("m.json")}), 0);
  const auto features = path("features.csv");
  {
    std::ofstream f(features);
    for (const auto& row : rows(data)) f << row[0] << ',' << row[1] << ',' << row[2] << '\n';
  }
  ASSERT_EQ(run({"project", "--model", path("m.json"), "--data", features, "--out", path("p")}), 0)
      << err_.str();
  EXPECT_EQ(rows(path("p.csv"))[0].back(), "predicted_rank");
}

TEST_F(CliTest, Gradcheck) {
  EXPECT_EQ(run({"gradcheck", "--trials", "6", "--seed", "5"}), 0);
  EXPECT_NE(out_.str().find("PASS"), std::string::npos);
  EXPECT_EQ(run({"gradcheck", "--trials", "3", "--tolerance", "1e-30"}), 1);
  EXPECT_NE(out_.str().find("FAIL"), std::string::npos);
}

}  // namespace
}  // namespace bsord

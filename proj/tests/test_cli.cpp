#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mmfs/cli.hpp"
#include "test_util.hpp"

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
    std::vector<std::string> out;
    std::ifstream f(p);
    for (std::string l; std::getline(f, l);) out.push_back(l);
    return out;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               (std::string("mmfs_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(std::vector<std::string> args) {
        args.insert(args.begin(), "mmfs");
        std::vector<const char*> argv;
        for (auto& a : args) argv.push_back(a.c_str());
        err_.str("");
        return mmfs::cli::run(static_cast<int>(argv.size()), argv.data(), err_);
    }

    std::string out(const std::string& sub) const { return (dir_ / sub).string(); }
    std::string fixture() const { return testutil::data_path("fixture_30x12.csv"); }

    fs::path dir_;
    std::ostringstream err_;
};

TEST_F(Cli, SelectWritesDeterministicFiles) {
    ASSERT_EQ(run({"select", "--input", fixture(), "--label-col", "label", "--s", "4", "--out", out("a")}), 0)
        << err_.str();
    ASSERT_EQ(run({"select", "--input", fixture(), "--label-col", "label", "--s", "4", "--out", out("b")}), 0);
    for (const char* f : {"selection_maxP.json", "selection_maxP.csv"}) {
        ASSERT_TRUE(fs::exists(dir_ / "a" / f)) << f;
        EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
    }
    const auto j = nlohmann::json::parse(slurp(dir_ / "a" / "selection_maxP.json"));
    EXPECT_EQ(j["variant"], "maxP");
    EXPECT_EQ(j["s"], 4);
    EXPECT_EQ(j["selected"], (std::vector<int>{1, 0, 2, 6}));
    EXPECT_EQ(j["scores"].size(), 12u);
    EXPECT_EQ(j["feature_names"][0], "g0");
    const auto csv = lines(dir_ / "a" / "selection_maxP.csv");
    ASSERT_EQ(csv.size(), 5u);
    EXPECT_EQ(csv[0], "rank,feature_name");
    EXPECT_EQ(csv[1], "1,g1");
}

TEST_F(Cli, InterRunsBothVariants) {
    ASSERT_EQ(run({"select", "--input", fixture(), "--label-col", "label", "--variant", "inter", "--s", "6", "--trace",
                   "--out", out("i")}),
              0)
        << err_.str();
    const auto j = nlohmann::json::parse(slurp(dir_ / "i" / "selection_inter.json"));
    EXPECT_EQ(j["selected"].size(), 6u);
    EXPECT_TRUE(fs::exists(dir_ / "i" / "trace_minP.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "i" / "trace_maxP.csv"));
    EXPECT_EQ(lines(dir_ / "i" / "trace_maxP.csv").front(), "iteration,objective,delta_w");
}

TEST_F(Cli, InvalidArgumentsExitTwo) {
    EXPECT_EQ(run({"select", "--input", fixture(), "--s", "3", "--k", "0", "--out", out("x")}), 2);
    EXPECT_NE(err_.str().find("k"), std::string::npos);
    EXPECT_EQ(run({"select", "--input", fixture(), "--label-col", "label", "--out", out("x")}), 2);
    EXPECT_NE(err_.str().find("--s"), std::string::npos);
    EXPECT_EQ(run({"select", "--input", fixture(), "--label-col", "label", "--s", "3", "--k", "40"}), 2);
    EXPECT_EQ(run({"select", "--input", fixture(), "--variant", "bogus", "--s", "3"}), 2);
    EXPECT_EQ(run({"sweep", "--input", fixture(), "--out", out("x")}), 2);
    EXPECT_NE(err_.str().find("labels"), std::string::npos);
    EXPECT_EQ(run({}), 2);
}

TEST_F(Cli, OtherFailuresExitOne) {
    EXPECT_EQ(run({"select", "--input", out("missing.csv"), "--s", "3"}), 1);
    EXPECT_NE(err_.str().find("cannot open"), std::string::npos);
}

TEST_F(Cli, EnvironmentFallbackAndFlagPrecedence) {
    ::setenv("MMFS_K", "0", 1);
    EXPECT_EQ(run({"select", "--input", fixture(), "--label-col", "label", "--s", "3", "--out", out("e")}), 2);
    EXPECT_EQ(run({"select", "--input", fixture(), "--label-col", "label", "--s", "3", "--k", "5", "--out", out("e")}), 0)
        << err_.str();
    ::unsetenv("MMFS_K");
    ::setenv("MMFS_S", "2", 1);
    EXPECT_EQ(run({"select", "--input", fixture(), "--label-col", "label", "--out", out("s")}), 0) << err_.str();
    ::unsetenv("MMFS_S");
    EXPECT_EQ(nlohmann::json::parse(slurp(dir_ / "s" / "selection_maxP.json"))["s"], 2);
}

TEST_F(Cli, DumpMatrices) {
    ASSERT_EQ(run({"select", "--input", fixture(), "--label-col", "label", "--s", "3", "--dump-matrices", "--out",
                   out("d")}),
              0);
    for (const char* f : {"P.csv", "V_min.csv", "V_max.csv"}) {
        const auto l = lines(dir_ / "d" / f);
        ASSERT_FALSE(l.empty()) << f;
        EXPECT_EQ(l.front(), "row,col,value");
    }
    EXPECT_EQ(lines(dir_ / "d" / "P.csv").size(), 1u + 30u * 5u); // k nonzeros per row
}

TEST_F(Cli, SweepCountsOverride) {
    ASSERT_EQ(run({"sweep", "--input", fixture(), "--label-col", "label", "--counts", "3,6", "--repeats", "3", "--out",
                   out("w")}),
              0)
        << err_.str();
    const auto l = lines(dir_ / "w" / "sweep_maxP.csv");
    ASSERT_EQ(l.size(), 4u); // comment, header, two rows
    EXPECT_EQ(l[0].front(), '#');
    EXPECT_EQ(l[1], "feature_count,acc_mean,acc_std,nmi_mean,nmi_std");
    EXPECT_EQ(l[2].substr(0, 2), "3,");
}

TEST_F(Cli, SweepWithoutFittingDefaultGrid) {
    // d = 12 is below every default count
    EXPECT_EQ(run({"sweep", "--input", fixture(), "--label-col", "label", "--repeats", "1", "--out", out("w")}), 2);
    EXPECT_NE(err_.str().find("--counts"), std::string::npos);
}

TEST_F(Cli, GridDefaultsProduceFullProduct) {
    ASSERT_EQ(run({"grid", "--input", fixture(), "--label-col", "label", "--s", "4", "--repeats", "1", "--out",
                   out("g")}),
              0)
        << err_.str();
    const auto l = lines(dir_ / "g" / "grid_maxP.csv");
    ASSERT_EQ(l.size(), 1u + 7u * 16u);
    EXPECT_EQ(l[0], "lambda,n,acc_mean,nmi_mean");
    EXPECT_EQ(l[1].substr(0, 8), "0.001,5,");
    EXPECT_EQ(l.back().substr(0, 8), "1000,20,");
}

TEST_F(Cli, GridCustomAxesAndJobs) {
    ASSERT_EQ(run({"grid", "--input", fixture(), "--label-col", "label", "--variant", "inter", "--s", "4",
                   "--lambda-grid", "0.1,10", "--n-grid", "2,3,4", "--repeats", "2", "--out", out("g1")}),
              0)
        << err_.str();
    ASSERT_EQ(run({"grid", "--input", fixture(), "--label-col", "label", "--variant", "inter", "--s", "4",
                   "--lambda-grid", "0.1,10", "--n-grid", "2,3,4", "--repeats", "2", "--jobs", "3", "--out",
                   out("g3")}),
              0);
    EXPECT_EQ(lines(dir_ / "g1" / "grid_inter.csv").size(), 7u);
    EXPECT_EQ(slurp(dir_ / "g1" / "grid_inter.csv"), slurp(dir_ / "g3" / "grid_inter.csv"));
}

TEST_F(Cli, ProjectIdentityEqualsTranspose) {
    ASSERT_EQ(run({"project", "--input", fixture(), "--label-col", "label", "--identity-w", "--out", out("p")}), 0)
        << err_.str();
    const auto ds = mmfs::load_csv(fixture(), std::string("label"));
    const auto l = lines(dir_ / "p" / "projection_maxP.csv");
    ASSERT_EQ(l.size(), 31u);
    EXPECT_EQ(l[0].substr(0, 20), "instance,label,p0,p1");
    std::stringstream row(l[1]);
    std::string cell;
    std::getline(row, cell, ',');
    EXPECT_EQ(cell, "0");
    std::getline(row, cell, ',');
    EXPECT_EQ(cell, "0");
    for (int j = 0; j < 12; ++j) {
        std::getline(row, cell, ',');
        EXPECT_EQ(std::stod(cell), ds.data.values()(j, 0));
    }
}

TEST_F(Cli, ProjectVariantsDiffer) {
    ASSERT_EQ(run({"project", "--input", fixture(), "--label-col", "label", "--variant", "minP", "--out", out("p")}), 0);
    ASSERT_EQ(run({"project", "--input", fixture(), "--label-col", "label", "--variant", "maxP", "--out", out("p")}), 0);
    const auto a = slurp(dir_ / "p" / "projection_minP.csv"), b = slurp(dir_ / "p" / "projection_maxP.csv");
    EXPECT_NE(a, b);
    EXPECT_EQ(lines(dir_ / "p" / "projection_minP.csv").size(), 31u);
    EXPECT_EQ(run({"project", "--input", fixture(), "--variant", "inter", "--out", out("p")}), 2);
}

TEST(RunConfigDefaults, FollowEvaluationProtocol) {
    const mmfs::cli::RunConfig cfg;
    EXPECT_EQ(cfg.params.k, 5);
    EXPECT_EQ(cfg.repeats, 20);
    EXPECT_EQ(cfg.lambda_grid, (std::vector<double>{0.001, 0.01, 0.1, 1, 10, 100, 1000}));
    EXPECT_EQ(cfg.n_grid.size(), 16u);
    EXPECT_EQ(cfg.n_grid.front(), 5);
    EXPECT_EQ(cfg.n_grid.back(), 20);
    EXPECT_FALSE(cfg.s.has_value());
}

} // namespace

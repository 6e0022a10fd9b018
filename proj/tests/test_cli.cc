// Drives the command-line binary end to end and checks exit codes and outputs.

#include "pelical/io.h"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace pelical;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("pelical_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string &name) const { return (dir_ / name).string(); }

    int run(const std::string &args, const std::string &env = "") const {
        const std::string cmd = env + " " + PELICAL_CLI_PATH + " " + args + " >" + path("stdout.txt") + " 2>" +
                                path("stderr.txt");
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string read(const std::string &name) const { return read_text_file(path(name)); }

    void write(const std::string &name, const std::string &text) const { write_text_file(path(name), text); }

    fs::path dir_;
};

} // namespace

TEST_F(Cli, SimulateCalibrateConverges) {
    ASSERT_EQ(run("simulate --lines 20 --pixel-noise 0.3 --seed 5 --output " + path("obs.json") + " --truth " +
                  path("truth.json")),
              0)
        << read("stderr.txt");
    ASSERT_EQ(run("calibrate --input " + path("obs.json") + " --output " + path("calib.json")), 0)
        << read("stderr.txt");
    const CalibrationFile calib = parse_calibration_file(read("calib.json"));
    EXPECT_EQ(calib.termination, Termination::Converged);
    const Extrinsics truth = parse_truth_extrinsics(read("truth.json"));
    EXPECT_LT((calib.extrinsics.t - truth.t).norm(), 0.02);
}

TEST_F(Cli, SeedPrecedence) {
    ASSERT_EQ(run("simulate --seed 1 --output " + path("a.json")), 0);
    ASSERT_EQ(run("simulate --seed 2 --output " + path("b.json"), "PELICAL_SEED=1"), 0);
    EXPECT_EQ(read("a.json"), read("b.json"));
    write("spec.json", R"({"rng_seed": 1})");
    ASSERT_EQ(run("simulate --seed 3 --spec " + path("spec.json") + " --output " + path("c.json")), 0);
    EXPECT_EQ(read("a.json"), read("c.json"));
}

TEST_F(Cli, AllOutlierStreamExitsTwo) {
    ASSERT_EQ(run("simulate --outliers 1.0 --lines 20 --seed 4 --output " + path("obs.json")), 0);
    EXPECT_EQ(run("calibrate --input " + path("obs.json") + " --output " + path("calib.json")), 2);
    const CalibrationFile calib = parse_calibration_file(read("calib.json"));
    EXPECT_NE(calib.termination, Termination::Converged);
}

TEST_F(Cli, MalformedInputExitsOne) {
    ASSERT_EQ(run("simulate --seed 6 --output " + path("obs.json")), 0);
    const std::string text = read("obs.json");
    write("cut.json", text.substr(0, text.size() / 2));
    EXPECT_EQ(run("calibrate --input " + path("cut.json")), 1);
    EXPECT_NE(read("stderr.txt").find("malformed JSON"), std::string::npos);
    EXPECT_EQ(run("calibrate --input " + path("missing.json")), 1);
    EXPECT_EQ(run("calibrate"), 1);
    EXPECT_EQ(run("no-such-command"), 1);
}

TEST_F(Cli, InfeasibleSpecExitsTwo) {
    write("spec.json", R"({"baseline_m": 10.0, "pnl_fraction": 0.0})");
    EXPECT_EQ(run("simulate --spec " + path("spec.json")), 2);
}

TEST_F(Cli, SweepIsDeterministic) {
    const std::string args = "sweep --rotations 0,20 --baselines 0.2 --seeds-per-cell 2 --pixel-noise 0.5 --steps ";
    ASSERT_EQ(run(args + path("s1.csv") + " --output " + path("a.csv")), 0) << read("stderr.txt");
    ASSERT_EQ(run(args + path("s2.csv") + " --output " + path("b.csv")), 0);
    EXPECT_EQ(read("a.csv"), read("b.csv"));
    EXPECT_EQ(read("s1.csv"), read("s2.csv"));
    std::istringstream lines(read("a.csv"));
    std::string header;
    std::getline(lines, header);
    EXPECT_EQ(header, "rotation_deg,baseline_m,seed,rot_err_deg,trans_err_mm,converged");
}

TEST_F(Cli, EvaluateToolsProduceJson) {
    std::ostringstream planes;
    planes << R"({"target_points": [)";
    for (int i = 0; i < 25; ++i) {
        planes << (i ? "," : "") << "[" << 0.1 * (i % 5) << "," << 0.1 * (i / 5) << ",1.5]";
    }
    planes << R"(], "source_points": [)";
    for (int i = 0; i < 25; ++i) {
        planes << (i ? "," : "") << "[" << 0.1 * (i % 5) << "," << 0.1 * (i / 5) << ",1.5]";
    }
    planes << "]}";
    write("planes.json", planes.str());
    write("truth.json", R"({"rotation": [[1, 0, 0], [0, 1, 0], [0, 0, 1]], "translation_m": [0, 0, 0]})");
    ASSERT_EQ(run("evaluate-planes --input " + path("planes.json") + " --truth " + path("truth.json") + " --output " +
                  path("m.json")),
              0)
        << read("stderr.txt");
    EXPECT_NE(read("m.json").find("\"theta_deg\": 0"), std::string::npos) << read("m.json");

    write("poses.json", R"({"translation_groups": [[
        {"rotation": [[1, 0, 0], [0, 1, 0], [0, 0, 1]], "translation_m": [0.20, 0, 0]},
        {"rotation": [[1, 0, 0], [0, 1, 0], [0, 0, 1]], "translation_m": [0.25, 0, 0]}]]})");
    ASSERT_EQ(run("pose-errors --input " + path("poses.json") + " --output " + path("e.json")), 0)
        << read("stderr.txt");
    EXPECT_NE(read("e.json").find("translation_step_errors_cm"), std::string::npos);
}

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "turbkit/io.hpp"
#include "turbkit/simulate.hpp"

using namespace turbkit;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(TURBKIT_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir = tk_test::temp_dir("cli");
        fs::create_directories(dir / "src");
        io::write_png(simulate::textured_scene(64, 64, 1), dir / "src" / "scene.png");
    }
    static fs::path dir;
};
fs::path Cli::dir;

}  // namespace

TEST_F(Cli, ParseAndConfigErrorsExitTwo) {
    EXPECT_EQ(run("--no-such-flag"), 2);
    EXPECT_EQ(run("stabilize --border notanumber"), 2);
    std::ofstream(dir / "bad.toml") << "[stabilize]\nborder = 4\nmystery = 1\n";
    EXPECT_EQ(run("run --config " + (dir / "bad.toml").string() + " --input " + dir.string() + " --output " +
                  (dir / "o").string()),
              2);
    EXPECT_EQ(run("restore-bg --input " + dir.string() + " --output " + (dir / "o").string() + " --sigma fuzzy"), 2);
    EXPECT_EQ(run("evaluate --metrics nonsense --input " + dir.string()), 2);
}

TEST_F(Cli, EndToEndCommands) {
    const auto ds = dir / "ds";
    ASSERT_EQ(run("gen-dataset --source " + (dir / "src").string() + " --output " + ds.string() +
                  " --count 1 --seed 3 --width 48 --height 48 --frames 6"),
              0);
    const auto degraded = ds / "clip_000000" / "degraded";
    const auto clean = ds / "clip_000000" / "clean";
    ASSERT_TRUE(fs::exists(degraded));

    ASSERT_EQ(run("stabilize --input " + degraded.string() + " --output " + (dir / "stab").string() +
                  " --border 6 --offsets " + (dir / "off.csv").string()),
              0);
    EXPECT_EQ(slurp(dir / "off.csv").substr(0, 11), "frame,dx,dy");

    ASSERT_EQ(run("cn2 --input " + degraded.string() + " --output " + (dir / "cn2.json").string()), 0);
    const auto j = nlohmann::json::parse(slurp(dir / "cn2.json"));
    EXPECT_GT(j.at("cn2").get<double>(), 0.0);

    ASSERT_EQ(run("flow --input " + degraded.string() + " --pair 0 1 --output " + (dir / "flow.tkr").string()), 0);
    ASSERT_EQ(run("segment --input " + degraded.string() + " --output " + (dir / "seg").string() +
                  " --threshold 0.5 --candidates 2,4"),
              0);
    ASSERT_EQ(run("restore-bg --input " + degraded.string() + " --output " + (dir / "bg").string() +
                  " --sigma auto --blend pyramid"),
              0);
    ASSERT_EQ(run("simulate --input " + clean.string() + " --output " + (dir / "sim").string() + " --seed 2"), 0);
    std::ofstream(dir / "small.toml") << "[stabilize]\nborder = 6\n[segment]\ncandidates = [2, 4]\n";
    ASSERT_EQ(run("run --config " + (dir / "small.toml").string() + " --input " + degraded.string() + " --output " +
                  (dir / "run").string()),
              0);
    EXPECT_TRUE(fs::exists(dir / "run" / "report.json"));
    ASSERT_EQ(run("evaluate --metrics psnr,ssim --input " + (dir / "run").string() + " --reference " +
                  clean.string() + " --csv " + (dir / "ev.csv").string() + " --json " + (dir / "ev.json").string()),
              0);
    EXPECT_EQ(slurp(dir / "ev.csv").substr(0, 15), "frame,psnr,ssim");
    EXPECT_NO_THROW(nlohmann::json::parse(slurp(dir / "ev.json")));

    const Frame grid = simulate::grid_target(96, 96, 24, 2);
    io::save_sequence(VideoSequence({grid, grid, grid}), dir / "grid");
    ASSERT_EQ(run("evaluate --metrics linedev --window 2 --input " + (dir / "grid").string() + " --json " +
                  (dir / "ld.json").string()),
              0);
    EXPECT_NO_THROW(nlohmann::json::parse(slurp(dir / "ld.json")));
}

TEST_F(Cli, StageFailureExitsThree) {
    const auto seq = dir / "tiny";
    io::save_sequence(VideoSequence({Frame(16, 16, 1, 0.5f), Frame(16, 16, 1, 0.5f)}), seq);
    // Border too wide for the frames.
    EXPECT_EQ(run("run --input " + seq.string() + " --output " + (dir / "tiny_out").string()), 3);
    // Constant frames have no gradient to normalise by.
    EXPECT_EQ(run("cn2 --input " + seq.string()), 3);
}

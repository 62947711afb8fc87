#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mcmix/mcmix.hpp"

namespace fs = std::filesystem;
using namespace mcmix;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() /
               ("mcmix_cli_" + std::to_string(::getpid()) + "_" + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(const std::string& args) {
        const std::string cmd = std::string(MCMIX_CLI_PATH) + " " + args + " > " + (dir_ / "stdout.txt").string() +
                                " 2> " + (dir_ / "stderr.txt").string();
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    }

    void write(const std::string& name, const std::string& text) const {
        std::ofstream(dir_ / name, std::ios::binary) << text;
    }

    std::size_t count_lines(const fs::path& p) const {
        std::ifstream in(p);
        std::size_t n = 0;
        std::string line;
        while (std::getline(in, line)) n += !line.empty();
        return n;
    }

    fs::path dir_;
};

const char* kEvents =
    "s1,2016-09-01T10:00:00Z,question,1,t7\n"
    "s1,2016-09-01T10:02:00Z,lesson,,t8\n"
    "s2,2016-09-01T11:00:00Z,question,0,t7\n";

} // namespace

TEST_F(CliTest, SessionizeWritesSessionsStatsAndManifest) {
    write("events.csv", kEvents);
    ASSERT_EQ(run("sessionize --input " + path("events.csv") + " --out " + path("out")), 0);
    EXPECT_TRUE(fs::exists(path("out/manifest.json")));
    EXPECT_EQ(slurp(path("out/sessions.csv")),
              "session_id,student_id,states\ns1#0,s1,S Qr L_c E\ns2#0,s2,S Qw E\n");
    const auto stats = nlohmann::json::parse(slurp(path("out/stats.json")));
    EXPECT_EQ(stats["n_sequences"], 2);
    EXPECT_EQ(stats["n_actions"], 3);
}

TEST_F(CliTest, SessionizeMissingInputFailsWithoutOutput) {
    EXPECT_EQ(run("sessionize --input " + path("nope.csv") + " --out " + path("out")), 2);
    EXPECT_FALSE(fs::exists(path("out")));
}

TEST_F(CliTest, SessionizeGapFlag) {
    write("events.csv", kEvents);
    ASSERT_EQ(run("sessionize --gap-minutes 1 --input " + path("events.csv") + " --out " + path("out")), 0);
    EXPECT_EQ(count_lines(path("out/sessions.csv")), 1u + 3u);
}

TEST_F(CliTest, SessionizeMalformedMajorityIsDataError) {
    write("events.csv", "x\ny\ns1,2016-09-01T10:00:00Z,question,1,t7\n");
    EXPECT_EQ(run("sessionize --input " + path("events.csv") + " --out " + path("out")), 3);
}

TEST_F(CliTest, ClusterSingleKIsByteDeterministic) {
    ASSERT_EQ(run("synth --k-true 3 --n 300 --alphas 0 --reps 1 --out " + path("syn")), 0);
    const auto sessions = path("syn/sessions.csv");
    ASSERT_EQ(run("cluster --sessions " + sessions + " --k 2 --seed 7 --out " + path("a")), 0);
    ASSERT_EQ(run("cluster --sessions " + sessions + " --k 2 --seed 7 --out " + path("b")), 0);
    for (const auto* f : {"model.json", "assignments.csv", "sweep.csv"})
        EXPECT_EQ(slurp(path(std::string("a/") + f)), slurp(path(std::string("b/") + f))) << f;
    EXPECT_EQ(count_lines(path("a/assignments.csv")), 301u);
}

TEST_F(CliTest, ClusterKRangeSweepRows) {
    ASSERT_EQ(run("synth --k-true 2 --n 200 --alphas 0 --reps 1 --out " + path("syn")), 0);
    ASSERT_EQ(run("cluster --sessions " + path("syn/sessions.csv") + " --k-range 2:10 --restarts 1 --out " +
                  path("sweep")),
              0);
    EXPECT_EQ(count_lines(path("sweep/sweep.csv")), 1u + 9u);
}

TEST_F(CliTest, ClusterUsageErrors) {
    write("s.csv", "session_id,student_id,states\na,a,S Qr E\n");
    EXPECT_EQ(run("cluster --sessions " + path("s.csv") + " --k 0 --out " + path("o")), 1);
    EXPECT_EQ(run("cluster --sessions " + path("s.csv") + " --out " + path("o")), 1);
    EXPECT_EQ(run("cluster --sessions " + path("s.csv") + " --k 2 --k-range 1:3 --out " + path("o")), 1);
    EXPECT_EQ(run("cluster --bogus"), 1);
    EXPECT_FALSE(fs::exists(path("o")));
}

TEST_F(CliTest, ClusterZeroSmoothingReportsUnsupported) {
    // The fitted single chain only ever sees Qr after S. A held-out session
    // uses S->L, which is then impossible under every chain.
    write("train.csv", "session_id,student_id,states\na,a,S Qr E\nb,b,S Qr Qr E\n");
    ASSERT_EQ(run("cluster --sessions " + path("train.csv") + " --k 1 --smoothing 0 --out " + path("m")), 0);
    write("test.csv", "session_id,student_id,states\na,a,S Qr E\nc,c,S L E\n");
    ASSERT_EQ(run("eval --model " + path("m/model.json") + " --sessions " + path("test.csv") + " --out " +
                  path("e")),
              0);
    const auto report = nlohmann::json::parse(slurp(path("e/report.json")));
    EXPECT_EQ(report["unsupported_count"], 1);
    EXPECT_NE(slurp(path("e/assignments.csv")).find("c,0,-inf"), std::string::npos);
}

TEST_F(CliTest, SynthTableShape) {
    ASSERT_EQ(run("synth --k-true 3 --n 200 --alphas 0,1 --reps 2 --seed 9 --out " + path("a")), 0);
    EXPECT_EQ(count_lines(path("a/noise_sweep.csv")), 1u + 4u);
    EXPECT_EQ(count_lines(path("a/noise_summary.csv")), 1u + 2u);
    ASSERT_EQ(run("synth --k-true 3 --n 200 --alphas 0,1 --reps 2 --seed 9 --out " + path("b")), 0);
    EXPECT_EQ(slurp(path("a/noise_sweep.csv")), slurp(path("b/noise_sweep.csv")));
    EXPECT_EQ(slurp(path("a/sessions.csv")), slurp(path("b/sessions.csv")));
}

TEST_F(CliTest, SynthAlphaOutOfRangeIsUsageError) {
    EXPECT_EQ(run("synth --alphas 0,1.5 --out " + path("a")), 1);
    EXPECT_FALSE(fs::exists(path("a")));
}

TEST_F(CliTest, EvalReports) {
    ASSERT_EQ(run("synth --k-true 3 --n 400 --alphas 0 --reps 1 --out " + path("syn")), 0);
    ASSERT_EQ(run("cluster --sessions " + path("syn/sessions.csv") + " --k 6 --restarts 2 --out " + path("m")), 0);
    ASSERT_EQ(run("eval --model " + path("m/model.json") + " --sessions " + path("syn/sessions.csv") +
                  " --truth " + path("syn/labels.csv") + " --profiles --out " + path("e")),
              0);
    EXPECT_EQ(count_lines(path("e/chain_stats.csv")), 1u + 6u);
    EXPECT_EQ(count_lines(path("e/profiles.csv")), 1u + 400u);
    const auto report = nlohmann::json::parse(slurp(path("e/report.json")));
    EXPECT_GT(report["purity"]["average_purity"].get<double>(), 0.0);
    EXPECT_LE(report["purity"]["average_purity"].get<double>(), 1.0);

    std::ifstream prof(path("e/profiles.csv"));
    std::string line;
    std::getline(prof, line);
    while (std::getline(prof, line)) {
        std::istringstream ls(line);
        std::string cell;
        double sum = 0.0;
        for (int col = 0; std::getline(ls, cell, ','); ++col)
            if (col >= 3) sum += std::stod(cell);
        EXPECT_NEAR(sum, 1.0, 1e-9);
    }
}

TEST_F(CliTest, EvalPermutationBaseline) {
    ASSERT_EQ(run("synth --k-true 3 --n 300 --alphas 0 --reps 1 --out " + path("syn")), 0);
    ASSERT_EQ(run("eval --model " + path("syn/generators.json") + " --sessions " + path("syn/sessions.csv") +
                  " --permutation-baseline --k-range 2:3 --restarts 2 --out " + path("e")),
              0);
    EXPECT_EQ(count_lines(path("e/permutation.csv")), 1u + 2u);
}

TEST_F(CliTest, EvalStateLabelMismatch) {
    ASSERT_EQ(run("synth --k-true 2 --n 50 --alphas 0 --reps 1 --out " + path("syn")), 0);
    auto model = nlohmann::ordered_json::parse(slurp(path("syn/generators.json")));
    model["states"][3] = "Right";
    write("bad.json", model.dump());
    EXPECT_EQ(run("eval --model " + path("bad.json") + " --sessions " + path("syn/sessions.csv") + " --out " +
                  path("e")),
              3);
    write("bad_sessions.csv", "session_id,student_id,states\na,a,S Right E\n");
    EXPECT_EQ(run("eval --model " + path("syn/generators.json") + " --sessions " + path("bad_sessions.csv") +
                  " --out " + path("e")),
              3);
    EXPECT_FALSE(fs::exists(path("e")));
}

TEST_F(CliTest, ExportDotOneFilePerChain) {
    ASSERT_EQ(run("synth --k-true 3 --n 50 --alphas 0 --reps 1 --out " + path("syn")), 0);
    ASSERT_EQ(run("export-dot --model " + path("syn/generators.json") + " --out " + path("dot")), 0);
    for (int i = 0; i < 3; ++i) {
        const auto text = slurp(path("dot/chain_" + std::to_string(i) + ".dot"));
        EXPECT_EQ(text.rfind("digraph chain_" + std::to_string(i) + " {", 0), 0u);
    }
    EXPECT_FALSE(fs::exists(path("dot/chain_3.dot")));
    EXPECT_EQ(run("export-dot --coverage 0 --model " + path("syn/generators.json") + " --out " + path("d2")), 1);
    EXPECT_EQ(run("export-dot --coverage 1.5 --model " + path("syn/generators.json") + " --out " + path("d2")), 1);
}

#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

class Workspace {
public:
    Workspace() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / ("stsgg_cli_" + std::to_string(::getpid()) + "_" + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        std::ofstream cfg(dir_ / "run.cfg");
        cfg << "# small benchmark\n"
            << "n_scenes = 40\nentities_min = 4\nentities_max = 6\nn_fg_classes = 4\nsibling_parent =\n"
            << "feature_dim = 3\nannotated_fraction = 0.3\nn_epochs = 2\nmax_iterations = 6\nbatch_size = 4\nks = 1,3\n"
            << "data_dir = " << (dir_ / "data").string() << "\ncheckpoint_dir = " << (dir_ / "ckpt").string()
            << "\nlog_dir = " << (dir_ / "logs").string() << '\n';
    }
    ~Workspace() { fs::remove_all(dir_); }

    struct Result {
        int code;
        std::string out;
        std::string err;
    };

    Result run(const std::string& args) const {
        const auto out = dir_ / "stdout.txt";
        const auto err = dir_ / "stderr.txt";
        const std::string cmd = std::string(STSGG_CLI_PATH) + " --config " + (dir_ / "run.cfg").string() + " " + args + " > " +
                                out.string() + " 2> " + err.string();
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        std::stringstream ss;
        ss << is.rdbuf();
        return ss.str();
    }

    /// File content without the `#` echo header.
    static std::string body(const fs::path& p) {
        std::istringstream is(slurp(p));
        std::string line, out;
        while (std::getline(is, line))
            if (line.empty() || line[0] != '#') out += line + '\n';
        return out;
    }

    fs::path path(const std::string& rel) const { return dir_ / rel; }

private:
    fs::path dir_;
};

} // namespace

TEST(Cli, GenIsDeterministic) {
    Workspace w;
    ASSERT_EQ(w.run("gen").code, 0);
    const auto first = Workspace::slurp(w.path("data/train.jsonl")) + Workspace::slurp(w.path("data/catalog.json")) +
                       Workspace::slurp(w.path("data/test.jsonl"));
    ASSERT_FALSE(first.empty());
    ASSERT_EQ(w.run("gen").code, 0);
    EXPECT_EQ(first, Workspace::slurp(w.path("data/train.jsonl")) + Workspace::slurp(w.path("data/catalog.json")) +
                         Workspace::slurp(w.path("data/test.jsonl")));
    EXPECT_TRUE(fs::exists(w.path("data/manifest.json")));
    EXPECT_TRUE(fs::exists(w.path("data/val.jsonl")));
}

TEST(Cli, InvalidFractionNamesTheField) {
    Workspace w;
    const auto r = w.run("gen --annotated-fraction 1.5");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("annotated_fraction"), std::string::npos) << r.err;
}

TEST(Cli, UnknownOptionFails) {
    Workspace w;
    EXPECT_EQ(w.run("gen --no-such-option 3").code, 1);
}

TEST(Cli, MissingCheckpointNamesThePath) {
    Workspace w;
    ASSERT_EQ(w.run("gen").code, 0);
    const auto r = w.run("selftrain");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find(w.path("ckpt/pretrain.params").string()), std::string::npos) << r.err;
}

TEST(Cli, PipelineRunsEndToEnd) {
    Workspace w;
    ASSERT_EQ(w.run("gen").code, 0);
    ASSERT_EQ(w.run("pretrain").code, 0);
    ASSERT_EQ(w.run("selftrain --use-gsl true").code, 0);
    const auto e = w.run("eval --eval-split test");
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_NE(e.out.find("F@3"), std::string::npos) << e.out;
    ASSERT_EQ(w.run("audit").code, 0);
    for (const char* f : {"ckpt/selftrain.params", "ckpt/selftrain.gsl", "ckpt/selftrain.state.json", "logs/selftrain_iterations.csv",
                          "logs/selftrain_thresholds.csv", "logs/selftrain_assignments.csv", "logs/selftrain_epochs.csv",
                          "logs/selftrain_audit.csv", "logs/selftrain_eval_test.csv", "logs/selftrain_eval_test_per_class.csv",
                          "logs/pretrain_iterations.csv"})
        EXPECT_TRUE(fs::exists(w.path(f))) << f;
    const auto log = Workspace::slurp(w.path("logs/selftrain_iterations.csv"));
    EXPECT_NE(log.find("# command = selftrain"), std::string::npos);
    EXPECT_NE(log.find("# max_iterations = 6"), std::string::npos);
}

TEST(Cli, ZeroIterationSelfTrainEvaluatesLikePretrain) {
    Workspace w;
    ASSERT_EQ(w.run("gen").code, 0);
    ASSERT_EQ(w.run("pretrain").code, 0);
    ASSERT_EQ(w.run("selftrain --max-iterations 0 --run-name zero").code, 0);
    ASSERT_EQ(w.run("eval --checkpoint " + w.path("ckpt/pretrain.params").string()).code, 0);
    ASSERT_EQ(w.run("eval --run-name zero").code, 0);
    EXPECT_EQ(Workspace::slurp(w.path("ckpt/pretrain.params")), Workspace::slurp(w.path("ckpt/zero.params")));
    EXPECT_EQ(Workspace::body(w.path("logs/pretrain_eval_test.csv")), Workspace::body(w.path("logs/zero_eval_test.csv")));
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
    Workspace w;
    ASSERT_EQ(w.run("gen").code, 0);
    ASSERT_EQ(w.run("pretrain").code, 0);
    ASSERT_EQ(w.run("selftrain --run-name a").code, 0);
    ASSERT_EQ(w.run("selftrain --run-name b").code, 0);
    EXPECT_EQ(Workspace::slurp(w.path("ckpt/a.params")), Workspace::slurp(w.path("ckpt/b.params")));
    EXPECT_EQ(Workspace::body(w.path("logs/a_iterations.csv")), Workspace::body(w.path("logs/b_iterations.csv")));
    EXPECT_EQ(Workspace::body(w.path("logs/a_assignments.csv")), Workspace::body(w.path("logs/b_assignments.csv")));
}

TEST(Cli, SweepCoversTheGrid) {
    Workspace w;
    ASSERT_EQ(w.run("gen").code, 0);
    ASSERT_EQ(w.run("pretrain").code, 0);
    const auto r = w.run("sweep --max-iterations 2");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto body = Workspace::body(w.path("logs/sweep.csv"));
    EXPECT_EQ(std::count(body.begin(), body.end(), '\n'), 37);
}

TEST(Cli, SingleCellSweepMatchesSelfTrain) {
    Workspace w;
    ASSERT_EQ(w.run("gen").code, 0);
    ASSERT_EQ(w.run("pretrain").code, 0);
    ASSERT_EQ(w.run("sweep --sweep-alpha-inc 0.3 --sweep-alpha-dec 0.7 --sweep-split test").code, 0);
    ASSERT_EQ(w.run("selftrain --alpha-inc 0.3 --alpha-dec 0.7 --run-name one --eval-each-epoch false").code, 0);
    ASSERT_EQ(w.run("eval --run-name one --eval-split test").code, 0);

    std::istringstream sweep(Workspace::body(w.path("logs/sweep.csv")));
    std::string header, row;
    std::getline(sweep, header);
    std::getline(sweep, row);
    std::istringstream eval(Workspace::body(w.path("logs/one_eval_test.csv")));
    std::getline(eval, header);
    std::string expect = "0.29999999999999999,0.69999999999999996";
    std::string line;
    while (std::getline(eval, line)) {
        std::istringstream ls(line);
        std::string k, rr, mr, f;
        std::getline(ls, k, ',');
        std::getline(ls, rr, ',');
        std::getline(ls, mr, ',');
        std::getline(ls, f, ',');
        expect += "," + rr + "," + mr + "," + f;
    }
    EXPECT_EQ(row, expect);
}

TEST(Cli, ResumeContinuesFromState) {
    Workspace w;
    ASSERT_EQ(w.run("gen").code, 0);
    ASSERT_EQ(w.run("pretrain").code, 0);
    ASSERT_EQ(w.run("selftrain --run-name full").code, 0);
    ASSERT_EQ(w.run("selftrain --run-name part --max-iterations 3").code, 0);
    ASSERT_EQ(w.run("selftrain --run-name part --resume true").code, 0);
    EXPECT_EQ(Workspace::slurp(w.path("ckpt/full.params")), Workspace::slurp(w.path("ckpt/part.params")));
    EXPECT_EQ(Workspace::body(w.path("logs/full_iterations.csv")), Workspace::body(w.path("logs/part_iterations.csv")));
}

TEST(Cli, EveryOutputCarriesTheConfigEcho) {
    Workspace w;
    ASSERT_EQ(w.run("gen").code, 0);
    ASSERT_EQ(w.run("pretrain").code, 0);
    const auto head = Workspace::slurp(w.path("logs/pretrain_iterations.csv"));
    EXPECT_EQ(head.rfind("# ", 0), 0u);
    EXPECT_NE(head.find("# n_scenes = 40"), std::string::npos);
    const auto manifest = Workspace::slurp(w.path("data/manifest.json"));
    EXPECT_NE(manifest.find("\"n_scenes\""), std::string::npos);
}

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "segsl/fixtures.hpp"
#include "segsl/io.hpp"
#include "segsl/tree_io.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = SEGSL_FIXTURES;

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("segsl_cli_" + std::to_string(getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path path(const std::string& name) const { return dir_ / name; }

    Outcome run(const std::string& args) const {
        const auto err_path = dir_ / "stderr.txt";
        const std::string cmd = std::string(SEGSL_CLI) + " " + args + " 2> '" + err_path.string() + "'";
        Outcome r;
        FILE* pipe = popen(cmd.c_str(), "r");
        if (!pipe)
            return r;
        char buf[4096];
        std::size_t got;
        while ((got = fread(buf, 1, sizeof buf, pipe)) > 0)
            r.out.append(buf, got);
        const int status = pclose(pipe);
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.err = slurp(err_path);
        return r;
    }

    std::string fixture(const std::string& name) const { return "'" + (kFixtures / name).string() + "'"; }

    // A small attributed graph written with the sbm subcommand.
    void make_sbm() const {
        ASSERT_EQ(run("sbm --n 40 --p-in 0.3 --p-out 0.03 --seed 3 --out " + path("g.tsv").string() + " --features " +
                      path("x.tsv").string())
                      .code,
                  0);
    }

private:
    fs::path dir_;
};

// trace.csv without the three trailing timing columns.
std::string trace_without_timing(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
        for (int i = 0; i < 3; ++i)
            line = line.substr(0, line.rfind(','));
        out += line + "\n";
    }
    return out;
}

}  // namespace

TEST_F(CliTest, EntropyOfK2) {
    const auto r = run("entropy --graph " + fixture("k2.tsv"));
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "H1\t1.000000000\n");
}

TEST_F(CliTest, TreeOnBarbellWritesTsvAndJson) {
    const auto out = path("t.tsv");
    const auto r = run("tree --graph " + fixture("barbell6.tsv") + " --height 2 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("HT\t1.699513850\n"), std::string::npos);
    EXPECT_NE(r.out.find("H1\t2.556656707\n"), std::string::npos);

    const auto tree = segsl::load_tree(out, segsl::fixtures::barbell6());
    std::vector<std::vector<int>> groups;
    for (auto child : tree.node(tree.root()).children) {
        std::vector<int> vs;
        for (auto v : tree.vertex_set(child))
            vs.push_back(v);
        std::sort(vs.begin(), vs.end());
        groups.push_back(vs);
    }
    std::sort(groups.begin(), groups.end());
    EXPECT_EQ(groups, (std::vector<std::vector<int>>{{0, 1, 2}, {3, 4, 5}}));

    const auto json = nlohmann::json::parse(slurp(path("t.json")));
    EXPECT_NEAR(json["h_tree"].get<double>(), 1.6995138503199656, 1e-9);
    EXPECT_EQ(json["root"]["children"].size(), 2u);

    const auto again = run("entropy --graph " + fixture("barbell6.tsv") + " --tree " + out.string());
    EXPECT_EQ(again.code, 0);
    EXPECT_NE(again.out.find("HT\t1.699513850\n"), std::string::npos);
}

TEST_F(CliTest, ResolvedOptionsGoToStderr) {
    const auto r = run("reconstruct --graph " + fixture("barbell6.tsv") + " --tree " + fixture("missing.tsv") +
                       " --seed 3 --out x");
    EXPECT_EQ(r.code, 1);
    const auto s = run("sbm --n 10 --p-in 0.5 --p-out 0.1 --seed 42 --out " + path("g.tsv").string());
    EXPECT_EQ(s.code, 0);
    EXPECT_NE(s.err.find("seed=42"), std::string::npos);
    EXPECT_NE(s.out.find("edges\t"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("entropy --graph " + fixture("k2.tsv") + " --bogus").code, 1);
    EXPECT_EQ(run("perturb --graph " + fixture("k2.tsv") + " --rate 0.5 --out " + path("p.tsv").string()).code, 1);
    EXPECT_EQ(run("tree --graph " + fixture("k2.tsv") + " --height 1 --out " + path("t.tsv").string()).code, 1);
    std::ofstream(path("bad.tsv")) << "0\tx\n";
    EXPECT_EQ(run("entropy --graph " + path("bad.tsv").string()).code, 2);
    std::ofstream(path("empty.tsv")) << "# nothing\n";
    EXPECT_NE(run("entropy --graph " + path("empty.tsv").string()).code, 0);
}

TEST_F(CliTest, PipelineNeedsSeed) {
    make_sbm();
    const auto r = run("pipeline --graph " + path("g.tsv").string() + " --attributes " + path("x.tsv").string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("seed"), std::string::npos);
}

TEST_F(CliTest, PipelineIsReproducible) {
    make_sbm();
    std::ofstream(path("run.conf")) << "# two short iterations\niterations = 2\nheight = 2\nseed = 1\n";
    auto go = [&](const std::string& out, const std::string& extra) {
        return run("pipeline --config " + path("run.conf").string() + " --graph " + path("g.tsv").string() +
                   " --attributes " + path("x.tsv").string() + " --output " + path(out).string() + extra);
    };
    const auto a = go("a", " --seed 5");
    const auto b = go("b", " --seed 5");
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_NE(a.err.find("seed = 5\n"), std::string::npos);
    EXPECT_EQ(slurp(path("a") / "graph_iter_2.tsv"), slurp(path("b") / "graph_iter_2.tsv"));
    EXPECT_EQ(slurp(path("a") / "tree_iter_2.tsv"), slurp(path("b") / "tree_iter_2.tsv"));
    EXPECT_EQ(trace_without_timing(slurp(path("a") / "trace.csv")), trace_without_timing(slurp(path("b") / "trace.csv")));

    // the file seed applies when the command line leaves it alone
    const auto c = go("c", "");
    ASSERT_EQ(c.code, 0) << c.err;
    EXPECT_NE(c.err.find("seed = 1\n"), std::string::npos);

    const auto g = segsl::load_edge_list(path("a") / "graph_iter_2.tsv");
    EXPECT_EQ(g.num_vertices(), 40u);
}

TEST_F(CliTest, PipelineRejectsUnknownConfigKey) {
    make_sbm();
    std::ofstream(path("bad.conf")) << "seed = 1\nthetta = 2\n";
    const auto r = run("pipeline --config " + path("bad.conf").string() + " --graph " + path("g.tsv").string() +
                       " --attributes " + path("x.tsv").string());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("thetta"), std::string::npos);
}

TEST_F(CliTest, FuseAndReconstruct) {
    make_sbm();
    const auto f = run("fuse --graph " + path("g.tsv").string() + " --attrs " + path("x.tsv").string() + " --out " +
                       path("fused.tsv").string() + " --trace " + path("k.tsv").string());
    ASSERT_EQ(f.code, 0) << f.err;
    EXPECT_NE(f.out.find("k\t"), std::string::npos);
    EXPECT_GT(segsl::load_edge_list(path("fused.tsv")).num_edges(), 0u);
    EXPECT_NE(slurp(path("k.tsv")).find("\t"), std::string::npos);

    ASSERT_EQ(run("tree --graph " + path("fused.tsv").string() + " --height 2 --out " + path("t.tsv").string()).code, 0);
    auto rec = [&](const std::string& out) {
        return run("reconstruct --graph " + path("fused.tsv").string() + " --tree " + path("t.tsv").string() +
                   " --seed 9 --out " + path(out).string() + " --sampled " + path(out + ".pairs").string());
    };
    ASSERT_EQ(rec("r1.tsv").code, 0);
    ASSERT_EQ(rec("r2.tsv").code, 0);
    EXPECT_EQ(slurp(path("r1.tsv")), slurp(path("r2.tsv")));
    EXPECT_EQ(slurp(path("r1.tsv.pairs")), slurp(path("r2.tsv.pairs")));

    const auto retain_without_attrs = run("reconstruct --graph " + path("fused.tsv").string() + " --tree " +
                                          path("t.tsv").string() + " --seed 9 --retain --out " + path("r3.tsv").string());
    EXPECT_EQ(retain_without_attrs.code, 1);
}

TEST_F(CliTest, PerturbAddsEdges) {
    const auto r = run("perturb --graph " + fixture("barbell6.tsv") + " --rate 1 --seed 2 --out " + path("p.tsv").string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(segsl::load_edge_list(path("p.tsv")).num_edges(), 14u);
}

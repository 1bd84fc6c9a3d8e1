#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "segsl/fixtures.hpp"
#include "segsl/io.hpp"
#include "segsl/synthetic.hpp"
#include "segsl/tree_builder.hpp"

using namespace segsl;

namespace {

std::set<std::set<VertexId>> top_level(const EncodingTree& t) {
    std::set<std::set<VertexId>> out;
    for (NodeId c : t.node(t.root()).children) {
        const auto vs = t.vertex_set(c);
        out.insert({vs.begin(), vs.end()});
    }
    return out;
}

const TreeStrategy kStrategies[] = {TreeStrategy::merge_levels, TreeStrategy::combine_then_lift};

}  // namespace

TEST(Fixtures, FilesMatchInCodeGraphs) {
    const std::string dir = SEGSL_FIXTURES;
    EXPECT_EQ(load_edge_list(dir + "/k2.tsv"), fixtures::k2());
    EXPECT_EQ(load_edge_list(dir + "/tri.tsv"), fixtures::triangle());
    EXPECT_EQ(load_edge_list(dir + "/p3.tsv"), fixtures::path3());
    EXPECT_EQ(load_edge_list(dir + "/barbell6.tsv"), fixtures::barbell6());
}

TEST(Build, BarbellTwoLevels) {
    for (auto strategy : kStrategies) {
        const auto r = build_optimal_tree(fixtures::barbell6(), {.height = 2, .strategy = strategy});
        EXPECT_NEAR(r.report.h_tree, 1.6995138503199656, 1e-9);
        EXPECT_EQ(top_level(r.tree), (std::set<std::set<VertexId>>{{0, 1, 2}, {3, 4, 5}}));
        EXPECT_LE(r.tree.height(), 2);
    }
}

TEST(Build, BarbellThreeLevels) {
    // minimum over every tree of height <= 3, found by exhaustive enumeration
    const auto r = build_optimal_tree(fixtures::barbell6(), {.height = 3});
    EXPECT_NEAR(r.report.h_tree, 1.4688410154463645, 1e-9);
    EXPECT_LE(r.tree.height(), 3);
}

TEST(Build, K2HasNoStructure) {
    for (int k : {2, 3, 4}) {
        const auto r = build_optimal_tree(fixtures::k2(), {.height = k});
        EXPECT_NEAR(r.report.h_tree, 1.0, 1e-12);
    }
}

TEST(Build, HeightBelowTwoIsConfigError) {
    EXPECT_THROW(build_optimal_tree(fixtures::k2(), {.height = 1}), ConfigError);
}

TEST(Build, Deterministic) {
    const auto g = generate_sbm(200, 4, 0.15, 0.01, 5).graph;
    for (auto strategy : kStrategies) {
        std::ostringstream a, b;
        const auto x = build_optimal_tree(g, {.height = 3, .strategy = strategy});
        const auto y = build_optimal_tree(g, {.height = 3, .strategy = strategy});
        EXPECT_EQ(x.report.h_tree, y.report.h_tree);
        EXPECT_EQ(x.tree.preorder(), y.tree.preorder());
    }
}

TEST(BuildProperty, HeightBoundAndEntropyBelowH1) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 5 + rng() % 40;
        const Graph g(n, oracle::random_connected(n, 0.15, trial % 2 == 0, rng));
        for (auto strategy : kStrategies)
            for (int k : {2, 3, 4}) {
                const auto r = build_optimal_tree(g, {.height = k, .strategy = strategy});
                EXPECT_LE(r.tree.height(), k);
                EXPECT_LE(r.report.h_tree, r.report.h1 + 1e-9);
                r.tree.validate(g);
            }
    }
}

TEST(BuildProperty, TwoLevelWithinExhaustiveBounds) {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 2 + rng() % 7;
        const auto edges = oracle::random_connected(n, 0.4, trial % 3 == 0, rng);
        const Graph g(n, edges);
        const double lower = oracle::exhaustive_two_level_min(n, edges);
        for (auto strategy : kStrategies) {
            const double h = build_optimal_tree(g, {.height = 2, .strategy = strategy}).report.h_tree;
            EXPECT_GE(h, lower - 1e-9);
            EXPECT_LE(h, oracle::h1(n, edges) + 1e-9);
        }
    }
}

TEST(BuildProperty, DeeperTreesAreNoWorseOnSbm) {
    const auto g = generate_sbm(120, 3, 0.2, 0.02, 2).graph;
    const double h2 = build_optimal_tree(g, {.height = 2}).report.h_tree;
    const double h3 = build_optimal_tree(g, {.height = 3}).report.h_tree;
    EXPECT_LE(h3, h2 + 1e-9);
}

TEST(Build, SbmBeatsPlantedPartition) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto sbm = generate_sbm(60, 2, 0.3, 0.02, seed);
        const auto r = build_optimal_tree(sbm.graph, {.height = 2});
        std::vector<int> label(sbm.labels.begin(), sbm.labels.end());
        const std::vector<Edge> edges(sbm.graph.edges().begin(), sbm.graph.edges().end());
        EXPECT_LE(r.report.h_tree, oracle::two_level_entropy(60, edges, label) + 1e-9) << "seed " << seed;
        // every top-level group stays inside one planted block
        for (NodeId c : r.tree.node(r.tree.root()).children) {
            const auto vs = r.tree.vertex_set(c);
            for (VertexId v : vs)
                EXPECT_EQ(sbm.labels[static_cast<std::size_t>(v)], sbm.labels[static_cast<std::size_t>(vs[0])]);
        }
    }
}

TEST(Build, DisconnectedGraphNeverMixesComponents) {
    const Graph g(7, {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}, {3, 4, 1.0}, {4, 5, 1.0}, {5, 6, 1.0}, {3, 6, 1.0}});
    std::int32_t count = 0;
    const auto comp = connected_components(g, &count);
    for (auto strategy : kStrategies)
        for (int k : {2, 3}) {
            const auto r = build_optimal_tree(g, {.height = k, .strategy = strategy});
            for (NodeId x : r.tree.node_ids()) {
                if (x == r.tree.root())
                    continue;
                const auto vs = r.tree.vertex_set(x);
                for (VertexId v : vs)
                    EXPECT_EQ(comp[static_cast<std::size_t>(v)], comp[static_cast<std::size_t>(vs[0])]);
            }
        }
}

TEST(Build, IsolatedVertexTolerated) {
    const Graph g(4, {{0, 1, 1.0}, {1, 2, 1.0}});
    const auto r = build_optimal_tree(g, {.height = 2});
    EXPECT_EQ(r.tree.num_vertices(), 4u);
    EXPECT_NEAR(r.report.h1, 1.5, 1e-12);  // the isolated vertex contributes nothing
    EXPECT_LE(r.report.h_tree, r.report.h1 + 1e-9);
}

TEST(Build, LiteralForceBinaryStillBounded) {
    const auto r = build_optimal_tree(fixtures::barbell6(),
                                      {.height = 2, .strategy = TreeStrategy::combine_then_lift, .force_binary = true});
    EXPECT_LE(r.tree.height(), 2);
    EXPECT_NEAR(r.report.h_tree, 1.6995138503199656, 1e-9);
}

#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "segsl/fixtures.hpp"
#include "segsl/reconstruction.hpp"
#include "segsl/synthetic.hpp"
#include "segsl/tree_builder.hpp"

using namespace segsl;

namespace {

EncodingTree barbell_two_level(const Graph& g) {
    const std::vector<NodeId> parent{7, 7, 7, 8, 8, 8, -1, 6, 6};
    const std::vector<VertexId> vertex{0, 1, 2, 3, 4, 5, -1, -1, -1};
    return EncodingTree::from_parents(g, parent, vertex);
}

std::string serialized(const SampledEdgeSet& s) {
    std::ostringstream out;
    write_sampled_edges(out, s);
    return out.str();
}

}  // namespace

TEST(Deduction, BarbellValues) {
    const Graph g = fixtures::barbell6();
    const auto t = barbell_two_level(g);
    EXPECT_NEAR(deduction_entropy(g, t, 7), 0.071429, 1e-6);
    EXPECT_NEAR(deduction_entropy(g, t, 0), 0.329623, 1e-6);
    EXPECT_THROW(deduction_entropy(g, t, t.root()), PreconditionError);
    const auto r = tree_entropy(g, t);
    for (NodeId c : t.node(t.root()).children)
        EXPECT_DOUBLE_EQ(deduction_entropy(g, t, c), r.per_node.at(c));
}

TEST(Softmax, Examples) {
    const auto p = softmax({0.6, 0.7, 0.8});
    EXPECT_NEAR(p[0], 0.30061, 1e-5);
    EXPECT_NEAR(p[1], 0.33222, 1e-5);
    EXPECT_NEAR(p[2], 0.36717, 1e-5);
    const auto q = softmax({0.1, 0.2, 0.3});
    for (int i = 0; i < 3; ++i)
        EXPECT_NEAR(p[static_cast<std::size_t>(i)], q[static_cast<std::size_t>(i)], 1e-12);
    EXPECT_EQ(softmax({2.0, 2.0}), (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(softmax({7.0}), std::vector<double>{1.0});
}

TEST(Annotate, NormalizedAndInOpenInterval) {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 6 + rng() % 40;
        const Graph g(n, oracle::random_connected(n, 0.15, true, rng));
        const auto t = build_optimal_tree(g, {.height = 2 + static_cast<int>(rng() % 3)}).tree;
        const auto at = annotate_probabilities(g, t);
        for (NodeId x : t.node_ids()) {
            const auto& kids = t.node(x).children;
            if (kids.empty())
                continue;
            double sum = 0.0;
            for (NodeId c : kids) {
                const double p = at.probability[static_cast<std::size_t>(c)];
                EXPECT_GT(p, 0.0);
                EXPECT_LE(p, 1.0);
                if (kids.size() > 1)
                    EXPECT_LT(p, 1.0);
                sum += p;
                EXPECT_NEAR(at.deduction[static_cast<std::size_t>(c)], deduction_entropy(g, t, c), 1e-12);
            }
            EXPECT_NEAR(sum, 1.0, 1e-9);
        }
    }
}

TEST(Sample, TwoLeafTreeGivesTheOnlyPair) {
    const Graph g = fixtures::k2();
    const auto s = sample_edges(annotate_probabilities(g, EncodingTree::single_level(g)), 3.0, 1);
    ASSERT_EQ(s.pairs.size(), 1u);
    EXPECT_EQ(s.pairs[0].pair, (VertexPair{0, 1}));
    EXPECT_EQ(s.pairs[0].count, 6u);
}

TEST(Sample, BarbellLocalityAndDeterminism) {
    const Graph g = fixtures::barbell6();
    const auto t = barbell_two_level(g);
    const auto at = annotate_probabilities(g, t);
    const std::set<VertexPair> inside{{0, 1}, {0, 2}, {1, 2}};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto s = sample_edges(at, 1.0, seed);
        for (const auto& p : s.pairs) {
            EXPECT_NE(p.pair.u, p.pair.v);
            if (p.origin == 7)
                EXPECT_TRUE(inside.count(p.pair));
            EXPECT_EQ(t.lowest_common_ancestor(t.leaf_of(p.pair.u), t.leaf_of(p.pair.v)), p.origin);
        }
        EXPECT_EQ(serialized(sample_edges(at, 3.0, seed)), serialized(sample_edges(at, 3.0, seed)));
    }
    EXPECT_NE(serialized(sample_edges(at, 3.0, 1)), serialized(sample_edges(at, 3.0, 2)));
}

TEST(Sample, DrawCountsUseCeiling) {
    const Graph g = fixtures::barbell6();
    const auto at = annotate_probabilities(g, barbell_two_level(g));
    // root has 2 children, each group 3: ceil(0.4*2) + 2*ceil(0.4*3) = 1 + 2*2
    EXPECT_EQ(sample_edges(at, 0.4, 3).draws, 5u);
    EXPECT_THROW(sample_edges(at, 0.0, 3), ConfigError);
    SamplingOptions opt;
    opt.theta_by_depth = {10.0};  // root only
    EXPECT_EQ(sample_edges(at, 0.4, 3, opt).draws, 20u + 4u);
}

TEST(Sample, FrequenciesMatchDrawRedraw) {
    const Graph g = fixtures::triangle();
    auto at = annotate_probabilities(g, EncodingTree::single_level(g));
    const std::vector<double> p{0.2, 0.3, 0.5};
    for (VertexId v = 0; v < 3; ++v)
        at.probability[static_cast<std::size_t>(v)] = p[static_cast<std::size_t>(v)];
    const auto s = sample_edges(at, 100000.0 / 3.0, 5);
    ASSERT_EQ(s.pairs.size(), 3u);
    for (const auto& sp : s.pairs)
        EXPECT_NEAR(static_cast<double>(sp.count) / static_cast<double>(s.draws),
                    oracle::draw_redraw_pair_probability(p, static_cast<std::size_t>(sp.pair.u),
                                                         static_cast<std::size_t>(sp.pair.v)),
                    0.01);
}

TEST(SampledIo, RoundTripAndLoadableAsEdgeList) {
    const Graph g = generate_sbm(40, 2, 0.3, 0.05, 2).graph;
    const auto t = build_optimal_tree(g, {.height = 3}).tree;
    const auto s = sample_edges(annotate_probabilities(g, t), 2.0, 77);
    std::stringstream buf(serialized(s));
    const auto back = read_sampled_edges(buf, "mem");
    EXPECT_EQ(serialized(back), serialized(s));
    EXPECT_EQ(back.draws, s.draws);
    std::istringstream as_graph(serialized(s));
    EXPECT_EQ(read_edge_list(as_graph, "mem").num_edges(), s.pairs.size());
}

TEST(Reconstruct, SampledOnlyAndPureUnion) {
    const Graph g = fixtures::barbell6();
    SampledEdgeSet s;
    s.pairs = {{{0, 3}, 6, 1}, {{1, 4}, 6, 2}, {{2, 5}, 6, 1}};
    const Graph a = reconstruct(g, s, SimilarityMatrix{});
    EXPECT_EQ(a.edge_pairs(), s.edge_pairs());
    for (const auto& e : a.edges())
        EXPECT_EQ(e.w, 1.0);
    SimilarityMatrix sim(6);
    const Graph b = reconstruct(g, s, sim, {.retain = true, .drop_frac = 0.0});
    EXPECT_EQ(b.num_edges(), 10u);
}

TEST(Reconstruct, AutoDropRemovesLowestSimilarity) {
    const Graph g = fixtures::barbell6();
    SampledEdgeSet s;
    s.pairs = {{{0, 3}, 6, 1}, {{1, 4}, 6, 1}, {{2, 5}, 6, 1}};
    SimilarityMatrix sim(6);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i + 1; j < 6; ++j)
            sim.set(i, j, 0.5);
    sim.set(1, 4, -0.9);  // lowest
    sim.set(2, 3, -0.5);  // the bridge
    sim.set(0, 1, 0.1);
    const Graph out = reconstruct(g, s, sim, {.retain = true});
    EXPECT_EQ(out.num_edges(), 7u);
    EXPECT_FALSE(out.has_edge(1, 4));
    EXPECT_FALSE(out.has_edge(2, 3));
    EXPECT_FALSE(out.has_edge(0, 1));
    EXPECT_TRUE(out.has_edge(0, 3));
}

TEST(Reconstruct, TiesDropInPairOrder) {
    const Graph g = fixtures::barbell6();
    SampledEdgeSet s;
    s.pairs = {{{0, 3}, 6, 1}};
    const Graph out = reconstruct(g, s, SimilarityMatrix(6), {.retain = true});
    EXPECT_EQ(out.num_edges(), 7u);
    EXPECT_FALSE(out.has_edge(0, 1));  // all similarities 0: the smallest pair goes first
}

TEST(Reconstruct, Errors) {
    const Graph g = fixtures::barbell6();
    SampledEdgeSet s;
    s.pairs = {{{0, 3}, 6, 1}};
    EXPECT_THROW(reconstruct(g, s, SimilarityMatrix(6), {.retain = false, .drop_frac = 0.5}), ConfigError);
    EXPECT_THROW(reconstruct(g, s, SimilarityMatrix(6), {.retain = true, .drop_frac = 1.5}), ConfigError);
    EXPECT_THROW(reconstruct(g, SampledEdgeSet{}, SimilarityMatrix{}), DegenerateGraphError);
    EXPECT_THROW(reconstruct(g, s, SimilarityMatrix(6), {.retain = true, .drop_frac = 1.0}), DegenerateGraphError);
    SampledEdgeSet bad;
    bad.pairs = {{{0, 9}, 6, 1}};
    EXPECT_THROW(reconstruct(g, bad, SimilarityMatrix{}), ValidationError);
}

TEST(Reconstruct, CarriesAttributes) {
    const Graph g = fixtures::k2().with_attributes(AttributeMatrix(2, 1, {1.0, 2.0}));
    SampledEdgeSet s;
    s.pairs = {{{0, 1}, 2, 1}};
    const Graph out = reconstruct(g, s, SimilarityMatrix{});
    ASSERT_TRUE(out.has_attributes());
    EXPECT_EQ(out.attributes(), g.attributes());
}

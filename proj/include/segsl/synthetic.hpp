#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "graph.hpp"
#include "rng.hpp"

namespace segsl {

struct SbmGraph {
    Graph graph;
    std::vector<std::int32_t> labels;  // planted block per vertex
    bool connected = false;
    bool empty = false;
};

namespace synthetic_detail {

// Visits the indices of a Bernoulli(p) subset of [0, count) in increasing order,
// skipping geometrically between hits.
template <class F>
void bernoulli_indices(std::uint64_t count, double p, Xoshiro256& rng, F&& visit) {
    if (p <= 0.0 || count == 0)
        return;
    if (p >= 1.0) {
        for (std::uint64_t i = 0; i < count; ++i)
            visit(i);
        return;
    }
    const double log_q = std::log1p(-p);
    double pos = -1.0;
    while (true) {
        const double u = 1.0 - rng.uniform();  // (0, 1]
        pos += 1.0 + std::floor(std::log(u) / log_q);
        if (pos >= static_cast<double>(count))
            return;
        visit(static_cast<std::uint64_t>(pos));
    }
}

inline std::uint64_t pair_key(VertexId a, VertexId b) {
    const auto p = VertexPair::of(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.u)) << 32) | static_cast<std::uint32_t>(p.v);
}

}  // namespace synthetic_detail

/// Stochastic block model with equal-size blocks and unit weights. Vertex v belongs to
/// block v / (n / blocks). Deterministic in the seed.
inline SbmGraph generate_sbm(std::size_t n, std::size_t blocks, double p_in, double p_out, std::uint64_t seed) {
    if (blocks == 0 || n == 0 || n % blocks != 0)
        throw ConfigError("sbm: n (" + std::to_string(n) + ") must be a positive multiple of blocks (" + std::to_string(blocks) + ")");
    if (!(0.0 <= p_out && p_out <= p_in && p_in <= 1.0))
        throw ConfigError("sbm: need 0 <= p_out <= p_in <= 1");
    const std::size_t size = n / blocks;
    Xoshiro256 rng(seed);
    std::vector<Edge> edges;
    for (std::size_t a = 0; a < blocks; ++a) {
        const auto base_a = static_cast<VertexId>(a * size);
        // within block a: pairs (i, j), i < j, in row-major order
        {
            std::vector<std::uint64_t> row_start(size + 1, 0);
            for (std::size_t i = 0; i < size; ++i)
                row_start[i + 1] = row_start[i] + (size - 1 - i);
            synthetic_detail::bernoulli_indices(row_start[size], p_in, rng, [&](std::uint64_t idx) {
                const auto i = static_cast<std::size_t>(std::upper_bound(row_start.begin(), row_start.end(), idx) - row_start.begin()) - 1;
                const auto j = i + 1 + static_cast<std::size_t>(idx - row_start[i]);
                edges.push_back({base_a + static_cast<VertexId>(i), base_a + static_cast<VertexId>(j), 1.0});
            });
        }
        for (std::size_t b = a + 1; b < blocks; ++b) {
            const auto base_b = static_cast<VertexId>(b * size);
            synthetic_detail::bernoulli_indices(static_cast<std::uint64_t>(size) * size, p_out, rng, [&](std::uint64_t idx) {
                edges.push_back({base_a + static_cast<VertexId>(idx / size), base_b + static_cast<VertexId>(idx % size), 1.0});
            });
        }
    }
    SbmGraph out;
    out.labels.resize(n);
    for (std::size_t v = 0; v < n; ++v)
        out.labels[v] = static_cast<std::int32_t>(v / size);
    out.empty = edges.empty();
    out.graph = Graph(n, std::move(edges));
    out.connected = is_connected(out.graph);
    return out;
}

/// Adds floor(rate * |E|) uniformly random new vertex pairs of weight 1; existing
/// edges are kept as they are. Deterministic in the seed.
inline Graph perturb(const Graph& g, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0) || !std::isfinite(rate))
        throw ConfigError("perturbation rate must be a finite value >= 0");
    const auto n = g.num_vertices();
    const auto additions = static_cast<std::size_t>(std::floor(rate * static_cast<double>(g.num_edges())));
    const std::uint64_t all_pairs = n < 2 ? 0 : static_cast<std::uint64_t>(n) * (n - 1) / 2;
    const std::uint64_t free_pairs = all_pairs - g.num_edges();
    if (additions > free_pairs)
        throw ValidationError("cannot add " + std::to_string(additions) + " edges: only " + std::to_string(free_pairs) +
                              " vertex pairs are not already edges");
    if (additions == 0)
        return g;

    Xoshiro256 rng(seed);
    std::vector<Edge> edges(g.edges().begin(), g.edges().end());
    if (additions * 2 <= free_pairs) {
        std::unordered_set<std::uint64_t> taken;
        taken.reserve(g.num_edges() + additions);
        for (const auto& e : g.edges())
            taken.insert(synthetic_detail::pair_key(e.u, e.v));
        while (edges.size() < g.num_edges() + additions) {
            const auto a = static_cast<VertexId>(rng.below(n));
            const auto b = static_cast<VertexId>(rng.below(n));
            if (a == b || !taken.insert(synthetic_detail::pair_key(a, b)).second)
                continue;
            edges.push_back({std::min(a, b), std::max(a, b), 1.0});
        }
    } else {
        // Dense request: enumerate the complement and take a partial Fisher-Yates prefix.
        std::vector<VertexPair> candidates;
        candidates.reserve(static_cast<std::size_t>(free_pairs));
        for (std::size_t u = 0; u < n; ++u)
            for (std::size_t v = u + 1; v < n; ++v)
                if (!g.has_edge(static_cast<VertexId>(u), static_cast<VertexId>(v)))
                    candidates.push_back({static_cast<VertexId>(u), static_cast<VertexId>(v)});
        for (std::size_t i = 0; i < additions; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
            std::swap(candidates[i], candidates[j]);
            edges.push_back({candidates[i].u, candidates[i].v, 1.0});
        }
    }
    std::optional<AttributeMatrix> attrs;
    if (g.has_attributes())
        attrs = g.attributes();
    return Graph(n, std::move(edges), std::move(attrs));
}

/// Gaussian attributes whose mean depends on the planted block: block b has mean
/// `separation` on feature dimensions congruent to b modulo the block count and 0
/// elsewhere, with unit noise.
inline AttributeMatrix planted_features(const std::vector<std::int32_t>& labels, std::size_t dims, double separation,
                                        std::uint64_t seed) {
    if (dims == 0)
        throw ConfigError("planted_features: dims must be positive");
    std::int32_t blocks = 0;
    for (auto l : labels)
        blocks = std::max(blocks, l + 1);
    Xoshiro256 rng(seed);
    std::vector<double> data(labels.size() * dims);
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = 0; j < dims; ++j) {
            const bool active = static_cast<std::int32_t>(j % static_cast<std::size_t>(blocks)) == labels[i];
            data[i * dims + j] = (active ? separation : 0.0) + rng.normal();
        }
    return AttributeMatrix(labels.size(), dims, std::move(data));
}

/// Fraction of edges whose endpoints share a label.
inline double intra_block_fraction(const Graph& g, const std::vector<std::int32_t>& labels) {
    if (g.num_edges() == 0)
        return 0.0;
    std::size_t intra = 0;
    for (const auto& e : g.edges())
        if (labels[static_cast<std::size_t>(e.u)] == labels[static_cast<std::size_t>(e.v)])
            ++intra;
    return static_cast<double>(intra) / static_cast<double>(g.num_edges());
}

}  // namespace segsl

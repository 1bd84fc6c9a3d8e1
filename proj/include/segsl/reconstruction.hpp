#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "encoding_tree.hpp"
#include "io.hpp"
#include "rng.hpp"
#include "similarity.hpp"

namespace segsl {

/// Sum of the entropy terms of `a` and its ancestors strictly below the root.
inline double deduction_entropy(const Graph& g, const EncodingTree& t, NodeId a) {
    if (a == t.root())
        throw PreconditionError("deduction entropy is undefined for the root");
    const double vol = g.volume();
    double sum = 0.0;
    for (NodeId x = a; x != t.root(); x = t.node(x).parent) {
        const auto& nd = t.node(x);
        sum += node_entropy_term(nd.cut, nd.volume, t.node(nd.parent).volume, vol);
    }
    return sum;
}

/// Natural-base softmax, shifted by the maximum for stability.
inline std::vector<double> softmax(const std::vector<double>& x) {
    double top = -std::numeric_limits<double>::infinity();
    for (double v : x)
        top = std::max(top, v);
    std::vector<double> out;
    out.reserve(x.size());
    double z = 0.0;
    for (double v : x) {
        out.push_back(std::exp(v - top));
        z += out.back();
    }
    for (double& v : out)
        v /= z;
    return out;
}

struct ProbabilityAnnotatedTree {
    EncodingTree tree;
    std::vector<double> deduction;    // by node id; 0 for the root and unused ids
    std::vector<double> probability;  // softmax over siblings; 1 for the root
};

/// Softmax (natural base) of the deduction entropies among each node's children.
inline ProbabilityAnnotatedTree annotate_probabilities(const Graph& g, const EncodingTree& t) {
    t.validate(g);
    const double vol = g.volume();
    ProbabilityAnnotatedTree out{t, std::vector<double>(t.id_bound(), 0.0), std::vector<double>(t.id_bound(), 0.0)};
    const auto order = t.preorder();
    for (NodeId x : order) {
        if (x == t.root())
            continue;
        const auto& nd = t.node(x);
        const double own = node_entropy_term(nd.cut, nd.volume, t.node(nd.parent).volume, vol);
        out.deduction[static_cast<std::size_t>(x)] =
            own + (nd.parent == t.root() ? 0.0 : out.deduction[static_cast<std::size_t>(nd.parent)]);
    }
    out.probability[static_cast<std::size_t>(t.root())] = 1.0;
    for (NodeId x : order) {
        const auto& children = t.node(x).children;
        if (children.empty())
            continue;
        std::vector<double> scores;
        for (NodeId c : children)
            scores.push_back(out.deduction[static_cast<std::size_t>(c)]);
        const auto p = softmax(scores);
        for (std::size_t i = 0; i < children.size(); ++i)
            out.probability[static_cast<std::size_t>(children[i])] = p[i];
    }
    return out;
}

struct SampledPair {
    VertexPair pair;
    NodeId origin = kNoNode;  // subtree root whose children the two leaves were drawn from
    std::uint32_t count = 0;  // times the pair was drawn
};

struct SampledEdgeSet {
    std::vector<SampledPair> pairs;  // ascending by pair
    std::uint64_t seed = 0;
    std::size_t draws = 0;

    std::vector<VertexPair> edge_pairs() const {
        std::vector<VertexPair> out;
        out.reserve(pairs.size());
        for (const auto& p : pairs)
            out.push_back(p.pair);
        return out;
    }
};

struct SamplingOptions {
    // theta for subtree roots at depth d is theta_by_depth[d] when given, else theta
    std::vector<double> theta_by_depth;
};

namespace reconstruction_detail {

struct ChildTable {
    std::vector<NodeId> children;
    std::vector<double> cumulative;  // running sum of probabilities
};

inline std::size_t draw(const std::vector<double>& cumulative, Xoshiro256& rng) {
    const double u = rng.uniform() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

inline void check_theta(double theta) {
    if (!(theta > 0.0) || !std::isfinite(theta))
        throw ConfigError("theta must be a positive finite number, got " + std::to_string(theta));
}

}  // namespace reconstruction_detail

/// For every node with two or more children, ceil(theta * #children) samples: two
/// distinct children by probability (the second redrawn until it differs), each
/// followed down to a leaf by probability-weighted child draws. Every subtree root
/// uses its own random stream derived from (seed, node id).
inline SampledEdgeSet sample_edges(const ProbabilityAnnotatedTree& at, double theta, std::uint64_t seed,
                                   const SamplingOptions& opt = {}) {
    using namespace reconstruction_detail;
    check_theta(theta);
    for (double t : opt.theta_by_depth)
        check_theta(t);
    const auto& t = at.tree;
    std::vector<ChildTable> table(t.id_bound());
    for (NodeId x : t.node_ids()) {
        auto& tab = table[static_cast<std::size_t>(x)];
        tab.children = t.node(x).children;
        double acc = 0.0;
        for (NodeId c : tab.children) {
            acc += at.probability[static_cast<std::size_t>(c)];
            tab.cumulative.push_back(acc);
        }
    }
    auto descend = [&](NodeId x, Xoshiro256& rng) {
        while (!t.node(x).is_leaf()) {
            const auto& tab = table[static_cast<std::size_t>(x)];
            x = tab.children[draw(tab.cumulative, rng)];
        }
        return t.node(x).vertex;
    };

    std::map<VertexPair, SampledPair> found;
    SampledEdgeSet out;
    out.seed = seed;
    std::vector<std::pair<NodeId, int>> stack{{t.root(), 0}};
    while (!stack.empty()) {
        const auto [x, depth] = stack.back();
        stack.pop_back();
        const auto& tab = table[static_cast<std::size_t>(x)];
        for (NodeId c : tab.children)
            stack.emplace_back(c, depth + 1);
        const std::size_t n = tab.children.size();
        if (n < 2)
            continue;
        const double th = static_cast<std::size_t>(depth) < opt.theta_by_depth.size()
                              ? opt.theta_by_depth[static_cast<std::size_t>(depth)]
                              : theta;
        const auto samples = static_cast<std::size_t>(std::ceil(th * static_cast<double>(n)));
        Xoshiro256 rng(derive_seed(seed, static_cast<std::uint64_t>(x)));
        for (std::size_t s = 0; s < samples; ++s) {
            const std::size_t i = draw(tab.cumulative, rng);
            std::size_t j = draw(tab.cumulative, rng);
            while (j == i)
                j = draw(tab.cumulative, rng);
            const VertexId u = descend(tab.children[i], rng);
            const VertexId v = descend(tab.children[j], rng);
            const auto pair = VertexPair::of(u, v);
            auto& entry = found[pair];
            entry.pair = pair;
            entry.origin = x;
            ++entry.count;
            ++out.draws;
        }
    }
    out.pairs.reserve(found.size());
    for (auto& [pair, entry] : found)
        out.pairs.push_back(entry);
    return out;
}

// Sampled edge TSV: "#seed<TAB>S" header, then "u<TAB>v<TAB>1<TAB>#origin=X,count=C".

inline void write_sampled_edges(std::ostream& out, const SampledEdgeSet& s) {
    out << "#seed\t" << s.seed << '\n';
    for (const auto& p : s.pairs)
        out << p.pair.u << '\t' << p.pair.v << "\t1\t#origin=" << p.origin << ",count=" << p.count << '\n';
}

inline void save_sampled_edges(const std::filesystem::path& path, const SampledEdgeSet& s) {
    auto out = io_detail::open_output(path);
    write_sampled_edges(out, s);
}

inline SampledEdgeSet read_sampled_edges(std::istream& in, const std::string& source = "<stream>") {
    using namespace io_detail;
    SampledEdgeSet s;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto line = strip_cr(raw);
        if (is_blank(line))
            continue;
        const auto fields = split_tabs(line);
        if (fields[0] == "#seed") {
            auto v = fields.size() == 2 ? parse_number<std::uint64_t>(fields[1]) : std::nullopt;
            if (!v)
                throw ParseError(source, lineno, "malformed #seed line");
            s.seed = *v;
            continue;
        }
        if (line.front() == '#')
            continue;
        if (fields.size() != 4)
            throw ParseError(source, lineno, "expected 'u<TAB>v<TAB>w<TAB>#origin=X,count=C'");
        auto u = parse_number<VertexId>(fields[0]);
        auto v = parse_number<VertexId>(fields[1]);
        if (!u || !v || *u < 0 || *v < 0 || *u == *v)
            throw ParseError(source, lineno, "invalid vertex pair");
        const std::string_view prov = fields[3];
        const auto comma = prov.find(",count=");
        if (!prov.starts_with("#origin=") || comma == std::string_view::npos)
            throw ParseError(source, lineno, "missing provenance column");
        auto origin = parse_number<NodeId>(prov.substr(8, comma - 8));
        auto count = parse_number<std::uint32_t>(prov.substr(comma + 7));
        if (!origin || !count)
            throw ParseError(source, lineno, "malformed provenance '" + std::string(prov) + "'");
        s.pairs.push_back({VertexPair::of(*u, *v), *origin, *count});
        s.draws += *count;
    }
    std::sort(s.pairs.begin(), s.pairs.end(), [](const auto& a, const auto& b) { return a.pair < b.pair; });
    for (std::size_t i = 1; i < s.pairs.size(); ++i)
        if (s.pairs[i].pair == s.pairs[i - 1].pair)
            throw ValidationError(source + ": duplicate sampled pair (" + std::to_string(s.pairs[i].pair.u) + "," +
                                  std::to_string(s.pairs[i].pair.v) + ")");
    return s;
}

inline SampledEdgeSet load_sampled_edges(const std::filesystem::path& path) {
    auto in = io_detail::open_input(path);
    return read_sampled_edges(in, path.string());
}

struct ReconstructOptions {
    bool retain = false;              // keep the input edges alongside the sampled ones
    std::optional<double> drop_frac;  // with retain: fraction of lowest-similarity edges dropped;
                                      // unset: drop down to the input edge count
};

/// New graph from the sampled pairs (weight 1), optionally united with the input
/// edges (which keep their weights) and thinned by similarity. Attributes carry over.
inline Graph reconstruct(const Graph& input, const SampledEdgeSet& sampled, const SimilarityMatrix& s,
                         const ReconstructOptions& opt = {}) {
    const std::size_t n = input.num_vertices();
    if (opt.drop_frac && !opt.retain)
        throw ConfigError("drop_frac only applies together with retain");
    if (opt.drop_frac && !(*opt.drop_frac >= 0.0 && *opt.drop_frac <= 1.0))
        throw ConfigError("drop_frac must lie in [0, 1]");
    if (opt.retain && s.size() != n)
        throw ValidationError("similarity matrix size does not match the graph");

    std::map<VertexPair, double> edges;
    for (const auto& p : sampled.pairs) {
        if (p.pair.u == p.pair.v || static_cast<std::size_t>(p.pair.v) >= n)
            throw ValidationError("sampled pair (" + std::to_string(p.pair.u) + "," + std::to_string(p.pair.v) +
                                  ") is not a pair of distinct vertices of the graph");
        edges[p.pair] = 1.0;
    }
    if (opt.retain) {
        for (const auto& e : input.edges())
            edges[VertexPair::of(e.u, e.v)] = e.w;
        std::size_t drop = 0;
        if (opt.drop_frac)
            drop = static_cast<std::size_t>(std::floor(*opt.drop_frac * static_cast<double>(edges.size())));
        else if (edges.size() > input.num_edges())
            drop = edges.size() - input.num_edges();
        if (drop > 0) {
            std::vector<VertexPair> order;
            order.reserve(edges.size());
            for (const auto& [p, w] : edges)
                order.push_back(p);
            std::stable_sort(order.begin(), order.end(), [&](const VertexPair& a, const VertexPair& b) {
                return s(static_cast<std::size_t>(a.u), static_cast<std::size_t>(a.v)) <
                       s(static_cast<std::size_t>(b.u), static_cast<std::size_t>(b.v));
            });
            for (std::size_t i = 0; i < drop; ++i)
                edges.erase(order[i]);
        }
    }
    if (edges.empty())
        throw DegenerateGraphError("reconstruction produced a graph with no edges");
    std::vector<Edge> out;
    out.reserve(edges.size());
    for (const auto& [p, w] : edges)
        out.push_back({p.u, p.v, w});
    std::optional<AttributeMatrix> attrs;
    if (input.has_attributes())
        attrs = input.attributes();
    return Graph(n, std::move(out), std::move(attrs));
}

}  // namespace segsl

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "entropy.hpp"
#include "graph.hpp"

namespace segsl {

/// Dense symmetric n x n similarity matrix with unit diagonal.
class SimilarityMatrix {
public:
    SimilarityMatrix() = default;
    explicit SimilarityMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {
        for (std::size_t i = 0; i < n; ++i)
            data_[i * n + i] = 1.0;
    }

    std::size_t size() const noexcept { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }

    /// Sets S_ij and S_ji together (i != j).
    void set(std::size_t i, std::size_t j, double value) {
        data_[i * n_ + j] = value;
        data_[j * n_ + i] = value;
    }

    /// Sum of S_ij over unordered pairs i < j, accumulated in row-major order.
    double pair_sum() const {
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j)
                s += data_[i * n_ + j];
        return s;
    }

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

struct SimilarityOptions {
    // Dense storage needs 8*n^2 bytes: 50,000 vertices is about 20 GB.
    std::size_t max_vertices = 50'000;
};

/// Pearson correlation between every pair of attribute rows. Rows with zero variance
/// have no defined correlation and get 0 against every other row.
inline SimilarityMatrix pcc_similarity(const AttributeMatrix& x, const SimilarityOptions& opt = {}) {
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    if (n < 2 || d < 1)
        throw ValidationError("similarity needs at least 2 rows and 1 column, got " + std::to_string(n) + "x" +
                              std::to_string(d));
    if (n > opt.max_vertices)
        throw ConfigError("similarity matrix for " + std::to_string(n) + " vertices exceeds the configured limit of " +
                          std::to_string(opt.max_vertices));
    std::vector<double> centered(n * d);
    std::vector<double> norm(n, 0.0);
    std::size_t flat_rows = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = x.row(i);
        for (double v : r)
            if (!std::isfinite(v))
                throw ValidationError("non-finite attribute in row " + std::to_string(i));
        const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(d);
        double ss = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = r[j] - mean;
            centered[i * d + j] = c;
            ss += c * c;
        }
        norm[i] = std::sqrt(ss);
        if (norm[i] == 0.0)
            ++flat_rows;
    }
    if (flat_rows > 0)
        log_warning(std::to_string(flat_rows) + " attribute row(s) have zero variance; their similarities are set to 0");

    SimilarityMatrix s(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (norm[i] == 0.0)
            continue;
        const double* ci = centered.data() + i * d;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (norm[j] == 0.0)
                continue;
            const double* cj = centered.data() + j * d;
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k)
                dot += ci[k] * cj[k];
            s.set(i, j, std::clamp(dot / (norm[i] * norm[j]), -1.0, 1.0));
        }
    }
    return s;
}

/// For each row, the other vertices ordered by decreasing similarity (ties: smaller id).
inline std::vector<std::vector<VertexId>> neighbor_rankings(const SimilarityMatrix& s) {
    const std::size_t n = s.size();
    std::vector<std::vector<VertexId>> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& o = order[i];
        o.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i)
                o.push_back(static_cast<VertexId>(j));
        const auto row = s.row(i);
        std::stable_sort(o.begin(), o.end(), [&](VertexId a, VertexId b) { return row[static_cast<std::size_t>(a)] > row[static_cast<std::size_t>(b)]; });
    }
    return order;
}

namespace similarity_detail {
inline std::vector<VertexPair> knn_from_rankings(const std::vector<std::vector<VertexId>>& order, std::size_t k) {
    std::vector<VertexPair> pairs;
    pairs.reserve(order.size() * k);
    for (std::size_t i = 0; i < order.size(); ++i)
        for (std::size_t r = 0; r < k; ++r)
            pairs.push_back(VertexPair::of(static_cast<VertexId>(i), order[i][r]));
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}
}  // namespace similarity_detail

/// Union of every vertex's k most similar other vertices, as sorted canonical pairs.
inline std::vector<VertexPair> knn_edges(const SimilarityMatrix& s, std::size_t k) {
    if (k < 1 || k + 1 > s.size())
        throw ValidationError("k must lie in [1, n-1]; got k=" + std::to_string(k) + " for n=" + std::to_string(s.size()));
    return similarity_detail::knn_from_rankings(neighbor_rankings(s), k);
}

/// Smallest weight a fused edge may carry.
inline constexpr double kMinFusedWeight = 1e-6;

struct FusedGraph {
    Graph graph;
    double modification = 0.0;  // M
};

namespace similarity_detail {
inline FusedGraph fuse_with_pair_sum(const Graph& g, const std::vector<VertexPair>& overlay, const SimilarityMatrix& s,
                                     double pair_sum) {
    std::vector<VertexPair> pairs = g.edge_pairs();
    pairs.insert(pairs.end(), overlay.begin(), overlay.end());
    for (auto& p : pairs)
        p = VertexPair::of(p.u, p.v);
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    const auto n = static_cast<double>(g.num_vertices());
    const double m = pairs.empty() ? 0.0 : pair_sum / (2.0 * n * static_cast<double>(pairs.size()));
    std::vector<Edge> edges;
    edges.reserve(pairs.size());
    for (const auto& p : pairs) {
        if (p.u == p.v || static_cast<std::size_t>(p.v) >= g.num_vertices())
            throw ValidationError("overlay pair (" + std::to_string(p.u) + "," + std::to_string(p.v) + ") is not a valid vertex pair");
        const double w = s(static_cast<std::size_t>(p.u), static_cast<std::size_t>(p.v)) + m;
        edges.push_back({p.u, p.v, std::max(w, kMinFusedWeight)});
    }
    std::optional<AttributeMatrix> attrs;
    if (g.has_attributes())
        attrs = g.attributes();
    return {Graph(g.num_vertices(), std::move(edges), std::move(attrs)), m};
}
}  // namespace similarity_detail

/// Fused graph E u overlay; every edge gets S_ij + M with
/// M = (1 / 2|V|) * (1 / |E_fused|) * sum_{i<j} S_ij, floored at kMinFusedWeight.
inline FusedGraph fuse_and_reweight(const Graph& g, const std::vector<VertexPair>& overlay, const SimilarityMatrix& s) {
    if (s.size() != g.num_vertices())
        throw ValidationError("similarity matrix is " + std::to_string(s.size()) + "x" + std::to_string(s.size()) +
                              " but the graph has " + std::to_string(g.num_vertices()) + " vertices");
    return similarity_detail::fuse_with_pair_sum(g, overlay, s, s.pair_sum());
}

struct KSelectOptions {
    std::size_t k_max = 0;      // 0: min(n-1, 100)
    double plateau_tol = 1e-3;  // relative gain below which H1 counts as flat
    std::size_t window = 2;     // consecutive flat increments required
};

struct FusionResult {
    Graph fused;
    std::size_t k_selected = 0;
    std::vector<std::pair<std::size_t, double>> h1_trace;  // (k, H1(G_f^(k))) for every probed k
    double modification = 0.0;
    bool plateau_found = false;
};

/// Probes k = 2, 3, ... and returns the first k whose next `window` relative H1
/// gains all stay below `plateau_tol`; without a plateau up to k_max, the k with the
/// largest H1 (smallest such k on ties).
inline FusionResult select_k(const Graph& g, const SimilarityMatrix& s, const KSelectOptions& opt = {}) {
    const std::size_t n = g.num_vertices();
    if (s.size() != n)
        throw ValidationError("similarity matrix size does not match the graph");
    if (n < 3)
        throw ValidationError("k selection needs at least 3 vertices (k starts at 2)");
    const std::size_t k_max = opt.k_max == 0 ? std::min<std::size_t>(n - 1, 100) : opt.k_max;
    if (k_max < 2 || k_max > n - 1)
        throw ConfigError("k_max must lie in [2, n-1]; got " + std::to_string(k_max));
    if (!(opt.plateau_tol > 0.0))
        throw ConfigError("plateau_tol must be positive");
    if (opt.window < 1)
        throw ConfigError("window must be at least 1");

    const auto rankings = neighbor_rankings(s);
    const double pair_sum = s.pair_sum();
    FusionResult result;
    std::size_t flat_run = 0;
    for (std::size_t k = 2; k <= k_max; ++k) {
        auto fused = similarity_detail::fuse_with_pair_sum(g, similarity_detail::knn_from_rankings(rankings, k), s, pair_sum);
        const double h = one_dim_entropy(fused.graph);
        result.h1_trace.emplace_back(k, h);
        if (k > 2) {
            const double prev = result.h1_trace[k - 3].second;
            const double gain = (h - prev) / prev;
            flat_run = gain < opt.plateau_tol ? flat_run + 1 : 0;
            if (flat_run >= opt.window) {
                result.k_selected = k - opt.window;
                result.plateau_found = true;
                break;
            }
        }
    }
    if (!result.plateau_found) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < result.h1_trace.size(); ++i)
            if (result.h1_trace[i].second > result.h1_trace[best].second)
                best = i;
        result.k_selected = result.h1_trace[best].first;
    }
    auto chosen = similarity_detail::fuse_with_pair_sum(
        g, similarity_detail::knn_from_rankings(rankings, result.k_selected), s, pair_sum);
    result.fused = std::move(chosen.graph);
    result.modification = chosen.modification;
    return result;
}

}  // namespace segsl

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace segsl {

using VertexId = std::int32_t;

struct Edge {
    VertexId u;
    VertexId v;
    double w;

    friend bool operator==(const Edge&, const Edge&) = default;
};

struct VertexPair {
    VertexId u;
    VertexId v;

    /// Canonical orientation (smaller id first).
    static VertexPair of(VertexId a, VertexId b) noexcept { return a < b ? VertexPair{a, b} : VertexPair{b, a}; }

    friend bool operator==(const VertexPair&, const VertexPair&) = default;
    friend auto operator<=>(const VertexPair&, const VertexPair&) = default;
};

/// Dense row-major n x d matrix of finite reals; row i belongs to vertex i.
class AttributeMatrix {
public:
    AttributeMatrix() = default;

    AttributeMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw ValidationError("attribute matrix: data size " + std::to_string(data_.size()) +
                                  " does not match " + std::to_string(rows_) + "x" + std::to_string(cols_));
        for (std::size_t i = 0; i < data_.size(); ++i)
            if (!std::isfinite(data_[i]))
                throw ValidationError("attribute matrix: non-finite value in row " + std::to_string(i / cols_));
    }

    static AttributeMatrix zeros(std::size_t rows, std::size_t cols) {
        return AttributeMatrix(rows, cols, std::vector<double>(rows * cols, 0.0));
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }

    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    const std::vector<double>& data() const noexcept { return data_; }

    friend bool operator==(const AttributeMatrix&, const AttributeMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Weighted undirected simple graph on vertices 0..n-1, immutable after construction.
///
/// Edges are stored canonically (u < v) sorted by (u, v), so two graphs with the same
/// edge set compare equal and serialize identically. Adjacency is kept in CSR form
/// with neighbours sorted by id; each adjacency entry carries the index of its edge.
class Graph {
public:
    struct Neighbor {
        VertexId vertex;
        double weight;
        std::uint32_t edge;
    };

    Graph() = default;

    /// Validates the invariants: ids in range, no self-loops, no duplicate pairs
    /// (either orientation), strictly positive finite weights, attribute rows == n.
    Graph(std::size_t n, std::vector<Edge> edges, std::optional<AttributeMatrix> attributes = std::nullopt)
        : n_(n), edges_(std::move(edges)), attributes_(std::move(attributes)) {
        for (auto& e : edges_) {
            if (e.u < 0 || e.v < 0 || static_cast<std::size_t>(e.u) >= n_ || static_cast<std::size_t>(e.v) >= n_)
                throw ValidationError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                                      ") references a vertex outside 0.." + std::to_string(n_ == 0 ? 0 : n_ - 1));
            if (e.u == e.v)
                throw ValidationError("self-loop on vertex " + std::to_string(e.u));
            if (!(e.w > 0.0) || !std::isfinite(e.w))
                throw ValidationError("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                                      ") has non-positive or non-finite weight");
            if (e.u > e.v)
                std::swap(e.u, e.v);
        }
        std::sort(edges_.begin(), edges_.end(),
                  [](const Edge& a, const Edge& b) { return std::pair(a.u, a.v) < std::pair(b.u, b.v); });
        for (std::size_t i = 1; i < edges_.size(); ++i)
            if (edges_[i].u == edges_[i - 1].u && edges_[i].v == edges_[i - 1].v)
                throw ValidationError("duplicate edge (" + std::to_string(edges_[i].u) + "," +
                                      std::to_string(edges_[i].v) + ")");
        if (attributes_ && attributes_->rows() != n_)
            throw ValidationError("attribute matrix has " + std::to_string(attributes_->rows()) +
                                  " rows but the graph has " + std::to_string(n_) + " vertices");
        build_adjacency();
    }

    std::size_t num_vertices() const noexcept { return n_; }
    std::size_t num_edges() const noexcept { return edges_.size(); }
    std::span<const Edge> edges() const noexcept { return edges_; }

    double degree(VertexId v) const { return degree_[static_cast<std::size_t>(v)]; }
    std::span<const double> degrees() const noexcept { return degree_; }

    /// Sum of weighted degrees, 2 * sum of edge weights.
    double volume() const {
        if (edges_.empty())
            throw DegenerateGraphError("graph has no edges; volume and entropy are undefined");
        return volume_;
    }

    std::span<const Neighbor> neighbors(VertexId v) const {
        const auto i = static_cast<std::size_t>(v);
        return {adjacency_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }

    bool has_edge(VertexId a, VertexId b) const { return find_edge(a, b).has_value(); }

    std::optional<std::size_t> find_edge(VertexId a, VertexId b) const {
        auto nb = neighbors(a);
        auto it = std::lower_bound(nb.begin(), nb.end(), b,
                                   [](const Neighbor& x, VertexId id) { return x.vertex < id; });
        if (it != nb.end() && it->vertex == b)
            return it->edge;
        return std::nullopt;
    }

    bool has_attributes() const noexcept { return attributes_.has_value(); }
    const AttributeMatrix& attributes() const {
        if (!attributes_)
            throw ValidationError("graph has no attribute matrix attached");
        return *attributes_;
    }

    Graph with_attributes(AttributeMatrix x) const { return Graph(n_, edges_, std::move(x)); }
    Graph without_attributes() const { return Graph(n_, edges_); }

    std::vector<VertexPair> edge_pairs() const {
        std::vector<VertexPair> out;
        out.reserve(edges_.size());
        for (const auto& e : edges_)
            out.push_back({e.u, e.v});
        return out;
    }

    friend bool operator==(const Graph& a, const Graph& b) {
        return a.n_ == b.n_ && a.edges_ == b.edges_ && a.attributes_ == b.attributes_;
    }

private:
    void build_adjacency() {
        degree_.assign(n_, 0.0);
        std::vector<std::size_t> count(n_, 0);
        for (const auto& e : edges_) {
            ++count[static_cast<std::size_t>(e.u)];
            ++count[static_cast<std::size_t>(e.v)];
        }
        offsets_.assign(n_ + 1, 0);
        for (std::size_t i = 0; i < n_; ++i)
            offsets_[i + 1] = offsets_[i] + count[i];
        adjacency_.resize(offsets_[n_]);
        std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
        volume_ = 0.0;
        // Edges are sorted by (u, v); filling in edge order yields neighbour lists sorted by id.
        for (std::size_t i = 0; i < edges_.size(); ++i) {
            const auto& e = edges_[i];
            adjacency_[cursor[static_cast<std::size_t>(e.u)]++] = {e.v, e.w, static_cast<std::uint32_t>(i)};
            degree_[static_cast<std::size_t>(e.u)] += e.w;
            degree_[static_cast<std::size_t>(e.v)] += e.w;
            volume_ += 2.0 * e.w;
        }
        for (std::size_t i = 0; i < edges_.size(); ++i) {
            const auto& e = edges_[i];
            adjacency_[cursor[static_cast<std::size_t>(e.v)]++] = {e.u, e.w, static_cast<std::uint32_t>(i)};
        }
        for (std::size_t v = 0; v < n_; ++v)
            std::sort(adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]),
                      adjacency_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]),
                      [](const Neighbor& a, const Neighbor& b) { return a.vertex < b.vertex; });
    }

    std::size_t n_ = 0;
    std::vector<Edge> edges_;
    std::optional<AttributeMatrix> attributes_;
    std::vector<double> degree_;
    double volume_ = 0.0;
    std::vector<std::size_t> offsets_{0};
    std::vector<Neighbor> adjacency_;
};

/// Free-function form of Graph::volume().
inline double volume(const Graph& g) { return g.volume(); }

/// Connected-component label per vertex; labels are numbered in order of smallest member.
inline std::vector<std::int32_t> connected_components(const Graph& g, std::int32_t* count = nullptr) {
    const auto n = g.num_vertices();
    std::vector<std::int32_t> label(n, -1);
    std::int32_t next = 0;
    std::vector<VertexId> stack;
    for (std::size_t s = 0; s < n; ++s) {
        if (label[s] >= 0)
            continue;
        label[s] = next;
        stack.push_back(static_cast<VertexId>(s));
        while (!stack.empty()) {
            const VertexId v = stack.back();
            stack.pop_back();
            for (const auto& nb : g.neighbors(v))
                if (label[static_cast<std::size_t>(nb.vertex)] < 0) {
                    label[static_cast<std::size_t>(nb.vertex)] = next;
                    stack.push_back(nb.vertex);
                }
        }
        ++next;
    }
    if (count)
        *count = next;
    return label;
}

inline bool is_connected(const Graph& g) {
    std::int32_t count = 0;
    connected_components(g, &count);
    return count <= 1;
}

}  // namespace segsl

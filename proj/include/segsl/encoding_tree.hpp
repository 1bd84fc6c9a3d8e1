#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "entropy.hpp"
#include "graph.hpp"

namespace segsl {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

struct TreeNode {
    NodeId parent = kNoNode;
    std::vector<NodeId> children;
    VertexId vertex = -1;  // set on leaves only
    double volume = 0.0;   // V_alpha: summed degree of the vertices below
    double cut = 0.0;      // g_alpha: weight of edges leaving the vertex set
    bool alive = true;

    bool is_leaf() const noexcept { return vertex >= 0; }
};

/// Rooted tree whose leaves biject to the vertices of a graph; each internal node
/// stands for the union of its children's vertex sets.
///
/// Node ids are stable for the lifetime of the tree: operators append new nodes and
/// mark removed ones dead instead of reindexing. `compacted()` renumbers to a dense
/// layout (leaves first, in vertex order, then the root, then internal nodes).
class EncodingTree {
public:
    EncodingTree() = default;

    /// Height-1 tree: root with one leaf per vertex. Leaf ids equal vertex ids, root id is n.
    static EncodingTree single_level(const Graph& g) {
        const auto n = g.num_vertices();
        std::vector<NodeId> parent(n + 1, static_cast<NodeId>(n));
        parent[n] = kNoNode;
        std::vector<VertexId> vertex(n + 1, -1);
        for (std::size_t v = 0; v < n; ++v)
            vertex[v] = static_cast<VertexId>(v);
        return from_parents(g, parent, vertex);
    }

    /// Builds a tree from a parent array (kNoNode marks the root) and a leaf-vertex
    /// array (-1 for internal nodes). Children keep ascending id order. Caches are
    /// computed from the graph and the structure is validated.
    static EncodingTree from_parents(const Graph& g, std::span<const NodeId> parent, std::span<const VertexId> vertex) {
        if (parent.size() != vertex.size())
            throw ValidationError("encoding tree: parent and vertex arrays differ in length");
        EncodingTree t;
        t.nodes_.resize(parent.size());
        t.leaf_of_.assign(g.num_vertices(), kNoNode);
        for (std::size_t i = 0; i < parent.size(); ++i) {
            auto& node = t.nodes_[i];
            node.parent = parent[i];
            node.vertex = vertex[i];
            if (parent[i] == kNoNode) {
                if (t.root_ != kNoNode)
                    throw ValidationError("encoding tree: more than one root");
                t.root_ = static_cast<NodeId>(i);
            } else if (parent[i] < 0 || static_cast<std::size_t>(parent[i]) >= parent.size() ||
                       static_cast<std::size_t>(parent[i]) == i) {
                throw ValidationError("encoding tree: node " + std::to_string(i) + " has invalid parent " +
                                      std::to_string(parent[i]));
            }
            if (vertex[i] >= 0) {
                if (static_cast<std::size_t>(vertex[i]) >= g.num_vertices())
                    throw ValidationError("encoding tree: leaf " + std::to_string(i) + " names vertex " +
                                          std::to_string(vertex[i]) + " outside the graph");
                if (t.leaf_of_[static_cast<std::size_t>(vertex[i])] != kNoNode)
                    throw ValidationError("encoding tree: vertex " + std::to_string(vertex[i]) + " has two leaves");
                t.leaf_of_[static_cast<std::size_t>(vertex[i])] = static_cast<NodeId>(i);
            }
        }
        if (t.root_ == kNoNode)
            throw ValidationError("encoding tree: no root");
        for (std::size_t i = 0; i < parent.size(); ++i)
            if (parent[i] != kNoNode)
                t.nodes_[static_cast<std::size_t>(parent[i])].children.push_back(static_cast<NodeId>(i));
        t.check_structure(g);
        t.recompute_caches(g);
        return t;
    }

    NodeId root() const noexcept { return root_; }
    std::size_t num_vertices() const noexcept { return leaf_of_.size(); }
    /// Upper bound on node ids (dead ids included).
    std::size_t id_bound() const noexcept { return nodes_.size(); }
    std::size_t num_nodes() const {
        return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& x) { return x.alive; }));
    }

    bool contains(NodeId id) const noexcept {
        return id >= 0 && static_cast<std::size_t>(id) < nodes_.size() && nodes_[static_cast<std::size_t>(id)].alive;
    }

    const TreeNode& node(NodeId id) const {
        if (!contains(id))
            throw PreconditionError("encoding tree: no node " + std::to_string(id));
        return nodes_[static_cast<std::size_t>(id)];
    }

    NodeId leaf_of(VertexId v) const { return leaf_of_.at(static_cast<std::size_t>(v)); }

    /// Alive node ids in ascending order.
    std::vector<NodeId> node_ids() const {
        std::vector<NodeId> ids;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].alive)
                ids.push_back(static_cast<NodeId>(i));
        return ids;
    }

    double total_volume() const noexcept { return nodes_.empty() ? 0.0 : nodes_[static_cast<std::size_t>(root_)].volume; }

    int depth(NodeId id) const {
        int d = 0;
        for (NodeId x = node(id).parent; x != kNoNode; x = nodes_[static_cast<std::size_t>(x)].parent)
            ++d;
        return d;
    }

    /// Maximum root-to-leaf edge count.
    int height() const {
        int best = 0;
        std::vector<std::pair<NodeId, int>> stack{{root_, 0}};
        while (!stack.empty()) {
            auto [x, d] = stack.back();
            stack.pop_back();
            best = std::max(best, d);
            for (NodeId c : nodes_[static_cast<std::size_t>(x)].children)
                stack.emplace_back(c, d + 1);
        }
        return best;
    }

    /// Vertices under a node, ascending.
    std::vector<VertexId> vertex_set(NodeId id) const {
        std::vector<VertexId> out;
        for_each_leaf(id, [&](NodeId leaf) { out.push_back(nodes_[static_cast<std::size_t>(leaf)].vertex); });
        std::sort(out.begin(), out.end());
        return out;
    }

    /// True if `ancestor` lies on the path from `id` to the root (a node is its own ancestor).
    bool is_ancestor(NodeId ancestor, NodeId id) const {
        for (NodeId x = id; x != kNoNode; x = nodes_[static_cast<std::size_t>(x)].parent)
            if (x == ancestor)
                return true;
        return false;
    }

    /// Deepest node that is an ancestor of both.
    NodeId lowest_common_ancestor(NodeId a, NodeId b) const {
        int da = depth(a);
        int db = depth(b);
        for (; da > db; --da)
            a = node(a).parent;
        for (; db > da; --db)
            b = node(b).parent;
        while (a != b) {
            a = node(a).parent;
            b = node(b).parent;
        }
        return a;
    }

    struct CombineResult {
        double delta;  // H_before - H_after
        NodeId node;   // the inserted parent
    };

    /// Inserts a new node between siblings a, b and their parent.
    CombineResult combine(const Graph& g, NodeId a, NodeId b) {
        if (a == b)
            throw PreconditionError("combine: a node cannot be combined with itself");
        const auto& na = node(a);
        const auto& nb = node(b);
        if (na.parent == kNoNode || na.parent != nb.parent)
            throw PreconditionError("combine: nodes " + std::to_string(a) + " and " + std::to_string(b) +
                                    " are not siblings");
        const NodeId gamma = na.parent;
        const double cut_ab = cut_between_siblings(g, a, b);
        const double vol = total_volume();
        const double merged_volume = na.volume + nb.volume;
        const double delta = combine_delta(cut_ab, merged_volume, nodes_[static_cast<std::size_t>(gamma)].volume, vol);

        const auto delta_id = static_cast<NodeId>(nodes_.size());
        TreeNode fresh;
        fresh.parent = gamma;
        fresh.children = {std::min(a, b), std::max(a, b)};
        fresh.volume = merged_volume;
        fresh.cut = std::max(0.0, na.cut + nb.cut - 2.0 * cut_ab);
        auto& siblings = nodes_[static_cast<std::size_t>(gamma)].children;
        // The new node takes the position of the earlier of the two children.
        auto first = std::find_if(siblings.begin(), siblings.end(), [&](NodeId x) { return x == a || x == b; });
        const NodeId other = *first == a ? b : a;
        *first = delta_id;
        siblings.erase(std::find(first + 1, siblings.end(), other));
        nodes_.push_back(std::move(fresh));
        nodes_[static_cast<std::size_t>(a)].parent = delta_id;
        nodes_[static_cast<std::size_t>(b)].parent = delta_id;
        return {delta, delta_id};
    }

    struct LiftResult {
        double delta;         // H_before - H_after
        bool parent_removed;  // the old parent was left empty and deleted
    };

    /// Moves a up to its grandparent; an emptied parent is deleted.
    LiftResult lift(const Graph& g, NodeId a) {
        const auto& na = node(a);
        if (na.parent == kNoNode)
            throw PreconditionError("lift: the root cannot be lifted");
        const NodeId beta = na.parent;
        const auto& nbeta = nodes_[static_cast<std::size_t>(beta)];
        if (nbeta.parent == kNoNode)
            throw PreconditionError("lift: node " + std::to_string(a) + " is a child of the root");
        const NodeId gamma = nbeta.parent;

        double children_cut = 0.0;
        for (NodeId c : nbeta.children)
            children_cut += nodes_[static_cast<std::size_t>(c)].cut;
        const bool only_child = nbeta.children.size() == 1;
        const double to_siblings = only_child ? 0.0 : cut_to_rest_of_parent(g, a);
        const LiftTerms terms{na.volume,     na.cut,           to_siblings,
                              nbeta.volume,  nbeta.cut,        children_cut,
                              nodes_[static_cast<std::size_t>(gamma)].volume, only_child};
        const double delta = lift_delta(terms, total_volume());

        auto& beta_node = nodes_[static_cast<std::size_t>(beta)];
        auto& gamma_children = nodes_[static_cast<std::size_t>(gamma)].children;
        auto pos = std::find(gamma_children.begin(), gamma_children.end(), beta);
        beta_node.children.erase(std::find(beta_node.children.begin(), beta_node.children.end(), a));
        nodes_[static_cast<std::size_t>(a)].parent = gamma;
        if (only_child) {
            *pos = a;
            beta_node.alive = false;
            beta_node.parent = kNoNode;
        } else {
            beta_node.volume -= terms.a_volume;
            beta_node.cut = std::max(0.0, terms.b_cut - terms.a_cut + 2.0 * to_siblings);
            gamma_children.insert(pos + 1, a);
        }
        return {delta, only_child};
    }

    /// Recomputes every V_alpha and g_alpha from the graph.
    void recompute_caches(const Graph& g) {
        std::vector<double> internal(nodes_.size(), 0.0);
        std::vector<int> depth_of(nodes_.size(), 0);
        const auto order = preorder();
        for (NodeId x : order)
            if (x != root_)
                depth_of[static_cast<std::size_t>(x)] = depth_of[static_cast<std::size_t>(parent_of(x))] + 1;
        for (const auto& e : g.edges()) {
            NodeId a = leaf_of_[static_cast<std::size_t>(e.u)];
            NodeId b = leaf_of_[static_cast<std::size_t>(e.v)];
            while (depth_of[static_cast<std::size_t>(a)] > depth_of[static_cast<std::size_t>(b)])
                a = parent_of(a);
            while (depth_of[static_cast<std::size_t>(b)] > depth_of[static_cast<std::size_t>(a)])
                b = parent_of(b);
            while (a != b) {
                a = parent_of(a);
                b = parent_of(b);
            }
            internal[static_cast<std::size_t>(a)] += e.w;
        }
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            auto& node = nodes_[static_cast<std::size_t>(*it)];
            if (node.is_leaf()) {
                node.volume = g.degree(node.vertex);
            } else {
                node.volume = 0.0;
                for (NodeId c : node.children) {
                    node.volume += nodes_[static_cast<std::size_t>(c)].volume;
                    internal[static_cast<std::size_t>(*it)] += internal[static_cast<std::size_t>(c)];
                }
            }
            node.cut = std::max(0.0, node.volume - 2.0 * internal[static_cast<std::size_t>(*it)]);
        }
    }

    /// Throws ValidationError unless leaves biject to vertices, every internal node has
    /// children, parent/child links agree, and cached V/g match a fresh computation.
    void validate(const Graph& g, double tolerance = kEntropyTolerance) const {
        check_structure(g);
        EncodingTree fresh = *this;
        fresh.recompute_caches(g);
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (!nodes_[i].alive)
                continue;
            const auto& have = nodes_[i];
            const auto& want = fresh.nodes_[i];
            const double scale = std::max(1.0, want.volume);
            if (std::abs(have.volume - want.volume) > tolerance * scale || std::abs(have.cut - want.cut) > tolerance * scale)
                throw ValidationError("encoding tree: stale cache on node " + std::to_string(i) + " (V=" +
                                      std::to_string(have.volume) + " vs " + std::to_string(want.volume) +
                                      ", g=" + std::to_string(have.cut) + " vs " + std::to_string(want.cut) + ")");
        }
    }

    /// Copy with dense ids: leaves 0..n-1 in vertex order, root n, then internal nodes
    /// in preorder. Children lists keep their order.
    EncodingTree compacted() const {
        const auto n = leaf_of_.size();
        std::vector<NodeId> remap(nodes_.size(), kNoNode);
        for (std::size_t v = 0; v < n; ++v)
            remap[static_cast<std::size_t>(leaf_of_[v])] = static_cast<NodeId>(v);
        auto next = static_cast<NodeId>(n);
        for (NodeId x : preorder())
            if (!nodes_[static_cast<std::size_t>(x)].is_leaf())
                remap[static_cast<std::size_t>(x)] = next++;
        EncodingTree out;
        out.nodes_.resize(static_cast<std::size_t>(next));
        out.leaf_of_.resize(n);
        for (std::size_t v = 0; v < n; ++v)
            out.leaf_of_[v] = static_cast<NodeId>(v);
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (!nodes_[i].alive)
                continue;
            TreeNode copy = nodes_[i];
            copy.parent = copy.parent == kNoNode ? kNoNode : remap[static_cast<std::size_t>(copy.parent)];
            for (auto& c : copy.children)
                c = remap[static_cast<std::size_t>(c)];
            out.nodes_[static_cast<std::size_t>(remap[i])] = std::move(copy);
        }
        out.root_ = remap[static_cast<std::size_t>(root_)];
        return out;
    }

    /// Alive nodes, parents before children, children in list order.
    std::vector<NodeId> preorder() const {
        std::vector<NodeId> out;
        if (root_ == kNoNode)
            return out;
        std::vector<NodeId> stack{root_};
        while (!stack.empty()) {
            NodeId x = stack.back();
            stack.pop_back();
            out.push_back(x);
            const auto& ch = nodes_[static_cast<std::size_t>(x)].children;
            for (auto it = ch.rbegin(); it != ch.rend(); ++it)
                stack.push_back(*it);
        }
        return out;
    }

    template <class F>
    void for_each_leaf(NodeId id, F&& f) const {
        std::vector<NodeId> stack{id};
        while (!stack.empty()) {
            NodeId x = stack.back();
            stack.pop_back();
            const auto& nd = nodes_[static_cast<std::size_t>(x)];
            if (nd.is_leaf())
                f(x);
            else
                stack.insert(stack.end(), nd.children.begin(), nd.children.end());
        }
    }

private:
    NodeId parent_of(NodeId x) const { return nodes_[static_cast<std::size_t>(x)].parent; }

    // Child of `ancestor` on the path from `id` upward, or kNoNode if `ancestor` is not above `id`.
    NodeId child_toward(NodeId id, NodeId ancestor) const {
        for (NodeId x = id; x != kNoNode; x = parent_of(x))
            if (parent_of(x) == ancestor)
                return x;
        return kNoNode;
    }

    // Summed weight of edges between T_a and T_b, for siblings a and b.
    double cut_between_siblings(const Graph& g, NodeId a, NodeId b) const {
        if (nodes_[static_cast<std::size_t>(a)].volume > nodes_[static_cast<std::size_t>(b)].volume)
            std::swap(a, b);
        const NodeId gamma = parent_of(a);
        double cut = 0.0;
        for_each_leaf(a, [&](NodeId leaf) {
            for (const auto& nb : g.neighbors(nodes_[static_cast<std::size_t>(leaf)].vertex))
                if (child_toward(leaf_of_[static_cast<std::size_t>(nb.vertex)], gamma) == b)
                    cut += nb.weight;
        });
        return cut;
    }

    // Summed weight of edges between T_a and its siblings' vertex sets.
    double cut_to_rest_of_parent(const Graph& g, NodeId a) const {
        const NodeId beta = parent_of(a);
        double cut = 0.0;
        for_each_leaf(a, [&](NodeId leaf) {
            for (const auto& nb : g.neighbors(nodes_[static_cast<std::size_t>(leaf)].vertex)) {
                const NodeId top = child_toward(leaf_of_[static_cast<std::size_t>(nb.vertex)], beta);
                if (top != kNoNode && top != a)
                    cut += nb.weight;
            }
        });
        return cut;
    }

    void check_structure(const Graph& g) const {
        if (leaf_of_.size() != g.num_vertices())
            throw ValidationError("encoding tree: built for " + std::to_string(leaf_of_.size()) + " vertices, graph has " +
                                  std::to_string(g.num_vertices()));
        for (std::size_t v = 0; v < leaf_of_.size(); ++v)
            if (leaf_of_[v] == kNoNode)
                throw ValidationError("encoding tree: vertex " + std::to_string(v) + " has no leaf");
        std::vector<char> reached(nodes_.size(), 0);
        std::size_t leaves = 0;
        std::vector<NodeId> stack{root_};
        while (!stack.empty()) {
            NodeId x = stack.back();
            stack.pop_back();
            if (reached[static_cast<std::size_t>(x)])
                throw ValidationError("encoding tree: node " + std::to_string(x) + " reached twice (cycle or shared child)");
            reached[static_cast<std::size_t>(x)] = 1;
            const auto& nd = nodes_[static_cast<std::size_t>(x)];
            if (!nd.alive)
                throw ValidationError("encoding tree: dead node " + std::to_string(x) + " is still linked");
            if (nd.is_leaf()) {
                if (!nd.children.empty())
                    throw ValidationError("encoding tree: leaf " + std::to_string(x) + " has children");
                if (leaf_of_[static_cast<std::size_t>(nd.vertex)] != x)
                    throw ValidationError("encoding tree: leaf index out of sync at node " + std::to_string(x));
                ++leaves;
            } else if (nd.children.empty()) {
                throw ValidationError("encoding tree: internal node " + std::to_string(x) + " has no children");
            }
            for (NodeId c : nd.children) {
                if (!contains(c) || parent_of(c) != x)
                    throw ValidationError("encoding tree: child " + std::to_string(c) + " of node " + std::to_string(x) +
                                          " does not point back");
                stack.push_back(c);
            }
        }
        if (leaves != leaf_of_.size())
            throw ValidationError("encoding tree: " + std::to_string(leaves) + " leaves reachable for " +
                                  std::to_string(leaf_of_.size()) + " vertices");
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].alive && !reached[i])
                throw ValidationError("encoding tree: node " + std::to_string(i) + " is detached from the root");
    }

    std::vector<TreeNode> nodes_;
    std::vector<NodeId> leaf_of_;
    NodeId root_ = kNoNode;
};

struct EntropyReport {
    double h1 = 0.0;                  // one-dimensional entropy of the graph (bits)
    double h_tree = 0.0;              // structural entropy of the tree (bits)
    std::map<NodeId, double> per_node;  // every non-root node's own term
    double normalized = 0.0;          // h_tree / h1
};

/// Per-node terms -(g/vol) log2(V/V_parent) over all non-root nodes, and their sum.
/// Vertices of degree zero contribute nothing to either entropy.
inline EntropyReport tree_entropy(const Graph& g, const EncodingTree& t) {
    t.validate(g);
    const double vol = g.volume();
    EntropyReport report;
    for (NodeId id : t.preorder()) {
        if (id == t.root())
            continue;
        const auto& nd = t.node(id);
        const double term = node_entropy_term(nd.cut, nd.volume, t.node(nd.parent).volume, vol);
        report.per_node.emplace(id, term);
        report.h_tree += term;
    }
    for (double d : g.degrees())
        report.h1 += node_entropy_term(d, d, vol, vol);
    report.normalized = report.h1 > 0.0 ? report.h_tree / report.h1 : 1.0;
    return report;
}

}  // namespace segsl

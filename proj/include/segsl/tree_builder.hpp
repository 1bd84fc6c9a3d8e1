#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <queue>
#include <unordered_map>
#include <utility>
#include <vector>

#include "encoding_tree.hpp"

namespace segsl {

enum class TreeStrategy {
    // Greedy community merging under the root (each merge is a combine followed by
    // lifting the absorbed nodes' children), then extra levels added above the root's
    // children or below the bottom communities, whichever lowers the entropy more.
    merge_levels,
    // Combine siblings into a full binary tree, then lift by largest delta until the
    // height bound holds. Quadratic in practice: binary trees of sparse graphs are
    // caterpillar-like, so squeezing needs on the order of n * height lifts.
    combine_then_lift,
};

struct TreeBuildOptions {
    int height = 2;  // K, maximum root-to-leaf edge count, >= 2
    TreeStrategy strategy = TreeStrategy::merge_levels;
    bool force_binary = false;  // combine_then_lift: keep combining until the root has 2 children
};

struct TreeBuildStats {
    std::size_t combines = 0;      // merges for merge_levels
    std::size_t lifts = 0;
    std::size_t forced_lifts = 0;  // lifts applied only to satisfy the height bound
    std::size_t levels_added = 0;  // merge_levels: levels added beyond the first partition
    int binary_height = 0;         // combine_then_lift: height after the combine phase
    bool fell_back_to_single_level = false;
    double ms_combine = 0.0;
    double ms_lift = 0.0;
};

struct OptimalTree {
    EncodingTree tree;
    EntropyReport report;
    TreeBuildStats stats;
};

namespace builder_detail {

struct Candidate {
    double delta;
    NodeId lo;
    NodeId hi;
    NodeId node;            // lifted node (lift phase)
    std::uint32_t version;  // lift phase staleness check

    // Max-heap on delta; ties go to the lexicographically smallest (lo, hi).
    friend bool operator<(const Candidate& x, const Candidate& y) {
        if (x.delta != y.delta)
            return x.delta < y.delta;
        if (x.lo != y.lo)
            return x.lo > y.lo;
        return x.hi > y.hi;
    }
};

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// A sibling (or group of siblings) taking part in a merge under a common parent.
struct Group {
    double volume;     // V
    double cut;        // g of the group's vertex set
    double child_cut;  // sum of g over its members
};

/// Entropy decrease from merging sibling groups A and B under a parent of volume
/// `parent_volume`: the group terms are replaced by one, and every member's term is
/// re-based from V_A (or V_B) to V_A + V_B. A single sibling X counts as the group
/// {X} with child_cut = g_X, whose entropy equals X's own term.
inline double merge_delta(const Group& a, const Group& b, double cut_ab, double parent_volume, double total_volume) {
    const double merged_volume = a.volume + b.volume;
    const double merged_cut = std::max(0.0, a.cut + b.cut - 2.0 * cut_ab);
    double d = node_entropy_term(a.cut, a.volume, parent_volume, total_volume) +
               node_entropy_term(b.cut, b.volume, parent_volume, total_volume) -
               node_entropy_term(merged_cut, merged_volume, parent_volume, total_volume);
    if (a.child_cut > 0.0 && a.volume > 0.0)
        d -= a.child_cut * std::log2(merged_volume / a.volume) / total_volume;
    if (b.child_cut > 0.0 && b.volume > 0.0)
        d -= b.child_cut * std::log2(merged_volume / b.volume) / total_volume;
    return d;
}

struct Partition {
    std::vector<std::vector<std::size_t>> groups;  // item indices, only groups of two or more
    std::vector<double> group_cut;                 // g of each group
    double gain = 0.0;                             // total entropy decrease
    std::size_t merges = 0;
};

using Row = std::vector<std::pair<std::size_t, double>>;

struct MergeCandidate {
    double delta;
    std::size_t lo;
    std::size_t hi;
    double cut;  // fixed while both groups are alive

    friend bool operator<(const MergeCandidate& x, const MergeCandidate& y) {
        if (x.delta != y.delta)
            return x.delta < y.delta;
        if (x.lo != y.lo)
            return x.lo > y.lo;
        return x.hi > y.hi;
    }
};

/// Agglomerative merging of items connected by positive cut: repeatedly applies the
/// best positive merge_delta. Items are indexed 0..m-1; groups formed later get ids
/// m, m+1, ... for tie-breaking. rows[i] lists (item, weight) for edges leaving item
/// i and may repeat an item.
inline Partition greedy_partition(const std::vector<Group>& items, std::vector<Row> rows, double parent_volume,
                                  double total_volume) {
    const std::size_t m = items.size();
    std::vector<Group> group(items);
    std::vector<std::size_t> merged_into(m, SIZE_MAX);
    std::vector<char> alive(m, 1);
    rows.resize(m);

    auto find = [&](std::size_t x) {
        std::size_t r = x;
        while (merged_into[r] != SIZE_MAX)
            r = merged_into[r];
        while (merged_into[x] != SIZE_MAX) {
            const std::size_t next = merged_into[x];
            merged_into[x] = r;
            x = next;
        }
        return r;
    };

    // Rows hold stale ids of merged groups; compaction resolves them and sums weights.
    std::vector<double> acc(m, 0.0);
    std::vector<char> mark(m, 0);
    std::vector<std::size_t> order;
    auto compact = [&](std::size_t x) {
        order.clear();
        for (auto [y, w] : rows[x]) {
            y = find(y);
            if (y == x)
                continue;
            if (!mark[y]) {
                mark[y] = 1;
                order.push_back(y);
            }
            acc[y] += w;
        }
        std::sort(order.begin(), order.end());
        Row out;
        out.reserve(order.size());
        for (auto y : order) {
            out.emplace_back(y, acc[y]);
            acc[y] = 0.0;
            mark[y] = 0;
        }
        rows[x] = std::move(out);
    };

    std::priority_queue<MergeCandidate> heap;
    auto push = [&](std::size_t a, std::size_t b, double cut) {
        const double d = merge_delta(group[a], group[b], cut, parent_volume, total_volume);
        if (d > kEntropyTolerance)
            heap.push({d, std::min(a, b), std::max(a, b), cut});
    };
    for (std::size_t a = 0; a < m; ++a) {
        compact(a);
        for (const auto& [b, w] : rows[a])
            if (a < b)
                push(a, b, w);
    }

    Partition out;
    while (!heap.empty()) {
        const MergeCandidate top = heap.top();
        heap.pop();
        const std::size_t a = top.lo;
        const std::size_t b = top.hi;
        if (!alive[a] || !alive[b])
            continue;
        const std::size_t c = group.size();
        group.push_back({group[a].volume + group[b].volume, std::max(0.0, group[a].cut + group[b].cut - 2.0 * top.cut),
                         group[a].child_cut + group[b].child_cut});
        alive.push_back(1);
        merged_into.push_back(SIZE_MAX);
        acc.push_back(0.0);
        mark.push_back(0);
        alive[a] = alive[b] = 0;
        merged_into[a] = merged_into[b] = c;
        out.gain += top.delta;
        ++out.merges;

        Row merged = std::move(rows[a]);
        merged.insert(merged.end(), rows[b].begin(), rows[b].end());
        rows[a] = {};
        rows[b] = {};
        rows.push_back(std::move(merged));
        compact(c);
        for (const auto& [x, w] : rows[c])
            push(c, x, w);
    }

    std::vector<std::size_t> slot(group.size(), SIZE_MAX);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t g = find(i);
        if (g < m)
            continue;
        if (slot[g] == SIZE_MAX) {
            slot[g] = out.groups.size();
            out.groups.emplace_back();
            out.group_cut.push_back(group[g].cut);
        }
        out.groups[slot[g]].push_back(i);
    }
    return out;
}

// Entropy of a group of siblings, times the total volume, up to terms that do not
// depend on how the siblings are grouped. A group of one stands for the unwrapped item.
inline double group_cost(double volume, double cut, double child_cut, double parent_volume) {
    if (volume <= 0.0)
        return 0.0;
    double c = child_cut * std::log2(volume);
    if (cut > 0.0)
        c -= cut * std::log2(volume / parent_volume);
    return c;
}

/// Sorts each row and sums repeated entries.
inline void compact_rows(std::vector<Row>& rows) {
    for (auto& row : rows) {
        std::sort(row.begin(), row.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        std::size_t k = 0;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (k > 0 && row[k - 1].first == row[i].first)
                row[k - 1].second += row[i].second;
            else
                row[k++] = row[i];
        }
        row.resize(k);
    }
}

/// Groups items by alternating greedy merges of whole groups, single-item moves and
/// group dissolution (all members leave for their best neighbouring group), keeping
/// only changes that lower the entropy. `rows` must be compacted and symmetric.
class LocalSearch {
public:
    LocalSearch(const std::vector<Group>& items, const std::vector<Row>& rows, double parent_volume,
                double total_volume)
        : items_(items), rows_(rows), vp_(parent_volume), vol_(total_volume), tol_(kEntropyTolerance * total_volume) {
        const std::size_t m = items.size();
        label_.resize(m);
        for (std::size_t i = 0; i < m; ++i)
            label_[i] = i;
        acc_.assign(m, 0.0);
        mark_.assign(m, 0);
        recompute();
    }

    // Rounds stop once one improves the total gain by less than `min_round_gain` of it.
    Partition run(std::size_t max_rounds = 64, double min_round_gain = 1e-3) {
        double gain = 0.0;
        for (std::size_t round = 0; round < max_rounds; ++round) {
            bool changed = merge_groups();
            changed = move_items() || changed;
            changed = dissolve_groups() || changed;
            if (!changed)
                break;
            const double next = result().gain;
            if (next - gain < min_round_gain * next)
                break;
            gain = next;
        }
        return result();
    }

private:
    double cost(std::size_t l) const { return size_[l] == 0 ? 0.0 : group_cost(vol_g_[l], cut_g_[l], sc_g_[l], vp_); }

    void recompute() {
        const std::size_t m = items_.size();
        vol_g_.assign(m, 0.0);
        cut_g_.assign(m, 0.0);
        sc_g_.assign(m, 0.0);
        size_.assign(m, 0);
        members_.assign(m, {});
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t l = label_[i];
            vol_g_[l] += items_[i].volume;
            cut_g_[l] += items_[i].cut;
            sc_g_[l] += items_[i].cut;
            ++size_[l];
            members_[l].push_back(i);
            for (const auto& [j, w] : rows_[i])
                if (label_[j] == l)
                    cut_g_[l] -= w;  // each internal edge is seen from both ends
        }
        free_.clear();
        for (std::size_t l = m; l-- > 0;) {
            cut_g_[l] = std::max(0.0, cut_g_[l]);
            if (size_[l] == 0)
                free_.push_back(l);
        }
    }

    // Collects the cut from item i to each neighbouring group into acc_ and touched_.
    void gather(std::size_t i) {
        touched_.clear();
        for (const auto& [j, w] : rows_[i]) {
            const std::size_t l = label_[j];
            if (!mark_[l]) {
                mark_[l] = 1;
                touched_.push_back(l);
            }
            acc_[l] += w;
        }
        std::sort(touched_.begin(), touched_.end());
    }

    void release() {
        for (auto l : touched_) {
            acc_[l] = 0.0;
            mark_[l] = 0;
        }
    }

    // Gain (times the volume) of moving item i from its group to group b; b may be empty.
    double move_gain(std::size_t i, std::size_t b, double cut_ia, double cut_ib) const {
        const std::size_t a = label_[i];
        const auto& it = items_[i];
        const double before = cost(a) + cost(b);
        double after_a = 0.0;
        if (size_[a] > 1)
            after_a = group_cost(vol_g_[a] - it.volume, std::max(0.0, cut_g_[a] - it.cut + 2.0 * cut_ia),
                                 sc_g_[a] - it.cut, vp_);
        const double after_b = group_cost(vol_g_[b] + it.volume, std::max(0.0, cut_g_[b] + it.cut - 2.0 * cut_ib),
                                          sc_g_[b] + it.cut, vp_);
        return before - after_a - after_b;
    }

    void apply_move(std::size_t i, std::size_t b, double cut_ia, double cut_ib) {
        const std::size_t a = label_[i];
        const auto& it = items_[i];
        if (size_[a] == 1) {
            vol_g_[a] = cut_g_[a] = sc_g_[a] = 0.0;
            free_.push_back(a);
        } else {
            vol_g_[a] -= it.volume;
            cut_g_[a] = std::max(0.0, cut_g_[a] - it.cut + 2.0 * cut_ia);
            sc_g_[a] -= it.cut;
        }
        --size_[a];
        members_[a].erase(std::find(members_[a].begin(), members_[a].end(), i));
        vol_g_[b] += it.volume;
        cut_g_[b] = std::max(0.0, cut_g_[b] + it.cut - 2.0 * cut_ib);
        sc_g_[b] += it.cut;
        ++size_[b];
        members_[b].push_back(i);
        label_[i] = b;
    }

    // Some empty label; stale entries (labels reused since) are dropped lazily.
    std::size_t free_label() const {
        while (size_[free_.back()] != 0)
            free_.pop_back();
        return free_.back();
    }

    struct Move {
        std::size_t to;
        double gain;
        double cut_from;
        double cut_to;
    };

    // Best destination for item i other than `exclude`; a fresh group is offered when
    // i has company. Expects gather(i) to have run.
    Move best_move(std::size_t i, std::size_t exclude) const {
        const std::size_t a = label_[i];
        const double cut_ia = mark_[a] ? acc_[a] : 0.0;
        Move best{SIZE_MAX, -std::numeric_limits<double>::infinity(), cut_ia, 0.0};
        for (auto l : touched_) {
            if (l == a || l == exclude)
                continue;
            const double gain = move_gain(i, l, cut_ia, acc_[l]);
            if (gain > best.gain)
                best = {l, gain, cut_ia, acc_[l]};
        }
        if (size_[a] > 1) {
            const std::size_t fresh = free_label();
            const double gain = move_gain(i, fresh, cut_ia, 0.0);
            if (gain > best.gain)
                best = {fresh, gain, cut_ia, 0.0};
        }
        return best;
    }

    bool merge_groups() {
        const std::size_t m = items_.size();
        std::vector<std::size_t> index(m, SIZE_MAX);
        std::vector<std::size_t> labels;
        for (std::size_t i = 0; i < m; ++i)
            if (index[label_[i]] == SIZE_MAX) {
                index[label_[i]] = labels.size();
                labels.push_back(label_[i]);
            }
        std::vector<Group> groups(labels.size());
        for (std::size_t k = 0; k < labels.size(); ++k)
            groups[k] = {vol_g_[labels[k]], cut_g_[labels[k]], sc_g_[labels[k]]};
        std::vector<Row> rows(labels.size());
        for (std::size_t i = 0; i < m; ++i)
            for (const auto& [j, w] : rows_[i])
                if (label_[j] != label_[i])
                    rows[index[label_[i]]].emplace_back(index[label_[j]], w);
        const Partition p = greedy_partition(groups, std::move(rows), vp_, vol_);
        if (p.merges == 0)
            return false;
        for (const auto& g : p.groups) {
            const std::size_t target = labels[g.front()];
            for (std::size_t k = 1; k < g.size(); ++k)
                for (std::size_t i : members_[labels[g[k]]])
                    label_[i] = target;
        }
        recompute();
        return true;
    }

    bool move_items() {
        bool changed = false;
        for (std::size_t i = 0; i < items_.size(); ++i) {
            gather(i);
            const Move mv = best_move(i, SIZE_MAX);
            release();
            if (mv.to != SIZE_MAX && mv.gain > tol_) {
                apply_move(i, mv.to, mv.cut_from, mv.cut_to);
                changed = true;
            }
        }
        return changed;
    }

    bool dissolve_groups() {
        bool changed = false;
        for (std::size_t g = 0; g < items_.size(); ++g) {
            if (size_[g] < 2)
                continue;
            std::vector<std::size_t> members = members_[g];
            std::sort(members.begin(), members.end());
            struct Undo {
                std::size_t item;
                std::size_t from;
            };
            std::vector<Undo> undo;
            double total = 0.0;
            for (std::size_t i : members) {
                gather(i);
                const Move mv = best_move(i, g);
                release();
                if (mv.to == SIZE_MAX)
                    continue;
                undo.push_back({i, g});
                total += mv.gain;
                apply_move(i, mv.to, mv.cut_from, mv.cut_to);
            }
            if (total > tol_) {
                changed = true;
                continue;
            }
            for (auto u = undo.rbegin(); u != undo.rend(); ++u) {
                gather(u->item);
                const std::size_t here = label_[u->item];
                const double cut_here = mark_[here] ? acc_[here] : 0.0;
                const double cut_back = mark_[u->from] ? acc_[u->from] : 0.0;
                release();
                apply_move(u->item, u->from, cut_here, cut_back);
            }
        }
        return changed;
    }

    Partition result() const {
        const std::size_t m = items_.size();
        Partition out;
        double before = 0.0;
        for (const auto& it : items_)
            before += group_cost(it.volume, it.cut, it.cut, vp_);
        double after = 0.0;
        std::size_t groups = 0;
        std::vector<std::size_t> slot(m, SIZE_MAX);
        std::vector<char> seen(m, 0);
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t l = label_[i];
            if (!seen[l]) {
                seen[l] = 1;
                ++groups;
                after += cost(l);
                if (size_[l] > 1) {
                    slot[l] = out.groups.size();
                    out.groups.emplace_back();
                    out.group_cut.push_back(cut_g_[l]);
                }
            }
            if (slot[l] != SIZE_MAX)
                out.groups[slot[l]].push_back(i);
        }
        out.merges = m - groups;
        out.gain = (before - after) / vol_;
        return out;
    }

    const std::vector<Group>& items_;
    const std::vector<Row>& rows_;
    double vp_;
    double vol_;
    double tol_;
    std::vector<std::size_t> label_;
    std::vector<double> vol_g_, cut_g_, sc_g_;
    std::vector<std::size_t> size_;
    std::vector<std::vector<std::size_t>> members_;
    mutable std::vector<std::size_t> free_;
    std::vector<double> acc_;
    std::vector<char> mark_;
    std::vector<std::size_t> touched_;
};

// Mutable tree shared by both strategies. Ids: leaves 0..n-1, root n, then new
// nodes in creation order.
class Builder {
public:
    Builder(const Graph& g, const TreeBuildOptions& opt) : g_(g), opt_(opt), vol_(g.volume()) {
        const auto n = g.num_vertices();
        root_ = static_cast<NodeId>(n);
        parent_.assign(n + 1, root_);
        parent_[n] = kNoNode;
        volume_.assign(n + 1, 0.0);
        cut_.assign(n + 1, 0.0);
        alive_.assign(n + 1, 1);
        for (std::size_t v = 0; v < n; ++v)
            volume_[v] = cut_[v] = g.degree(static_cast<VertexId>(v));
        volume_[n] = vol_;
        build_children();
    }

    // ---- merge_levels -------------------------------------------------------------

    void merge_levels(TreeBuildStats& stats) {
        auto start = Clock::now();
        auto first = partition_children(root_);
        apply_partition(root_, first);
        stats.combines += first.merges;
        stats.ms_combine = ms_since(start);

        while (true) {
            const auto depth = node_depths();
            const int height = current_height(depth);
            if (height >= opt_.height)
                break;
            Partition above = partition_children(root_);
            std::vector<std::pair<NodeId, Partition>> below;
            double below_gain = 0.0;
            for (std::size_t x = static_cast<std::size_t>(root_) + 1; x < parent_.size(); ++x) {
                if (!alive_[x] || depth[x] + 2 > opt_.height || children_[x].size() < 2)
                    continue;
                const bool bottom = std::all_of(children_[x].begin(), children_[x].end(),
                                                [&](NodeId c) { return is_leaf(c); });
                if (!bottom)
                    continue;
                auto p = partition_children(static_cast<NodeId>(x));
                if (p.groups.empty())
                    continue;
                below_gain += p.gain;
                below.emplace_back(static_cast<NodeId>(x), std::move(p));
            }
            if (std::max(above.gain, below_gain) <= kEntropyTolerance)
                break;
            if (above.gain >= below_gain) {
                stats.combines += above.merges;
                apply_partition(root_, above);
            } else {
                for (auto& [node, p] : below) {
                    stats.combines += p.merges;
                    apply_partition(node, p);
                }
            }
            ++stats.levels_added;
        }
    }

    // ---- combine_then_lift ----------------------------------------------------------

    // One child of the root per connected component with two or more vertices, so
    // that combines never cross components.
    void wrap_components() {
        std::int32_t count = 0;
        const auto label = connected_components(g_, &count);
        if (count <= 1)
            return;
        const auto n = g_.num_vertices();
        std::vector<std::size_t> size(static_cast<std::size_t>(count), 0);
        for (auto l : label)
            ++size[static_cast<std::size_t>(l)];
        std::vector<NodeId> wrapper(static_cast<std::size_t>(count), kNoNode);
        for (std::int32_t c = 0; c < count; ++c)
            if (size[static_cast<std::size_t>(c)] > 1)
                wrapper[static_cast<std::size_t>(c)] = add_node(root_, 0.0, 0.0);
        for (std::size_t v = 0; v < n; ++v) {
            const NodeId w = wrapper[static_cast<std::size_t>(label[v])];
            if (w != kNoNode) {
                parent_[v] = w;
                volume_[static_cast<std::size_t>(w)] += volume_[v];
            }
        }
        build_children();
    }

    void combine_phase(TreeBuildStats& stats) {
        const auto n = g_.num_vertices();
        std::vector<std::unordered_map<NodeId, double>> adj(parent_.size());
        std::unordered_map<NodeId, std::size_t> child_count;
        for (std::size_t v = 0; v < n; ++v) {
            ++child_count[parent_[v]];
            for (const auto& nb : g_.neighbors(static_cast<VertexId>(v)))
                adj[v].emplace(nb.vertex, nb.weight);
        }
        std::priority_queue<Candidate> heap;
        auto push = [&](NodeId a, NodeId b, double cut) {
            const NodeId p = parent_[static_cast<std::size_t>(a)];
            const double d = combine_delta(cut, volume_[static_cast<std::size_t>(a)] + volume_[static_cast<std::size_t>(b)],
                                           volume_[static_cast<std::size_t>(p)], vol_);
            heap.push({d, std::min(a, b), std::max(a, b), kNoNode, 0});
        };
        for (const auto& e : g_.edges())
            push(e.u, e.v, e.w);

        std::vector<char> active(parent_.size(), 1);
        while (!heap.empty()) {
            const Candidate top = heap.top();
            heap.pop();
            if (!active[static_cast<std::size_t>(top.lo)] || !active[static_cast<std::size_t>(top.hi)])
                continue;
            const NodeId p = parent_[static_cast<std::size_t>(top.lo)];
            if (child_count[p] <= 2)
                continue;
            if (top.delta <= kEntropyTolerance && !opt_.force_binary)
                break;  // heap order: nothing better remains under any parent

            const NodeId a = top.lo;
            const NodeId b = top.hi;
            const double cut_ab = adj[static_cast<std::size_t>(a)].at(b);
            const NodeId d = add_node(p, volume_[static_cast<std::size_t>(a)] + volume_[static_cast<std::size_t>(b)],
                                      std::max(0.0, cut_[static_cast<std::size_t>(a)] + cut_[static_cast<std::size_t>(b)] - 2.0 * cut_ab));
            adj.emplace_back();
            active.push_back(1);
            parent_[static_cast<std::size_t>(a)] = d;
            parent_[static_cast<std::size_t>(b)] = d;
            --child_count[p];
            child_count[d] = 2;
            active[static_cast<std::size_t>(a)] = 0;
            active[static_cast<std::size_t>(b)] = 0;

            const bool a_bigger = adj[static_cast<std::size_t>(a)].size() >= adj[static_cast<std::size_t>(b)].size();
            auto merged = std::move(adj[static_cast<std::size_t>(a_bigger ? a : b)]);
            for (const auto& [x, w] : adj[static_cast<std::size_t>(a_bigger ? b : a)])
                merged[x] += w;
            adj[static_cast<std::size_t>(a)] = {};
            adj[static_cast<std::size_t>(b)] = {};
            merged.erase(a);
            merged.erase(b);
            for (const auto& [x, w] : merged) {
                auto& row = adj[static_cast<std::size_t>(x)];
                row.erase(a);
                row.erase(b);
                row[d] = w;
            }
            adj[static_cast<std::size_t>(d)] = std::move(merged);
            std::vector<std::pair<NodeId, double>> ordered(adj[static_cast<std::size_t>(d)].begin(),
                                                           adj[static_cast<std::size_t>(d)].end());
            std::sort(ordered.begin(), ordered.end());
            for (const auto& [x, w] : ordered)
                push(d, x, w);
            ++stats.combines;
        }
        build_children();
    }

    // Lifts by best delta: unconditionally while the height exceeds K, then only
    // while some lift strictly lowers the entropy.
    void lift_phase(TreeBuildStats& stats) {
        init_lift_state();
        stats.binary_height = height_;
        for (std::size_t x = 0; x < parent_.size(); ++x)
            evaluate(static_cast<NodeId>(x));
        while (!heap_.empty()) {
            const Candidate top = heap_.top();
            heap_.pop();
            const auto a = static_cast<std::size_t>(top.node);
            if (!alive_[a] || version_[a] != top.version)
                continue;
            const bool forced = height_ > opt_.height;
            if (!forced && top.delta <= kEntropyTolerance)
                break;
            apply_lift(top.node);
            ++stats.lifts;
            if (forced && top.delta <= kEntropyTolerance)
                ++stats.forced_lifts;
            if (heap_.size() > 8 * parent_.size() + 1024)
                rebuild_heap();
        }
    }

    // ---- output ---------------------------------------------------------------------

    EncodingTree finish() const {
        const auto n = g_.num_vertices();
        std::vector<NodeId> remap(parent_.size(), kNoNode);
        for (std::size_t v = 0; v <= n; ++v)
            remap[v] = static_cast<NodeId>(v);
        auto next = static_cast<NodeId>(n + 1);
        for (std::size_t x = n + 1; x < parent_.size(); ++x)
            if (alive_[x])
                remap[x] = next++;
        std::vector<NodeId> parent(static_cast<std::size_t>(next), kNoNode);
        std::vector<VertexId> vertex(static_cast<std::size_t>(next), -1);
        for (std::size_t x = 0; x < parent_.size(); ++x) {
            if (!alive_[x])
                continue;
            const auto id = static_cast<std::size_t>(remap[x]);
            parent[id] = parent_[x] == kNoNode ? kNoNode : remap[static_cast<std::size_t>(parent_[x])];
            if (x < n)
                vertex[id] = static_cast<VertexId>(x);
        }
        return EncodingTree::from_parents(g_, parent, vertex);
    }

private:
    bool is_leaf(NodeId x) const { return static_cast<std::size_t>(x) < g_.num_vertices(); }

    NodeId add_node(NodeId parent, double volume, double cut) {
        const auto id = static_cast<NodeId>(parent_.size());
        parent_.push_back(parent);
        volume_.push_back(volume);
        cut_.push_back(cut);
        alive_.push_back(1);
        children_.emplace_back();
        return id;
    }

    void build_children() {
        children_.assign(parent_.size(), {});
        for (std::size_t x = 0; x < parent_.size(); ++x)
            if (parent_[x] != kNoNode && alive_[x])
                children_[static_cast<std::size_t>(parent_[x])].push_back(static_cast<NodeId>(x));
    }

    std::vector<int> node_depths() const {
        std::vector<int> depth(parent_.size(), 0);
        std::vector<NodeId> order{root_};
        for (std::size_t i = 0; i < order.size(); ++i)
            for (NodeId c : children_[static_cast<std::size_t>(order[i])]) {
                depth[static_cast<std::size_t>(c)] = depth[static_cast<std::size_t>(order[i])] + 1;
                order.push_back(c);
            }
        return depth;
    }

    int current_height(const std::vector<int>& depth) const {
        int h = 0;
        for (std::size_t v = 0; v < g_.num_vertices(); ++v)
            h = std::max(h, depth[v]);
        return h;
    }

    // Groups the children of `p` by greedy merging over the cuts between them.
    Partition partition_children(NodeId p) {
        const auto& items = children_[static_cast<std::size_t>(p)];
        const std::size_t m = items.size();
        if (m < 3)
            return {};  // two siblings merged would span the whole parent: no gain
        if (item_of_.size() != g_.num_vertices())
            item_of_.assign(g_.num_vertices(), SIZE_MAX);
        std::vector<Group> groups(m);
        std::vector<VertexId> touched;
        for (std::size_t i = 0; i < m; ++i) {
            const auto x = static_cast<std::size_t>(items[i]);
            groups[i] = {volume_[x], cut_[x], cut_[x]};
            std::vector<NodeId> stack{items[i]};
            while (!stack.empty()) {
                const NodeId y = stack.back();
                stack.pop_back();
                if (is_leaf(y)) {
                    item_of_[static_cast<std::size_t>(y)] = i;
                    touched.push_back(y);
                } else {
                    const auto& ch = children_[static_cast<std::size_t>(y)];
                    stack.insert(stack.end(), ch.begin(), ch.end());
                }
            }
        }
        std::vector<Row> rows(m);
        for (VertexId v : touched) {
            const std::size_t i = item_of_[static_cast<std::size_t>(v)];
            for (const auto& nb : g_.neighbors(v)) {
                const std::size_t j = item_of_[static_cast<std::size_t>(nb.vertex)];
                if (j != SIZE_MAX && j != i)
                    rows[i].emplace_back(j, nb.weight);
            }
        }
        for (VertexId v : touched)
            item_of_[static_cast<std::size_t>(v)] = SIZE_MAX;
        compact_rows(rows);
        return LocalSearch(groups, rows, volume_[static_cast<std::size_t>(p)], vol_).run();
    }

    // Inserts one node per group between `p` and the group's members; the new node
    // takes the position of its first member.
    void apply_partition(NodeId p, const Partition& part) {
        if (part.groups.empty())
            return;
        const std::vector<NodeId> items = children_[static_cast<std::size_t>(p)];
        std::vector<NodeId> replacement(items.size(), kNoNode);
        std::vector<char> keep(items.size(), 1);
        for (std::size_t k = 0; k < part.groups.size(); ++k) {
            const auto& members = part.groups[k];
            double volume = 0.0;
            for (auto i : members)
                volume += volume_[static_cast<std::size_t>(items[i])];
            const NodeId node = add_node(p, volume, part.group_cut[k]);
            for (auto i : members) {
                parent_[static_cast<std::size_t>(items[i])] = node;
                children_[static_cast<std::size_t>(node)].push_back(items[i]);
                keep[i] = 0;
            }
            replacement[members.front()] = node;
        }
        std::vector<NodeId> next;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (keep[i])
                next.push_back(items[i]);
            else if (replacement[i] != kNoNode)
                next.push_back(replacement[i]);
        }
        children_[static_cast<std::size_t>(p)] = std::move(next);
    }

    void init_lift_state() {
        const auto n = g_.num_vertices();
        const auto size = parent_.size();
        const auto depth = node_depths();
        leaf_depth_.assign(n, 0);
        depth_count_.assign(size + 1, 0);
        height_ = 0;
        for (std::size_t v = 0; v < n; ++v) {
            leaf_depth_[v] = depth[v];
            ++depth_count_[static_cast<std::size_t>(depth[v])];
            height_ = std::max(height_, depth[v]);
        }

        const auto edges = g_.edges();
        lca_.resize(edges.size());
        top_u_.resize(edges.size());
        top_v_.resize(edges.size());
        sibling_cut_.assign(size, 0.0);
        children_cut_.assign(size, 0.0);
        for (std::size_t i = 0; i < edges.size(); ++i) {
            NodeId a = edges[i].u;
            NodeId b = edges[i].v;
            NodeId pa = kNoNode;
            NodeId pb = kNoNode;
            while (depth[static_cast<std::size_t>(a)] > depth[static_cast<std::size_t>(b)]) {
                pa = a;
                a = parent_[static_cast<std::size_t>(a)];
            }
            while (depth[static_cast<std::size_t>(b)] > depth[static_cast<std::size_t>(a)]) {
                pb = b;
                b = parent_[static_cast<std::size_t>(b)];
            }
            while (a != b) {
                pa = a;
                pb = b;
                a = parent_[static_cast<std::size_t>(a)];
                b = parent_[static_cast<std::size_t>(b)];
            }
            lca_[i] = a;
            top_u_[i] = pa;
            top_v_[i] = pb;
            sibling_cut_[static_cast<std::size_t>(pa)] += edges[i].w;
            sibling_cut_[static_cast<std::size_t>(pb)] += edges[i].w;
        }
        for (std::size_t x = 0; x < size; ++x)
            if (parent_[x] != kNoNode)
                children_cut_[static_cast<std::size_t>(parent_[x])] += cut_[x];
        version_.assign(size, 0);
        stamp_.assign(size, 0);
    }

    void evaluate(NodeId x) {
        const auto i = static_cast<std::size_t>(x);
        ++version_[i];
        if (!alive_[i] || x == root_)
            return;
        const NodeId beta = parent_[i];
        if (beta == root_)
            return;
        const auto b = static_cast<std::size_t>(beta);
        const LiftTerms terms{volume_[i], cut_[i], sibling_cut_[i], volume_[b], cut_[b], children_cut_[b],
                              volume_[static_cast<std::size_t>(parent_[b])], children_[b].size() == 1};
        heap_.push({lift_delta(terms, vol_), std::min(x, beta), std::max(x, beta), x, version_[i]});
    }

    void rebuild_heap() {
        heap_ = {};
        for (std::size_t x = 0; x < parent_.size(); ++x)
            evaluate(static_cast<NodeId>(x));
    }

    void apply_lift(NodeId a) {
        const auto ai = static_cast<std::size_t>(a);
        const NodeId beta = parent_[ai];
        const auto bi = static_cast<std::size_t>(beta);
        const NodeId gamma = parent_[bi];
        const auto gi = static_cast<std::size_t>(gamma);
        const bool only_child = children_[bi].size() == 1;
        const double old_sibling_cut = sibling_cut_[ai];
        const auto edges = g_.edges();

        double to_gamma_level = 0.0;  // weight from T_a to T_gamma \ T_beta
        std::vector<NodeId> stack{a};
        while (!stack.empty()) {
            const NodeId x = stack.back();
            stack.pop_back();
            const auto xi = static_cast<std::size_t>(x);
            if (!is_leaf(x)) {
                stack.insert(stack.end(), children_[xi].begin(), children_[xi].end());
                continue;
            }
            --depth_count_[static_cast<std::size_t>(leaf_depth_[xi])];
            --leaf_depth_[xi];
            ++depth_count_[static_cast<std::size_t>(leaf_depth_[xi])];
            for (const auto& nb : g_.neighbors(static_cast<VertexId>(x))) {
                const auto e = nb.edge;
                const bool is_u = edges[e].u == static_cast<VertexId>(x);
                NodeId& mine = is_u ? top_u_[e] : top_v_[e];
                NodeId& theirs = is_u ? top_v_[e] : top_u_[e];
                if (lca_[e] == beta) {
                    sibling_cut_[static_cast<std::size_t>(theirs)] -= nb.weight;
                    lca_[e] = gamma;
                    mine = a;
                    theirs = beta;
                } else if (lca_[e] == gamma) {
                    mine = a;
                    to_gamma_level += nb.weight;
                }
            }
        }
        while (height_ > 0 && depth_count_[static_cast<std::size_t>(height_)] == 0)
            --height_;

        auto& siblings = children_[gi];
        auto pos = std::find(siblings.begin(), siblings.end(), beta);
        parent_[ai] = gamma;
        if (only_child) {
            *pos = a;
            children_[bi].clear();
            alive_[bi] = 0;
            sibling_cut_[ai] = to_gamma_level;
        } else {
            children_[bi].erase(std::find(children_[bi].begin(), children_[bi].end(), a));
            siblings.insert(pos + 1, a);
            const double old_beta_cut = cut_[bi];
            cut_[bi] = std::max(0.0, old_beta_cut - cut_[ai] + 2.0 * old_sibling_cut);
            volume_[bi] -= volume_[ai];
            children_cut_[bi] -= cut_[ai];
            children_cut_[gi] += cut_[ai] + cut_[bi] - old_beta_cut;
            sibling_cut_[ai] = old_sibling_cut + to_gamma_level;
            sibling_cut_[bi] = sibling_cut_[bi] - to_gamma_level + old_sibling_cut;
        }

        ++current_stamp_;
        auto touch = [&](NodeId x) {
            auto& s = stamp_[static_cast<std::size_t>(x)];
            if (s != current_stamp_) {
                s = current_stamp_;
                evaluate(x);
            }
        };
        touch(a);
        for (NodeId c : children_[ai])
            touch(c);
        if (!only_child) {
            touch(beta);
            for (NodeId c : children_[bi]) {
                touch(c);
                for (NodeId gc : children_[static_cast<std::size_t>(c)])
                    touch(gc);
            }
        }
        if (gamma != root_)
            for (NodeId c : children_[gi])
                touch(c);
    }

    const Graph& g_;
    TreeBuildOptions opt_;
    double vol_;
    NodeId root_;
    std::vector<NodeId> parent_;
    std::vector<double> volume_;
    std::vector<double> cut_;
    std::vector<char> alive_;
    std::vector<std::vector<NodeId>> children_;
    std::vector<std::size_t> item_of_;

    // lift-phase state
    std::vector<int> leaf_depth_;
    std::vector<std::size_t> depth_count_;
    int height_ = 0;
    std::vector<NodeId> lca_, top_u_, top_v_;  // per edge: LCA node and the LCA's child on each side
    std::vector<double> sibling_cut_;          // weight from T_x to the rest of T_parent(x)
    std::vector<double> children_cut_;         // sum of g over the children
    std::vector<std::uint32_t> version_;
    std::vector<std::uint32_t> stamp_;
    std::uint32_t current_stamp_ = 0;
    std::priority_queue<Candidate> heap_;
};

}  // namespace builder_detail

/// Greedy approximation of the minimum-entropy encoding tree of height <= K.
/// See TreeStrategy for the two procedures. The result never has higher entropy
/// than the single-level tree: if the greedy ends above it, that tree is returned.
inline OptimalTree build_optimal_tree(const Graph& g, const TreeBuildOptions& options = {}) {
    if (options.height < 2)
        throw ConfigError("tree height must be at least 2, got " + std::to_string(options.height));
    OptimalTree out;
    builder_detail::Builder b(g, options);
    if (options.strategy == TreeStrategy::merge_levels) {
        b.merge_levels(out.stats);
    } else {
        using builder_detail::Clock;
        auto start = Clock::now();
        b.wrap_components();
        b.combine_phase(out.stats);
        out.stats.ms_combine = builder_detail::ms_since(start);
        start = Clock::now();
        b.lift_phase(out.stats);
        out.stats.ms_lift = builder_detail::ms_since(start);
    }
    out.tree = b.finish();
    out.report = tree_entropy(g, out.tree);
    if (out.report.h_tree > out.report.h1 + kEntropyTolerance) {
        out.tree = EncodingTree::single_level(g);
        out.report = tree_entropy(g, out.tree);
        out.stats.fell_back_to_single_level = true;
    }
    return out;
}

}  // namespace segsl

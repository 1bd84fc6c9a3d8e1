#pragma once

#include <cmath>
#include <string>

#include "graph.hpp"

namespace segsl {

/// Absolute tolerance for every entropy comparison (bits).
inline constexpr double kEntropyTolerance = 1e-9;

/// Contribution -(g/vol) * log2(volume/parent_volume) of one tree node.
/// Nodes with zero cut contribute nothing, including zero-volume leaves of isolated vertices.
inline double node_entropy_term(double cut, double volume, double parent_volume, double total_volume) {
    if (cut <= 0.0 || volume <= 0.0 || parent_volume <= 0.0)
        return 0.0;
    return -(cut / total_volume) * std::log2(volume / parent_volume);
}

/// One-dimensional structural entropy -sum_v (d_v/vol) log2(d_v/vol).
inline double one_dim_entropy(const Graph& g) {
    const double vol = g.volume();
    double h = 0.0;
    for (std::size_t v = 0; v < g.num_vertices(); ++v) {
        const double d = g.degree(static_cast<VertexId>(v));
        if (d <= 0.0)
            throw DegenerateGraphError("vertex " + std::to_string(v) + " is isolated; one-dimensional entropy is undefined");
        const double p = d / vol;
        h -= p * std::log2(p);
    }
    return h;
}

/// Entropy gained (positive = entropy decreases) by inserting a parent above two
/// siblings whose parent has volume `parent_volume`; only the two children's terms
/// and the new node's term change, which collapses to 2*cut*log2(V_parent/V_new)/vol.
inline double combine_delta(double cut_between, double merged_volume, double parent_volume, double total_volume) {
    if (cut_between <= 0.0 || merged_volume <= 0.0)
        return 0.0;
    return 2.0 * cut_between * std::log2(parent_volume / merged_volume) / total_volume;
}

/// Inputs to the local lift delta: node a moves from parent b to grandparent c.
struct LiftTerms {
    double a_volume;
    double a_cut;
    double a_cut_to_siblings;  // weight between T_a and T_b \ T_a
    double b_volume;
    double b_cut;
    double b_children_cut_sum;  // sum of g over all children of b, a included
    double c_volume;
    bool a_is_only_child;
};

/// Entropy decrease of the lift. Changed terms: a (new parent volume), b (smaller
/// vertex set, or removed when emptied) and b's remaining children (smaller parent volume).
inline double lift_delta(const LiftTerms& t, double total_volume) {
    if (t.a_is_only_child)
        return 0.0;  // b has the same set as a; dropping it leaves every term's value unchanged
    const double vb_after = t.b_volume - t.a_volume;
    const double gb_after = t.b_cut - t.a_cut + 2.0 * t.a_cut_to_siblings;
    const double rest_cut = t.b_children_cut_sum - t.a_cut;
    const double before = node_entropy_term(t.a_cut, t.a_volume, t.b_volume, total_volume) +
                          node_entropy_term(t.b_cut, t.b_volume, t.c_volume, total_volume);
    double after = node_entropy_term(t.a_cut, t.a_volume, t.c_volume, total_volume) +
                   node_entropy_term(gb_after, vb_after, t.c_volume, total_volume);
    // Remaining children of b: each term drops by g_c' * log2(V_b / V_b') / vol.
    if (rest_cut > 0.0 && vb_after > 0.0)
        after -= (rest_cut / total_volume) * std::log2(t.b_volume / vb_after);
    return before - after;
}

}  // namespace segsl

#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "encoding_tree.hpp"
#include "io.hpp"

// Tree TSV
//   node_id<TAB>parent_id<TAB>vertex_or_dash     parent_id is -1 for the root
// Node ids are dense, 0..N-1, lines in any order.

namespace segsl {

inline void write_tree(std::ostream& out, const EncodingTree& tree) {
    const EncodingTree dense = tree.num_nodes() == tree.id_bound() ? tree : tree.compacted();
    out << "#node_id\tparent_id\tvertex\n";
    for (std::size_t i = 0; i < dense.id_bound(); ++i) {
        const auto& nd = dense.node(static_cast<NodeId>(i));
        out << i << '\t' << nd.parent << '\t';
        if (nd.is_leaf())
            out << nd.vertex;
        else
            out << '-';
        out << '\n';
    }
}

inline void save_tree(const std::filesystem::path& path, const EncodingTree& tree) {
    auto out = io_detail::open_output(path);
    write_tree(out, tree);
}

/// Reads a tree over `g`; caches are computed from the graph.
inline EncodingTree read_tree(std::istream& in, const Graph& g, const std::string& source = "<stream>") {
    using namespace io_detail;
    struct Row {
        NodeId parent;
        VertexId vertex;
        std::size_t line;
    };
    std::vector<std::pair<long long, Row>> rows;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto line = strip_cr(raw);
        if (is_blank(line) || line.front() == '#')
            continue;
        const auto fields = split_tabs(line);
        if (fields.size() != 3)
            throw ParseError(source, lineno, "expected 'node_id<TAB>parent_id<TAB>vertex_or_dash'");
        auto id = parse_number<long long>(fields[0]);
        auto parent = parse_number<long long>(fields[1]);
        if (!id || *id < 0 || *id > INT32_MAX)
            throw ParseError(source, lineno, "invalid node id '" + std::string(fields[0]) + "'");
        if (!parent || *parent < -1 || *parent > INT32_MAX)
            throw ParseError(source, lineno, "invalid parent id '" + std::string(fields[1]) + "'");
        VertexId vertex = -1;
        if (fields[2] != "-") {
            auto v = parse_number<long long>(fields[2]);
            if (!v || *v < 0 || *v > INT32_MAX)
                throw ParseError(source, lineno, "vertex must be a non-negative integer or '-'");
            vertex = static_cast<VertexId>(*v);
        }
        rows.push_back({*id, {static_cast<NodeId>(*parent), vertex, lineno}});
    }
    std::vector<NodeId> parent(rows.size(), kNoNode);
    std::vector<VertexId> vertex(rows.size(), -1);
    std::vector<std::size_t> seen(rows.size(), 0);
    for (const auto& [id, row] : rows) {
        if (static_cast<std::size_t>(id) >= rows.size())
            throw ParseError(source, row.line, "node id " + std::to_string(id) + " is not below the node count " +
                                                   std::to_string(rows.size()));
        const auto i = static_cast<std::size_t>(id);
        if (seen[i])
            throw ParseError(source, row.line, "node id " + std::to_string(id) + " already defined on line " +
                                                   std::to_string(seen[i]));
        seen[i] = row.line;
        parent[i] = row.parent;
        vertex[i] = row.vertex;
    }
    try {
        return EncodingTree::from_parents(g, parent, vertex);
    } catch (const ValidationError& e) {
        throw ValidationError(source + ": " + e.what());
    }
}

inline EncodingTree load_tree(const std::filesystem::path& path, const Graph& g) {
    auto in = io_detail::open_input(path);
    return read_tree(in, g, path.string());
}

/// Nested JSON: every node carries its id, V, g and entropy term; leaves add their vertex.
inline nlohmann::ordered_json tree_to_json(const Graph& g, const EncodingTree& tree) {
    const auto report = tree_entropy(g, tree);
    const auto order = tree.preorder();
    std::vector<nlohmann::ordered_json> built(tree.id_bound());
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const NodeId x = *it;
        const auto& nd = tree.node(x);
        nlohmann::ordered_json j;
        j["id"] = x;
        if (nd.is_leaf())
            j["vertex"] = nd.vertex;
        j["V"] = nd.volume;
        j["g"] = nd.cut;
        j["term"] = x == tree.root() ? 0.0 : report.per_node.at(x);
        if (!nd.is_leaf()) {
            auto children = nlohmann::ordered_json::array();
            for (NodeId c : nd.children)
                children.push_back(std::move(built[static_cast<std::size_t>(c)]));
            j["children"] = std::move(children);
        }
        built[static_cast<std::size_t>(x)] = std::move(j);
    }
    nlohmann::ordered_json doc;
    doc["h1"] = report.h1;
    doc["h_tree"] = report.h_tree;
    doc["normalized"] = report.normalized;
    doc["height"] = tree.height();
    doc["root"] = std::move(built[static_cast<std::size_t>(tree.root())]);
    return doc;
}

inline void save_tree_json(const std::filesystem::path& path, const Graph& g, const EncodingTree& tree) {
    auto out = io_detail::open_output(path);
    out << tree_to_json(g, tree).dump(1) << '\n';
}

}  // namespace segsl

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "graph.hpp"

// Edge-list TSV
//   u<TAB>v[<TAB>w][<TAB>#free text]     one undirected edge, w defaults to 1.0
//   # ...                                comment
//   #vertices<TAB>N                      optional vertex-count directive; lets graphs
//                                        with trailing isolated vertices round-trip
// Attribute TSV
//   id<TAB>f1<TAB>...<TAB>fd             one row per vertex, any order

namespace segsl {

namespace io_detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string_view strip_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r')
        s.remove_suffix(1);
    return s;
}

inline bool is_blank(std::string_view s) { return s.find_first_not_of(" \t") == std::string_view::npos; }

template <class T>
std::optional<T> parse_number(std::string_view s) {
    T value{};
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && s.front() == '+')
        ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || first == last)
        return std::nullopt;
    return value;
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError(path.string(), 0, "cannot open file");
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot open " + path.string() + " for writing");
    return out;
}

// Shortest text that parses back to the identical double.
inline std::string format_exact(double x) {
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, x);
        if (std::strtod(buf, nullptr) == x)
            break;
    }
    return buf;
}

}  // namespace io_detail

/// Reads an edge list. `source` names the input in error messages.
inline Graph read_edge_list(std::istream& in, const std::string& source = "<stream>") {
    using namespace io_detail;
    std::vector<Edge> edges;
    std::optional<std::size_t> declared_n;
    VertexId max_id = -1;
    std::map<std::pair<VertexId, VertexId>, std::size_t> seen;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto line = strip_cr(raw);
        if (is_blank(line))
            continue;
        if (line.front() == '#') {
            auto fields = split_tabs(line);
            if (fields[0] == "#vertices") {
                if (fields.size() != 2)
                    throw ParseError(source, lineno, "malformed #vertices directive");
                auto n = parse_number<long long>(fields[1]);
                if (!n || *n < 0)
                    throw ParseError(source, lineno, "invalid vertex count '" + std::string(fields[1]) + "'");
                declared_n = static_cast<std::size_t>(*n);
            }
            continue;
        }
        auto fields = split_tabs(line);
        if (fields.size() == 4 && !fields[3].empty() && fields[3].front() == '#')
            fields.pop_back();
        if (fields.size() < 2 || fields.size() > 3)
            throw ParseError(source, lineno, "expected 'u<TAB>v[<TAB>w]', got " + std::to_string(fields.size()) + " fields");
        auto u = parse_number<long long>(fields[0]);
        auto v = parse_number<long long>(fields[1]);
        if (!u || !v)
            throw ParseError(source, lineno, "vertex ids must be integers");
        if (*u < 0 || *v < 0 || *u > INT32_MAX - 1 || *v > INT32_MAX - 1)
            throw ParseError(source, lineno, "vertex id out of range");
        double w = 1.0;
        if (fields.size() == 3) {
            auto parsed = parse_number<double>(fields[2]);
            if (!parsed)
                throw ParseError(source, lineno, "weight '" + std::string(fields[2]) + "' is not a number");
            w = *parsed;
        }
        const auto a = static_cast<VertexId>(*u);
        const auto b = static_cast<VertexId>(*v);
        if (a == b)
            throw ValidationError(source + ":" + std::to_string(lineno) + ": self-loop on vertex " + std::to_string(a));
        if (!(w > 0.0) || !std::isfinite(w))
            throw ValidationError(source + ":" + std::to_string(lineno) + ": weight must be positive and finite");
        const auto key = a < b ? std::pair(a, b) : std::pair(b, a);
        if (auto [it, inserted] = seen.emplace(key, lineno); !inserted)
            throw ValidationError(source + ":" + std::to_string(lineno) + ": duplicate edge (" + std::to_string(key.first) +
                                  "," + std::to_string(key.second) + "), first seen on line " + std::to_string(it->second));
        max_id = std::max({max_id, a, b});
        edges.push_back({a, b, w});
    }
    const auto inferred = static_cast<std::size_t>(max_id + 1);
    if (declared_n && *declared_n < inferred)
        throw ValidationError(source + ": #vertices " + std::to_string(*declared_n) + " is smaller than the largest id + 1");
    return Graph(declared_n.value_or(inferred), std::move(edges));
}

inline Graph load_edge_list(const std::filesystem::path& path) {
    auto in = io_detail::open_input(path);
    return read_edge_list(in, path.string());
}

/// Writes the canonical edge list. Weights are printed with round-trip precision.
inline void write_edge_list(std::ostream& out, const Graph& g) {
    out << "#vertices\t" << g.num_vertices() << '\n';
    for (const auto& e : g.edges())
        out << e.u << '\t' << e.v << '\t' << io_detail::format_exact(e.w) << '\n';
}

inline void save_edge_list(const std::filesystem::path& path, const Graph& g) {
    auto out = io_detail::open_output(path);
    write_edge_list(out, g);
}

inline AttributeMatrix read_attributes(std::istream& in, const std::string& source = "<stream>") {
    using namespace io_detail;
    std::map<long long, std::pair<std::vector<double>, std::size_t>> rows;
    std::optional<std::size_t> width;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto line = strip_cr(raw);
        if (is_blank(line) || line.front() == '#')
            continue;
        auto fields = split_tabs(line);
        if (fields.size() < 2)
            throw ParseError(source, lineno, "expected 'id<TAB>f1...', got no features");
        auto id = parse_number<long long>(fields[0]);
        if (!id || *id < 0)
            throw ParseError(source, lineno, "invalid vertex id '" + std::string(fields[0]) + "'");
        const std::size_t d = fields.size() - 1;
        if (width && *width != d)
            throw ValidationError(source + ":" + std::to_string(lineno) + ": ragged row, " + std::to_string(d) +
                                  " features where previous rows have " + std::to_string(*width));
        width = d;
        std::vector<double> values(d);
        for (std::size_t j = 0; j < d; ++j) {
            auto x = parse_number<double>(fields[j + 1]);
            if (!x)
                throw ParseError(source, lineno, "feature " + std::to_string(j + 1) + " is not a number");
            if (!std::isfinite(*x))
                throw ValidationError(source + ":" + std::to_string(lineno) + ": non-finite feature value");
            values[j] = *x;
        }
        if (auto [it, inserted] = rows.emplace(*id, std::pair(std::move(values), lineno)); !inserted)
            throw ValidationError(source + ":" + std::to_string(lineno) + ": duplicate id " + std::to_string(*id) +
                                  ", first seen on line " + std::to_string(it->second.second));
    }
    if (rows.empty())
        throw ValidationError(source + ": no attribute rows");
    const std::size_t n = rows.size();
    std::vector<double> data;
    data.reserve(n * *width);
    long long expected = 0;
    for (auto& [id, row] : rows) {
        if (id != expected)
            throw ValidationError(source + ": missing id " + std::to_string(expected));
        data.insert(data.end(), row.first.begin(), row.first.end());
        ++expected;
    }
    return AttributeMatrix(n, *width, std::move(data));
}

inline AttributeMatrix load_attributes(const std::filesystem::path& path) {
    auto in = io_detail::open_input(path);
    return read_attributes(in, path.string());
}

inline void write_attributes(std::ostream& out, const AttributeMatrix& x) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
        out << i;
        for (double v : x.row(i))
            out << '\t' << io_detail::format_exact(v);
        out << '\n';
    }
}

inline void save_attributes(const std::filesystem::path& path, const AttributeMatrix& x) {
    auto out = io_detail::open_output(path);
    write_attributes(out, x);
}

/// Result of loading an edge list whose vertex ids are arbitrary strings.
struct RelabeledGraph {
    Graph graph;
    std::vector<std::string> names;  // names[i] is the original id of vertex i
};

/// Relabels string ids to 0..n-1 in order of first appearance.
inline RelabeledGraph read_labeled_edge_list(std::istream& in, const std::string& source = "<stream>") {
    using namespace io_detail;
    std::unordered_map<std::string, VertexId> index;
    std::vector<std::string> names;
    std::stringstream canonical;
    std::string raw;
    std::size_t lineno = 0;
    auto id_of = [&](std::string_view name) {
        auto [it, inserted] = index.emplace(std::string(name), static_cast<VertexId>(names.size()));
        if (inserted)
            names.emplace_back(name);
        return it->second;
    };
    // Rewrite to the integer format and reuse the strict parser; line numbers are preserved.
    while (std::getline(in, raw)) {
        ++lineno;
        const auto line = strip_cr(raw);
        if (is_blank(line) || line.front() == '#') {
            canonical << '\n';
            continue;
        }
        auto fields = split_tabs(line);
        if (fields.size() < 2)
            throw ParseError(source, lineno, "expected 'u<TAB>v[<TAB>w]'");
        canonical << id_of(fields[0]) << '\t' << id_of(fields[1]);
        for (std::size_t i = 2; i < fields.size(); ++i)
            canonical << '\t' << fields[i];
        canonical << '\n';
    }
    auto g = read_edge_list(canonical, source);
    if (g.num_vertices() != names.size())
        g = Graph(names.size(), std::vector<Edge>(g.edges().begin(), g.edges().end()));
    return {std::move(g), std::move(names)};
}

/// Mapping file: "new_id<TAB>original_id" per line.
inline void save_relabel_mapping(const std::filesystem::path& path, const std::vector<std::string>& names) {
    auto out = io_detail::open_output(path);
    for (std::size_t i = 0; i < names.size(); ++i)
        out << i << '\t' << names[i] << '\n';
}

}  // namespace segsl

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "segsl/segsl.hpp"

namespace {

using namespace segsl;

enum Exit { kOk = 0, kUsage = 1, kInput = 2, kRuntime = 3 };

void print_value(const char* key, double value) { std::printf("%s\t%.9f\n", key, value); }

void print_count(const char* key, std::size_t value) { std::printf("%s\t%zu\n", key, value); }

Graph load_graph_with_attributes(const std::string& graph, const std::string& attrs) {
    Graph g = load_edge_list(graph);
    if (attrs.empty())
        return g;
    AttributeMatrix x = load_attributes(attrs);
    if (x.rows() != g.num_vertices())
        throw ValidationError(attrs + ": " + std::to_string(x.rows()) + " attribute rows, but " + graph + " has " +
                              std::to_string(g.num_vertices()) + " vertices");
    return g.with_attributes(std::move(x));
}

TreeStrategy parse_strategy(const std::string& s) {
    if (s == "merge")
        return TreeStrategy::merge_levels;
    if (s == "literal")
        return TreeStrategy::combine_then_lift;
    throw ConfigError("--strategy: expected 'merge' or 'literal', got '" + s + "'");
}

void echo_config(const CLI::App& sub) {
    std::cerr << "# segsl " << sub.get_name() << '\n' << sub.config_to_str(true, false);
}

int classify(const std::exception& e) {
    if (dynamic_cast<const IterationError*>(&e)) {
        try {
            static_cast<const IterationError&>(e).rethrow_cause();
        } catch (const std::exception& cause) {
            return classify(cause);
        }
    }
    if (dynamic_cast<const ConfigError*>(&e))
        return kUsage;
    if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
        dynamic_cast<const DegenerateGraphError*>(&e))
        return kInput;
    return kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structural-entropy graph structure learning"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    // entropy
    std::string graph_path, tree_path, attrs_path, out_path, json_path, sampled_path, strategy = "merge";
    auto* entropy = app.add_subcommand("entropy", "One-dimensional entropy, and tree entropy with --tree");
    entropy->add_option("--graph", graph_path, "edge list")->required()->check(CLI::ExistingFile);
    entropy->add_option("--tree", tree_path, "tree TSV over the same graph")->check(CLI::ExistingFile);

    // tree
    int height = 2;
    bool force_binary = false;
    auto* tree = app.add_subcommand("tree", "Build a low-entropy encoding tree of bounded height");
    tree->add_option("--graph", graph_path, "edge list")->required()->check(CLI::ExistingFile);
    tree->add_option("--height", height, "maximum tree height K (>= 2)")->capture_default_str();
    tree->add_option("--strategy", strategy, "merge or literal")->capture_default_str();
    tree->add_flag("--force-binary", force_binary, "literal strategy: combine down to two root children");
    tree->add_option("--out", out_path, "tree TSV output")->required();
    tree->add_option("--json", json_path, "JSON output (default: --out with .json)");

    // fuse
    KSelectOptions ks;
    SimilarityOptions sim;
    std::string trace_path;
    auto* fuse = app.add_subcommand("fuse", "Fuse the graph with a similarity k-NN graph, choosing k by entropy");
    fuse->add_option("--graph", graph_path, "edge list")->required()->check(CLI::ExistingFile);
    fuse->add_option("--attrs", attrs_path, "attribute TSV")->required()->check(CLI::ExistingFile);
    fuse->add_option("--k-max", ks.k_max, "largest k probed (0: min(n-1,100))")->capture_default_str();
    fuse->add_option("--plateau-tol", ks.plateau_tol, "relative H1 gain counted as flat")->capture_default_str();
    fuse->add_option("--window", ks.window, "flat increments required")->capture_default_str();
    fuse->add_option("--max-vertices", sim.max_vertices, "similarity matrix size guard")->capture_default_str();
    fuse->add_option("--out", out_path, "fused edge list output")->required();
    fuse->add_option("--trace", trace_path, "k,H1 table output");

    // reconstruct
    double theta = 3.0;
    std::uint64_t seed = 0;
    bool retain = false;
    std::optional<double> drop_frac;
    auto* recon = app.add_subcommand("reconstruct", "Sample edges from an encoding tree and rebuild the graph");
    recon->add_option("--graph", graph_path, "edge list the tree was built over")->required()->check(CLI::ExistingFile);
    recon->add_option("--tree", tree_path, "tree TSV")->required()->check(CLI::ExistingFile);
    recon->add_option("--theta", theta, "samples per child of each subtree root")->capture_default_str();
    recon->add_option("--seed", seed, "random seed")->required();
    recon->add_flag("--retain", retain, "keep the input edges, then drop the least similar");
    recon->add_option("--drop-frac", drop_frac, "with --retain: fraction dropped (default: back to the input size)");
    recon->add_option("--attrs", attrs_path, "attribute TSV (similarities for --retain)")->check(CLI::ExistingFile);
    recon->add_option("--out", out_path, "output edge list")->required();
    recon->add_option("--sampled", sampled_path, "also write the sampled pairs with provenance");

    // pipeline
    std::string config_path;
    KeyValueConfig overrides;
    auto* pipe = app.add_subcommand("pipeline", "Run the iterative structure optimization");
    pipe->add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    for (const auto& key : pipeline_config_keys()) {
        std::string flag = "--" + key;
        for (auto& c : flag)
            if (c == '_')
                c = '-';
        pipe->add_option_function<std::string>(
            flag, [key, &overrides](const std::string& v) { overrides.set(key, v); }, "overrides '" + key + "'");
    }

    // perturb
    double rate = 0.0;
    auto* pert = app.add_subcommand("perturb", "Add random non-edges");
    pert->add_option("--graph", graph_path, "edge list")->required()->check(CLI::ExistingFile);
    pert->add_option("--rate", rate, "added edges as a fraction of |E|")->required();
    pert->add_option("--seed", seed, "random seed")->required();
    pert->add_option("--out", out_path, "output edge list")->required();

    // sbm
    std::size_t n = 0, blocks = 2, dims = 0;
    double p_in = 0.0, p_out = 0.0, separation = 1.0;
    std::string labels_path;
    auto* sbm = app.add_subcommand("sbm", "Generate a stochastic block model graph");
    sbm->add_option("--n", n, "vertex count")->required();
    sbm->add_option("--blocks", blocks, "block count (divides n)")->capture_default_str();
    sbm->add_option("--p-in", p_in, "intra-block edge probability")->required();
    sbm->add_option("--p-out", p_out, "inter-block edge probability")->required();
    sbm->add_option("--seed", seed, "random seed")->required();
    sbm->add_option("--out", out_path, "output edge list")->required();
    sbm->add_option("--labels", labels_path, "planted labels output (id<TAB>block)");
    sbm->add_option("--features", attrs_path, "planted Gaussian features output");
    sbm->add_option("--dims", dims, "feature dimensions (default: 2 * blocks)");
    sbm->add_option("--separation", separation, "feature mean offset of a vertex's own block")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*entropy) {
            echo_config(*entropy);
            const Graph g = load_edge_list(graph_path);
            print_value("H1", one_dim_entropy(g));
            if (!tree_path.empty()) {
                const auto report = tree_entropy(g, load_tree(tree_path, g));
                print_value("HT", report.h_tree);
                print_value("normalized", report.normalized);
            }
        } else if (*tree) {
            echo_config(*tree);
            const Graph g = load_edge_list(graph_path);
            TreeBuildOptions opt;
            opt.height = height;
            opt.strategy = parse_strategy(strategy);
            opt.force_binary = force_binary;
            const auto built = build_optimal_tree(g, opt);
            save_tree(out_path, built.tree);
            save_tree_json(json_path.empty() ? std::filesystem::path(out_path).replace_extension(".json")
                                             : std::filesystem::path(json_path),
                           g, built.tree);
            print_value("H1", built.report.h1);
            print_value("HT", built.report.h_tree);
            print_value("normalized", built.report.normalized);
            print_count("height", static_cast<std::size_t>(built.tree.height()));
        } else if (*fuse) {
            echo_config(*fuse);
            const Graph g = load_graph_with_attributes(graph_path, attrs_path);
            const auto fused = select_k(g, pcc_similarity(g.attributes(), sim), ks);
            save_edge_list(out_path, fused.fused);
            if (!trace_path.empty()) {
                auto out = io_detail::open_output(trace_path);
                out << "k\tH1\n";
                char buf[64];
                for (const auto& [k, h] : fused.h1_trace) {
                    std::snprintf(buf, sizeof buf, "%zu\t%.9f\n", k, h);
                    out << buf;
                }
            }
            print_count("k", fused.k_selected);
            print_value("M", fused.modification);
            print_value("H1", one_dim_entropy(fused.fused));
            print_count("edges", fused.fused.num_edges());
        } else if (*recon) {
            echo_config(*recon);
            if (retain && attrs_path.empty())
                throw ConfigError("--retain needs --attrs to rank edges by similarity");
            const Graph g = load_graph_with_attributes(graph_path, attrs_path);
            const EncodingTree t = load_tree(tree_path, g);
            const auto sampled = sample_edges(annotate_probabilities(g, t), theta, seed);
            const SimilarityMatrix s = g.has_attributes() ? pcc_similarity(g.attributes()) : SimilarityMatrix{};
            ReconstructOptions ropt;
            ropt.retain = retain;
            ropt.drop_frac = drop_frac;
            const Graph out = reconstruct(g, sampled, s, ropt);
            save_edge_list(out_path, out);
            if (!sampled_path.empty())
                save_sampled_edges(sampled_path, sampled);
            print_count("sampled", sampled.pairs.size());
            print_count("edges", out.num_edges());
        } else if (*pipe) {
            KeyValueConfig kv = config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_path);
            for (const auto& [key, entry] : overrides.entries())
                kv.set(key, entry.value);
            const PipelineConfig cfg = pipeline_config_from(kv);
            std::cerr << "# segsl pipeline\n"
                      << "graph = " << kv.get_string("graph").value_or("") << '\n'
                      << "attributes = " << kv.get_string("attributes").value_or("") << '\n'
                      << describe_config(cfg);
            if (!cfg.seed) {
                std::cerr << "error: a seed is required (--seed or 'seed' in the config file)\n";
                return kUsage;
            }
            const auto graph = kv.get_string("graph");
            const auto attrs = kv.get_string("attributes");
            if (!graph || !attrs) {
                std::cerr << "error: 'graph' and 'attributes' must be given (config file or --graph/--attributes)\n";
                return kUsage;
            }
            const Graph g0 = load_graph_with_attributes(*graph, *attrs);
            const auto result = run_pipeline(cfg, g0, [](const TraceRecord& r) {
                std::cerr << "iteration " << r.iteration << ": " << format_trace_row(r) << '\n';
            });
            print_count("iterations", result.trace.size());
            print_count("edges", result.graph.num_edges());
            if (!result.trace.empty())
                print_value("normalized", result.trace.back().normalized);
        } else if (*pert) {
            echo_config(*pert);
            const Graph g = load_edge_list(graph_path);
            const Graph out = perturb(g, rate, seed);
            save_edge_list(out_path, out);
            print_count("added", out.num_edges() - g.num_edges());
            print_count("edges", out.num_edges());
        } else if (*sbm) {
            echo_config(*sbm);
            const auto made = generate_sbm(n, blocks, p_in, p_out, seed);
            save_edge_list(out_path, made.graph);
            if (!labels_path.empty()) {
                auto out = io_detail::open_output(labels_path);
                for (std::size_t v = 0; v < made.labels.size(); ++v)
                    out << v << '\t' << made.labels[v] << '\n';
            }
            if (!attrs_path.empty())
                save_attributes(attrs_path, planted_features(made.labels, dims == 0 ? 2 * blocks : dims, separation,
                                                             derive_seed(seed, 1)));
            print_count("edges", made.graph.num_edges());
            print_count("connected", made.connected ? 1 : 0);
            if (made.empty)
                log_warning("the generated graph has no edges");
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return classify(e);
    }
    return kOk;
}

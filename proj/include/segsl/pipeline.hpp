#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "config.hpp"
#include "io.hpp"
#include "reconstruction.hpp"
#include "similarity.hpp"
#include "tree_builder.hpp"
#include "tree_io.hpp"

namespace segsl {

enum class ProviderKind { identity, smoothing, external };

struct ProviderSpec {
    ProviderKind kind = ProviderKind::identity;
    int smoothing_steps = 1;
    std::string command;         // external: run through /bin/sh with the work dir as $1
    double timeout_seconds = 600.0;
};

// ---- embedding providers ------------------------------------------------------------

/// `steps` rounds of x <- RowNormalize(A + I) x with the graph's edge weights.
inline AttributeMatrix smooth_features(const Graph& g, const AttributeMatrix& x, int steps) {
    if (steps < 0)
        throw ConfigError("smoothing steps must be >= 0");
    if (x.rows() != g.num_vertices())
        throw ValidationError("feature rows (" + std::to_string(x.rows()) + ") do not match the vertex count (" +
                              std::to_string(g.num_vertices()) + ")");
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    std::vector<double> cur(x.data());
    std::vector<double> next(n * d);
    for (int s = 0; s < steps; ++s) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = static_cast<VertexId>(i);
            const double norm = 1.0 + g.degree(v);
            double* out = next.data() + i * d;
            for (std::size_t j = 0; j < d; ++j)
                out[j] = cur[i * d + j];
            for (const auto& nb : g.neighbors(v)) {
                const double* src = cur.data() + static_cast<std::size_t>(nb.vertex) * d;
                for (std::size_t j = 0; j < d; ++j)
                    out[j] += nb.weight * src[j];
            }
            for (std::size_t j = 0; j < d; ++j)
                out[j] /= norm;
        }
        cur.swap(next);
    }
    return AttributeMatrix(n, d, std::move(cur));
}

namespace pipeline_detail {

// Runs `/bin/sh -c '<command> "$1"' sh <arg>`; returns the exit status, or throws on
// timeout (the whole process group is killed).
inline int run_command(const std::string& command, const std::string& arg, double timeout_seconds) {
    const std::string script = command + " \"$1\"";
    const pid_t pid = fork();
    if (pid < 0)
        throw ProviderError("fork failed");
    if (pid == 0) {
        setpgid(0, 0);
        execl("/bin/sh", "sh", "-c", script.c_str(), "sh", arg.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    setpgid(pid, pid);
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
    int status = 0;
    while (true) {
        const pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid)
            break;
        if (r < 0)
            throw ProviderError("waitpid failed");
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            waitpid(pid, &status, 0);
            throw ProviderError("provider command timed out after " + std::to_string(timeout_seconds) + " s");
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (WIFEXITED(status))
        return WEXITSTATUS(status);
    return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
}

inline std::filesystem::path fresh_directory(const std::filesystem::path& path) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
    return path;
}

}  // namespace pipeline_detail

/// External provider protocol: writes graph.tsv, features.tsv and meta.tsv
/// ("iteration<TAB>i<TAB>n<TAB>d") into `work_dir`, runs the command with the work dir
/// as its only argument, and reads embeddings.tsv (n rows, ids 0..n-1, d' >= 1).
inline AttributeMatrix run_external_provider(const ProviderSpec& spec, const Graph& g, const AttributeMatrix& x,
                                             int iteration, const std::filesystem::path& work_dir) {
    if (spec.command.empty())
        throw ConfigError("external provider needs a command");
    if (!(spec.timeout_seconds > 0.0))
        throw ConfigError("provider timeout must be positive");
    pipeline_detail::fresh_directory(work_dir);
    save_edge_list(work_dir / "graph.tsv", g);
    save_attributes(work_dir / "features.tsv", x);
    {
        auto meta = io_detail::open_output(work_dir / "meta.tsv");
        meta << "iteration\t" << iteration << '\t' << x.rows() << '\t' << x.cols() << '\n';
    }
    const int status = pipeline_detail::run_command(spec.command, work_dir.string(), spec.timeout_seconds);
    if (status != 0)
        throw ProviderError("provider command exited with status " + std::to_string(status) + " (work dir " +
                            work_dir.string() + ")");
    const auto out_path = work_dir / "embeddings.tsv";
    if (!std::filesystem::exists(out_path))
        throw ProviderError("provider did not write " + out_path.string());
    AttributeMatrix e;
    try {
        e = load_attributes(out_path);
    } catch (const Error& err) {
        throw ProviderError(std::string("malformed embeddings: ") + err.what());
    }
    if (e.rows() != g.num_vertices())
        throw ProviderError(out_path.string() + ": " + std::to_string(e.rows()) + " rows, expected " +
                            std::to_string(g.num_vertices()));
    return e;
}

// ---- configuration ------------------------------------------------------------------

struct PipelineConfig {
    int iterations = 1;
    std::vector<int> heights{2, 3, 4};  // the tree with the lowest entropy over these is used
    TreeStrategy strategy = TreeStrategy::merge_levels;
    double theta = 3.0;
    std::vector<double> theta_by_depth;
    std::optional<std::uint64_t> seed;
    ProviderSpec provider;
    bool retain = false;
    std::optional<double> drop_frac;
    bool reset_features = false;  // feed raw attributes to every iteration instead of the last embeddings
    KSelectOptions kselect;
    SimilarityOptions similarity;
    std::filesystem::path output_dir;  // empty: nothing written
    std::filesystem::path work_dir;    // external provider scratch; default output_dir/work

    void validate() const {
        if (iterations < 0)
            throw ConfigError("iterations must be >= 0");
        if (heights.empty())
            throw ConfigError("height needs at least one value");
        for (int k : heights)
            if (k < 2)
                throw ConfigError("tree height must be at least 2, got " + std::to_string(k));
        reconstruction_detail::check_theta(theta);
        for (double t : theta_by_depth)
            reconstruction_detail::check_theta(t);
        if (!seed)
            throw ConfigError("seed is required");
        if (provider.kind == ProviderKind::external && provider.command.empty())
            throw ConfigError("provider = external needs provider_command");
        if (provider.smoothing_steps < 0)
            throw ConfigError("smoothing_steps must be >= 0");
        if (!(provider.timeout_seconds > 0.0))
            throw ConfigError("provider_timeout must be positive");
        if (drop_frac && !retain)
            throw ConfigError("drop_frac only applies together with retain");
        if (drop_frac && !(*drop_frac >= 0.0 && *drop_frac <= 1.0))
            throw ConfigError("drop_frac must lie in [0, 1]");
        if (!(kselect.plateau_tol > 0.0))
            throw ConfigError("plateau_tol must be positive");
        if (kselect.window < 1)
            throw ConfigError("window must be at least 1");
    }
};

inline const std::vector<std::string>& pipeline_config_keys() {
    static const std::vector<std::string> keys{
        "graph",          "attributes",    "output",           "work_dir",      "iterations",  "height",
        "strategy",       "theta",         "theta_by_depth",   "seed",          "provider",    "smoothing_steps",
        "provider_command", "provider_timeout", "retain",      "drop_frac",     "reset_features", "k_max",
        "plateau_tol",    "window",        "max_vertices"};
    return keys;
}

inline PipelineConfig pipeline_config_from(const KeyValueConfig& kv) {
    kv.check_keys(pipeline_config_keys());
    PipelineConfig cfg;
    if (auto v = kv.get_int("iterations"))
        cfg.iterations = static_cast<int>(*v);
    if (auto v = kv.get_list<int>("height"))
        cfg.heights = *v;
    if (auto v = kv.get_string("strategy")) {
        if (*v == "merge")
            cfg.strategy = TreeStrategy::merge_levels;
        else if (*v == "literal")
            cfg.strategy = TreeStrategy::combine_then_lift;
        else
            throw ConfigError(kv.describe("strategy") + ": expected 'merge' or 'literal', got '" + *v + "'");
    }
    if (auto v = kv.get_double("theta"))
        cfg.theta = *v;
    if (auto v = kv.get_list<double>("theta_by_depth"))
        cfg.theta_by_depth = *v;
    if (auto v = kv.get_uint64("seed"))
        cfg.seed = *v;
    if (auto v = kv.get_string("provider")) {
        if (*v == "identity")
            cfg.provider.kind = ProviderKind::identity;
        else if (*v == "smoothing")
            cfg.provider.kind = ProviderKind::smoothing;
        else if (*v == "external")
            cfg.provider.kind = ProviderKind::external;
        else
            throw ConfigError(kv.describe("provider") + ": expected identity, smoothing or external, got '" + *v + "'");
    }
    if (auto v = kv.get_int("smoothing_steps"))
        cfg.provider.smoothing_steps = static_cast<int>(*v);
    if (auto v = kv.get_string("provider_command"))
        cfg.provider.command = *v;
    if (auto v = kv.get_double("provider_timeout"))
        cfg.provider.timeout_seconds = *v;
    if (auto v = kv.get_bool("retain"))
        cfg.retain = *v;
    if (auto v = kv.get_double("drop_frac"))
        cfg.drop_frac = *v;
    if (auto v = kv.get_bool("reset_features"))
        cfg.reset_features = *v;
    if (auto v = kv.get_int("k_max")) {
        if (*v < 0)
            throw ConfigError(kv.describe("k_max") + ": must be >= 0");
        cfg.kselect.k_max = static_cast<std::size_t>(*v);
    }
    if (auto v = kv.get_double("plateau_tol"))
        cfg.kselect.plateau_tol = *v;
    if (auto v = kv.get_int("window")) {
        if (*v < 1)
            throw ConfigError(kv.describe("window") + ": must be >= 1");
        cfg.kselect.window = static_cast<std::size_t>(*v);
    }
    if (auto v = kv.get_int("max_vertices")) {
        if (*v < 2)
            throw ConfigError(kv.describe("max_vertices") + ": must be >= 2");
        cfg.similarity.max_vertices = static_cast<std::size_t>(*v);
    }
    if (auto v = kv.get_string("output"))
        cfg.output_dir = *v;
    if (auto v = kv.get_string("work_dir"))
        cfg.work_dir = *v;
    return cfg;
}

/// Every setting, defaults included, as "key = value" lines.
inline std::string describe_config(const PipelineConfig& cfg) {
    auto join = [](const auto& xs) {
        std::string s;
        for (const auto& x : xs) {
            if (!s.empty())
                s += ',';
            if constexpr (std::is_floating_point_v<std::decay_t<decltype(x)>>)
                s += io_detail::format_exact(x);
            else
                s += std::to_string(x);
        }
        return s;
    };
    const char* provider = cfg.provider.kind == ProviderKind::identity    ? "identity"
                           : cfg.provider.kind == ProviderKind::smoothing ? "smoothing"
                                                                          : "external";
    std::string out;
    auto line = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
    line("iterations", std::to_string(cfg.iterations));
    line("height", join(cfg.heights));
    line("strategy", cfg.strategy == TreeStrategy::merge_levels ? "merge" : "literal");
    line("theta", io_detail::format_exact(cfg.theta));
    line("theta_by_depth", join(cfg.theta_by_depth));
    line("seed", cfg.seed ? std::to_string(*cfg.seed) : "(unset)");
    line("provider", provider);
    line("smoothing_steps", std::to_string(cfg.provider.smoothing_steps));
    line("provider_command", cfg.provider.command);
    line("provider_timeout", io_detail::format_exact(cfg.provider.timeout_seconds));
    line("retain", cfg.retain ? "true" : "false");
    line("drop_frac", cfg.drop_frac ? io_detail::format_exact(*cfg.drop_frac) : "(auto)");
    line("reset_features", cfg.reset_features ? "true" : "false");
    line("k_max", cfg.kselect.k_max == 0 ? "0 (min(n-1,100))" : std::to_string(cfg.kselect.k_max));
    line("plateau_tol", io_detail::format_exact(cfg.kselect.plateau_tol));
    line("window", std::to_string(cfg.kselect.window));
    line("max_vertices", std::to_string(cfg.similarity.max_vertices));
    line("output", cfg.output_dir.string());
    line("work_dir", cfg.work_dir.string());
    return out;
}

// ---- the loop -----------------------------------------------------------------------

struct TraceRecord {
    int iteration = 0;
    std::size_t k = 0;
    double h1 = 0.0;       // of the fused graph
    double h_tree = 0.0;   // of the chosen tree on the fused graph
    double normalized = 0.0;
    std::size_t edges = 0;  // of the reconstructed graph
    int height = 0;         // K of the chosen tree
    double ms_fusion = 0.0;  // embedding, similarity and k selection
    double ms_tree = 0.0;
    double ms_sample = 0.0;  // sampling and reconstruction
};

inline constexpr const char* kTraceHeader = "iter,k,H1,HT,normalized,edges,ms_fusion,ms_tree,ms_sample";

inline std::string format_trace_row(const TraceRecord& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d,%zu,%.9f,%.9f,%.9f,%zu,%.3f,%.3f,%.3f", r.iteration, r.k, r.h1, r.h_tree,
                  r.normalized, r.edges, r.ms_fusion, r.ms_tree, r.ms_sample);
    return buf;
}

inline void write_trace(const std::filesystem::path& path, const std::vector<TraceRecord>& trace) {
    auto out = io_detail::open_output(path);
    out << kTraceHeader << '\n';
    for (const auto& r : trace)
        out << format_trace_row(r) << '\n';
}

/// A stage failed; carries the 1-based iteration and the original exception.
class IterationError : public Error {
public:
    IterationError(int iteration, std::exception_ptr cause, const std::string& what)
        : Error("iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration), cause_(std::move(cause)) {}
    int iteration() const noexcept { return iteration_; }
    [[noreturn]] void rethrow_cause() const { std::rethrow_exception(cause_); }

private:
    int iteration_;
    std::exception_ptr cause_;
};

struct PipelineResult {
    Graph graph;
    std::vector<TraceRecord> trace;
};

/// Optional per-iteration callback, e.g. for progress output.
using IterationObserver = std::function<void(const TraceRecord&)>;

/// Iterated structure optimization. `g0` must carry attributes. With an output
/// directory, trace.csv is rewritten after every iteration (so a failed run leaves the
/// completed part) together with graph_iter_<i>.tsv and tree_iter_<i>.tsv.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, const Graph& g0, const IterationObserver& observe = {}) {
    cfg.validate();
    if (!g0.has_attributes())
        throw ValidationError("the input graph has no attributes");
    using Clock = std::chrono::steady_clock;
    auto ms = [](Clock::time_point a, Clock::time_point b) { return std::chrono::duration<double, std::milli>(b - a).count(); };
    const bool writing = !cfg.output_dir.empty();
    if (writing)
        std::filesystem::create_directories(cfg.output_dir);
    const std::filesystem::path work_root =
        !cfg.work_dir.empty() ? cfg.work_dir : (writing ? cfg.output_dir / "work" : std::filesystem::temp_directory_path() / ("segsl_work_" + std::to_string(getpid())));

    PipelineResult result{g0, {}};
    AttributeMatrix x = g0.attributes();
    for (int i = 1; i <= cfg.iterations; ++i) {
        try {
            TraceRecord rec;
            rec.iteration = i;
            const Graph& g = result.graph;
            auto t0 = Clock::now();
            const AttributeMatrix input = cfg.reset_features ? g0.attributes() : x;
            AttributeMatrix emb;
            switch (cfg.provider.kind) {
                case ProviderKind::identity:
                    emb = input;
                    break;
                case ProviderKind::smoothing:
                    emb = smooth_features(g, input, cfg.provider.smoothing_steps);
                    break;
                case ProviderKind::external:
                    emb = run_external_provider(cfg.provider, g, input, i, work_root / ("iter_" + std::to_string(i)));
                    break;
            }
            const SimilarityMatrix s = pcc_similarity(emb, cfg.similarity);
            FusionResult fusion = select_k(g, s, cfg.kselect);
            rec.k = fusion.k_selected;
            auto t1 = Clock::now();

            std::optional<OptimalTree> best;
            for (int k : cfg.heights) {
                TreeBuildOptions opt;
                opt.height = k;
                opt.strategy = cfg.strategy;
                auto built = build_optimal_tree(fusion.fused, opt);
                if (!best || built.report.h_tree < best->report.h_tree - kEntropyTolerance) {
                    best = std::move(built);
                    rec.height = k;
                }
            }
            rec.h1 = best->report.h1;
            rec.h_tree = best->report.h_tree;
            rec.normalized = best->report.normalized;
            auto t2 = Clock::now();

            const auto annotated = annotate_probabilities(fusion.fused, best->tree);
            SamplingOptions sopt;
            sopt.theta_by_depth = cfg.theta_by_depth;
            const auto sampled = sample_edges(annotated, cfg.theta, derive_seed(*cfg.seed, static_cast<std::uint64_t>(i)), sopt);
            ReconstructOptions ropt;
            ropt.retain = cfg.retain;
            ropt.drop_frac = cfg.drop_frac;
            Graph next = reconstruct(g, sampled, s, ropt);
            auto t3 = Clock::now();

            rec.edges = next.num_edges();
            rec.ms_fusion = ms(t0, t1);
            rec.ms_tree = ms(t1, t2);
            rec.ms_sample = ms(t2, t3);
            if (writing) {
                save_edge_list(cfg.output_dir / ("graph_iter_" + std::to_string(i) + ".tsv"), next);
                save_tree(cfg.output_dir / ("tree_iter_" + std::to_string(i) + ".tsv"), best->tree);
            }
            result.graph = std::move(next);
            x = std::move(emb);
            result.trace.push_back(rec);
            if (writing)
                write_trace(cfg.output_dir / "trace.csv", result.trace);
            if (observe)
                observe(rec);
        } catch (const std::exception& e) {
            if (writing)
                write_trace(cfg.output_dir / "trace.csv", result.trace);
            throw IterationError(i, std::current_exception(), e.what());
        }
    }
    if (writing && cfg.iterations == 0)
        write_trace(cfg.output_dir / "trace.csv", result.trace);
    return result;
}

}  // namespace segsl

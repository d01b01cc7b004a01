// Command-line front end: run, ablate, plot, prepare-data.

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "ogcil/config.hpp"
#include "ogcil/dataset.hpp"
#include "ogcil/report.hpp"
#include "ogcil/runtime.hpp"

namespace fs = std::filesystem;
using namespace ogcil;

namespace {

constexpr int kValidationFailure = 1;
constexpr int kRuntimeFailure = 2;

fs::path resolve_output(const RunConfig& cfg, const std::string& flag, const fs::path& config_path) {
    if (!flag.empty()) return flag;
    const char* root = std::getenv("OGCIL_OUTPUT_ROOT");
    if (!cfg.output_dir.empty()) {
        if (cfg.output_dir.is_absolute() || root == nullptr) return cfg.output_dir;
        return fs::path(root) / cfg.output_dir;
    }
    return fs::path(root ? root : "runs") / config_path.stem();
}

void print_tasks(const RunReport& r) {
    for (const auto& t : r.tasks)
        fmt::print("{} seed {} task {}: OSCR {:.4f}  ACC {:.4f}  AUC {:.4f}  ({} known, {} unknown test nodes)\n",
                   r.method + (r.ablation == "none" ? "" : "/" + r.ablation), r.seed, t.task_index, t.oscr,
                   t.closed_acc, t.auc, t.num_known, t.num_unknown);
}

std::string label_of(const EngineConfig& e) {
    return e.ablation == Ablation::none ? "ogcil" : "ogcil-" + to_string(e.ablation);
}

std::vector<RunReport> run_all(const Graph& g, const RunConfig& cfg, const EngineConfig& base, const fs::path& out) {
    std::vector<RunReport> reports;
    for (auto seed : cfg.seeds) {
        EngineConfig e = base;
        e.seed = seed;
        const fs::path dir = out / label_of(e) / fmt::format("seed_{}", seed);
        auto report = run_sequence(g, cfg.layout, e, [&](const TaskSpec& t, const ModelState& s) {
            save_checkpoint(dir / "checkpoints" / fmt::format("task_{}.ckpt", t.task_index), s);
        });
        write_report(dir, report);
        print_tasks(report);
        reports.push_back(std::move(report));
    }
    return reports;
}

void print_summary(const std::string& name, const std::vector<RunReport>& runs) {
    const auto s = summarize_runs(runs);
    fmt::print("{} over {} seed(s): OSCR {:.4f} ± {:.4f}  ACC {:.4f} ± {:.4f}  AUC {:.4f} ± {:.4f}\n", name, s.runs,
               s.oscr.mean, s.oscr.stddev, s.acc.mean, s.acc.stddev, s.auc.mean, s.auc.stddev);
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

int cmd_run(const fs::path& config_path, const std::string& output_flag) {
    const RunConfig cfg = load_run_config(config_path);
    const fs::path out = resolve_output(cfg, output_flag, config_path);
    const Graph g = load_graph(cfg);
    fs::create_directories(out);
    write_file(out / "config.json", run_config_to_json(cfg).dump(2) + "\n");

    nlohmann::ordered_json summary;
    const auto runs = run_all(g, cfg, cfg.engine, out);
    print_summary(label_of(cfg.engine), runs);
    summary[label_of(cfg.engine)] = summary_to_json(summarize_runs(runs));
    if (cfg.baseline) {
        std::vector<RunReport> base;
        for (auto seed : cfg.seeds) {
            auto r = softmax_threshold_baseline(g, cfg.layout, engine_for_seed(cfg, seed));
            write_report(out / "softmax-baseline" / fmt::format("seed_{}", seed), r);
            print_tasks(r);
            base.push_back(std::move(r));
        }
        print_summary("softmax-baseline", base);
        summary["softmax-baseline"] = summary_to_json(summarize_runs(base));
        const auto table = comparison_table("ogcil", runs, "baseline", base);
        write_file(out / "comparison_baseline.txt", table);
        std::cout << table;
    }
    write_file(out / "summary.json", summary.dump(2) + "\n");
    return 0;
}

int cmd_ablate(const fs::path& config_path, const std::string& ablation, const std::string& output_flag) {
    Ablation a = Ablation::none;
    try {
        a = parse_ablation(ablation);
    } catch (const EngineError& e) {
        throw std::invalid_argument(e.what());
    }
    if (a == Ablation::none) throw std::invalid_argument("ablation: expected no-kd, no-phsc, no-id or no-ood");
    RunConfig cfg = load_run_config(config_path);
    cfg.engine.ablation = Ablation::none;
    const fs::path out = resolve_output(cfg, output_flag, config_path);
    const Graph g = load_graph(cfg);
    fs::create_directories(out);
    const auto full = run_all(g, cfg, cfg.engine, out);
    EngineConfig ablated = cfg.engine;
    ablated.ablation = a;
    const auto abl = run_all(g, cfg, ablated, out);
    print_summary("ogcil", full);
    print_summary(label_of(ablated), abl);
    const auto table = comparison_table("full", full, ablation, abl);
    write_file(out / fmt::format("comparison_{}.txt", ablation), table);
    std::cout << table;
    return 0;
}

int cmd_plot(const fs::path& dir) {
    const auto files = plot_reports(dir);
    for (const auto& f : files) std::cout << f.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"Open-set graph class-incremental learning: training, ablations, plots and data preparation"};
    app.require_subcommand(1);

    std::string config_path, output, ablation, plot_dir;
    auto* run = app.add_subcommand("run", "train and evaluate every seed listed in the config");
    run->add_option("config", config_path, "JSON run config")->required();
    run->add_option("-o,--output", output, "output directory (default: config output_dir or $OGCIL_OUTPUT_ROOT)");

    auto* abl = app.add_subcommand("ablate", "run the full method and one ablation at equal seeds");
    abl->add_option("config", config_path, "JSON run config")->required();
    abl->add_option("ablation", ablation, "no-kd, no-phsc, no-id or no-ood")->required();
    abl->add_option("-o,--output", output, "output directory");

    auto* plot = app.add_subcommand("plot", "render SVG figures for every report under a directory");
    plot->add_option("report_dir", plot_dir, "directory containing report.json files")->required();

    std::string profile, npz, dest;
    std::uint64_t seed = 0;
    std::size_t min_class = 0;
    int classes = 6, per_class = 100, feature_dim = 16;
    double homophily = 0.8, degree = 6.0, center_scale = 1.0, noise = 1.0;
    auto* prep = app.add_subcommand("prepare-data", "write a dataset in the three-file text format");
    prep->add_option("out_dir", dest, "destination directory")->required();
    auto* src = prep->add_option_group("source");
    src->add_option("--npz", npz, "convert a gnn-benchmark style .npz (e.g. amazon_electronics_photo.npz)");
    src->add_option("--synthetic", profile, "generate a synthetic graph: blobs or photo-like")
        ->check(CLI::IsMember({"blobs", "photo-like"}));
    src->require_option(1);
    prep->add_option("--seed", seed, "generator seed");
    prep->add_option("--min-class-size", min_class, "mask classes smaller than this");
    prep->add_option("--classes", classes, "blobs: number of classes")->check(CLI::PositiveNumber);
    prep->add_option("--nodes-per-class", per_class, "blobs: nodes per class")->check(CLI::PositiveNumber);
    prep->add_option("--feature-dim", feature_dim, "blobs: feature width")->check(CLI::PositiveNumber);
    prep->add_option("--homophily", homophily, "blobs: fraction of same-class edges")->check(CLI::Range(0.0, 1.0));
    prep->add_option("--degree", degree, "blobs: average degree")->check(CLI::PositiveNumber);
    prep->add_option("--center-scale", center_scale, "blobs: spread of class centers");
    prep->add_option("--noise", noise, "blobs: per-node feature noise");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kValidationFailure;
    }

    try {
        if (*run) return cmd_run(config_path, output);
        if (*abl) return cmd_ablate(config_path, ablation, output);
        if (*plot) return cmd_plot(plot_dir);
        if (*prep) {
            Graph g;
            if (!npz.empty()) {
                g = load_npz_graph(npz);
            } else if (profile == "photo-like") {
                g = make_blob_graph(photo_like_spec(seed));
            } else {
                BlobGraphSpec s;
                s.class_sizes.assign(static_cast<std::size_t>(classes), per_class);
                s.feature_dim = feature_dim;
                s.homophily = homophily;
                s.avg_degree = degree;
                s.center_scale = center_scale;
                s.noise = noise;
                s.seed = seed;
                g = make_blob_graph(s);
            }
            if (min_class > 0) mask_small_classes(g, min_class);
            fs::create_directories(dest);
            write_dataset(g, DatasetPaths::in_directory(dest));
            fmt::print("wrote {} nodes, {} edges, {} features to {}\n", g.num_nodes, g.edges.size(), g.feature_dim(),
                       dest);
            return 0;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidationFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
    return 0;
}

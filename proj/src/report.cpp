#include "ogcil/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace ogcil {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ReportError("cannot write " + path.string());
    out << text;
}

nlohmann::ordered_json averages(const RunReport& r) {
    return {{"uniform", {{"oscr", r.mean_oscr()}, {"closed_acc", r.mean_acc()}, {"auc", r.mean_auc()}}},
            {"weighted_by_test_size",
             {{"oscr", r.weighted_oscr()}, {"closed_acc", r.weighted_acc()}, {"auc", r.weighted_auc()}}}};
}

}  // namespace

nlohmann::ordered_json report_to_json(const RunReport& report) {
    nlohmann::ordered_json j;
    j["decisions"] = report.decisions;
    j["method"] = report.method;
    j["seed"] = report.seed;
    j["ablation"] = report.ablation;
    j["replay_disabled"] = report.replay_disabled;
    j["config"] = report.config;
    j["manifest"] = report.manifest;
    nlohmann::ordered_json tasks = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < report.tasks.size(); ++i) {
        const auto& t = report.tasks[i];
        nlohmann::ordered_json tj;
        tj["task_index"] = t.task_index;
        tj["oscr"] = t.oscr;
        tj["closed_acc"] = t.closed_acc;
        tj["auc"] = t.auc;
        tj["num_known"] = t.num_known;
        tj["num_unknown"] = t.num_unknown;
        if (i < report.best_epochs.size()) tj["best_epoch"] = report.best_epochs[i];
        nlohmann::ordered_json curve = nlohmann::ordered_json::array();
        for (const auto& p : t.curve) curve.push_back({p.fpr, p.ccr});
        tj["curve"] = std::move(curve);
        tasks.push_back(std::move(tj));
    }
    j["tasks"] = std::move(tasks);
    j["average"] = averages(report);
    return j;
}

RunReport report_from_json(const nlohmann::json& j) {
    try {
        RunReport r;
        r.decisions = j.at("decisions").get<std::vector<std::string>>();
        r.method = j.at("method").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.ablation = j.at("ablation").get<std::string>();
        r.replay_disabled = j.value("replay_disabled", false);
        r.config = j.at("config");
        r.manifest = j.at("manifest");
        for (const auto& tj : j.at("tasks")) {
            MetricsReport t;
            t.task_index = tj.at("task_index").get<int>();
            t.oscr = tj.at("oscr").get<double>();
            t.closed_acc = tj.at("closed_acc").get<double>();
            t.auc = tj.at("auc").get<double>();
            t.num_known = tj.at("num_known").get<std::size_t>();
            t.num_unknown = tj.at("num_unknown").get<std::size_t>();
            for (const auto& p : tj.at("curve")) t.curve.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            r.best_epochs.push_back(tj.value("best_epoch", 0));
            r.tasks.push_back(std::move(t));
        }
        if (r.tasks.empty()) throw ReportError("report has no tasks");
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ReportError(std::string("corrupt report: ") + e.what());
    }
}

void write_report(const fs::path& dir, const RunReport& report) {
    fs::create_directories(dir / "curves");
    fs::create_directories(dir / "logs");
    write_text(dir / "report.json", report_to_json(report).dump(2) + "\n");
    write_text(dir / "manifest.json", report.manifest.dump(2) + "\n");
    for (const auto& t : report.tasks) {
        std::string csv = "fpr,ccr\n";
        for (const auto& p : t.curve) csv += fmt::format("{:.17g},{:.17g}\n", p.fpr, p.ccr);
        write_text(dir / "curves" / fmt::format("task_{}.csv", t.task_index), csv);
    }
    for (std::size_t i = 0; i < report.logs.size(); ++i) {
        std::string csv = "epoch,phsc,pcvae,kd,total,val_acc\n";
        for (const auto& e : report.logs[i])
            csv += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", e.epoch, e.phsc, e.pcvae, e.kd, e.total,
                               e.val_acc);
        write_text(dir / "logs" / fmt::format("task_{}.csv", i + 1), csv);
    }
}

RunReport read_report(const fs::path& report_json) {
    std::ifstream in(report_json);
    if (!in) throw ReportError("cannot open " + report_json.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ReportError(report_json.string() + ": " + e.what());
    }
    return report_from_json(j);
}

std::vector<fs::path> find_reports(const fs::path& root) {
    if (!fs::is_directory(root)) throw ReportError(root.string() + " is not a directory");
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file() && e.path().filename() == "report.json") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

std::string comparison_table(const std::string& name_a, const std::vector<RunReport>& a, const std::string& name_b,
                             const std::vector<RunReport>& b) {
    if (a.size() != b.size()) throw ReportError("comparison needs the same number of runs on both sides");
    std::string out = fmt::format("{:>6} | {:>10} {:>10} {:>10} | {:>10} {:>10} {:>10} | {:>9}\n", "seed",
                                  name_a + " oscr", "acc", "auc", name_b + " oscr", "acc", "auc", "d_oscr");
    int wins = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].seed != b[i].seed) throw ReportError("comparison runs are not paired by seed");
        const double d = b[i].mean_oscr() - a[i].mean_oscr();
        wins += d <= 0.0 ? 1 : 0;
        out += fmt::format("{:>6} | {:>10.4f} {:>10.4f} {:>10.4f} | {:>10.4f} {:>10.4f} {:>10.4f} | {:>+9.4f}\n",
                           a[i].seed, a[i].mean_oscr(), a[i].mean_acc(), a[i].mean_auc(), b[i].mean_oscr(),
                           b[i].mean_acc(), b[i].mean_auc(), d);
    }
    const auto sa = summarize_runs(a);
    const auto sb = summarize_runs(b);
    out += fmt::format("{:>6} | {:>10.4f} {:>10.4f} {:>10.4f} | {:>10.4f} {:>10.4f} {:>10.4f} | {:>+9.4f}\n", "mean",
                       sa.oscr.mean, sa.acc.mean, sa.auc.mean, sb.oscr.mean, sb.acc.mean, sb.auc.mean,
                       sb.oscr.mean - sa.oscr.mean);
    out += fmt::format("{} oscr <= {} oscr in {} of {} seeds\n", name_b, name_a, wins, a.size());
    return out;
}

nlohmann::ordered_json summary_to_json(const SeedSummary& s) {
    auto m = [](const MetricSummary& x) { return nlohmann::ordered_json{{"mean", x.mean}, {"std", x.stddev}}; };
    return {{"runs", s.runs}, {"oscr", m(s.oscr)}, {"closed_acc", m(s.acc)}, {"auc", m(s.auc)}};
}

// Checkpoint layout: magic, tasks_completed, class ids, layer counts, then each tensor as rows, cols, data.
namespace {

constexpr char kMagic[8] = {'O', 'G', 'C', 'I', 'L', 'C', 'K', '1'};

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ReportError("checkpoint truncated");
    return v;
}

void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    put<std::int64_t>(out, m.rows());
    put<std::int64_t>(out, m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(out, m(i, j));
}

Eigen::MatrixXd take_matrix(std::istream& in) {
    const auto r = take<std::int64_t>(in);
    const auto c = take<std::int64_t>(in);
    if (r < 0 || c < 0 || r * c > (std::int64_t{1} << 32)) throw ReportError("checkpoint has a bad tensor shape");
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = take<double>(in);
    return m;
}

}  // namespace

void save_checkpoint(const fs::path& path, const ModelState& state) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ReportError("cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    put<std::int32_t>(out, state.tasks_completed);
    put<std::uint64_t>(out, state.prototypes.class_ids().size());
    for (int c : state.prototypes.class_ids()) put<std::int32_t>(out, c);
    put<std::uint64_t>(out, state.cvae.encoder.layers.size());
    put<std::uint64_t>(out, state.cvae.decoder.layers.size());
    for_each_tensor(state, [&](const Eigen::MatrixXd& m) { put_matrix(out, m); });
}

ModelState load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ReportError("cannot open " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || !std::equal(magic, magic + 8, kMagic)) throw ReportError(path.string() + " is not a checkpoint");
    ModelState s;
    s.tasks_completed = take<std::int32_t>(in);
    std::vector<int> ids(take<std::uint64_t>(in));
    for (auto& c : ids) c = take<std::int32_t>(in);
    s.cvae.encoder.layers.resize(take<std::uint64_t>(in));
    s.cvae.decoder.layers.resize(take<std::uint64_t>(in));
    s.gnn.w1 = take_matrix(in);
    s.gnn.w2 = take_matrix(in);
    for (auto& l : s.cvae.encoder.layers) {
        l.weight = take_matrix(in);
        l.bias = take_matrix(in);
    }
    for (auto& l : s.cvae.decoder.layers) {
        l.weight = take_matrix(in);
        l.bias = take_matrix(in);
    }
    const Eigen::MatrixXd protos = take_matrix(in);
    s.unknown_prototype = take_matrix(in);
    s.prototypes = PrototypeTable(static_cast<std::size_t>(protos.cols())).register_classes(ids, 0);
    if (s.prototypes.vectors().rows() != protos.rows()) throw ReportError("checkpoint prototype count mismatch");
    s.prototypes.vectors() = protos;
    s.gnn.validate();
    s.cvae.validate();
    return s;
}

// SVG figures -------------------------------------------------------------

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string svg_header(int w, int h) {
    return fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        w, h);
}

std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

// Plot frame with [0,1] y axis; returns the inner box.
struct Frame {
    double x0, y0, w, h;
    double px(double u) const { return x0 + u * w; }
    double py(double v) const { return y0 + (1.0 - v) * h; }
};

std::string frame_axes(const Frame& f, const std::string& title, const std::string& xlabel,
                       const std::string& ylabel, bool x_ticks) {
    std::string s;
    s += fmt::format("<text x=\"{:.1f}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                     f.x0 + f.w / 2, escape(title));
    s += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" stroke=\"black\"/>\n",
                     f.x0, f.y0, f.w, f.h);
    for (int k = 0; k <= 5; ++k) {
        const double v = k / 5.0;
        s += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n", f.x0,
                         f.py(v), f.x0 + f.w, f.py(v));
        s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.1f}</text>\n", f.x0 - 5,
                         f.py(v) + 4, v);
        if (x_ticks)
            s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.1f}</text>\n", f.px(v),
                             f.y0 + f.h + 16, v);
    }
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", f.x0 + f.w / 2,
                     f.y0 + f.h + 34, escape(xlabel));
    s += fmt::format(
        "<text x=\"15\" y=\"{:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 15 {:.1f})\">{}</text>\n",
        f.y0 + f.h / 2, f.y0 + f.h / 2, escape(ylabel));
    return s;
}

std::string legend(const Frame& f, const std::vector<std::string>& names) {
    std::string s;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double y = f.y0 + 12 + 16 * static_cast<double>(i);
        s += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", f.x0 + f.w + 10,
                         y - 9, kPalette[i % 8]);
        s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", f.x0 + f.w + 24, y, escape(names[i]));
    }
    return s;
}

std::string run_name(const RunReport& r) {
    return r.method + (r.ablation.empty() || r.ablation == "none" ? "" : " " + r.ablation) +
           " seed " + std::to_string(r.seed);
}

}  // namespace

std::string svg_metric_bars(const RunReport& report) {
    const Frame f{50, 35, 420, 260};
    std::string s = svg_header(600, 340);
    s += frame_axes(f, "Per-task metrics: " + run_name(report), "task", "value", false);
    const auto n = report.tasks.size();
    const double group = f.w / static_cast<double>(n);
    const double bar = group / 4.0;
    for (std::size_t t = 0; t < n; ++t) {
        const auto& m = report.tasks[t];
        const double vals[3] = {m.oscr, m.closed_acc, m.auc};
        for (int k = 0; k < 3; ++k) {
            const double x = f.x0 + group * static_cast<double>(t) + bar * (0.5 + k);
            s += fmt::format(
                "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"><title>{:.4f}</title></rect>\n",
                x, f.py(vals[k]), bar, f.py(0) - f.py(vals[k]), kPalette[k], vals[k]);
        }
        s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n",
                         f.x0 + group * (static_cast<double>(t) + 0.5), f.y0 + f.h + 16, m.task_index);
    }
    s += legend(f, {"OSCR", "ACC", "AUC"});
    return s + "</svg>\n";
}

std::string svg_curve(const std::vector<std::string>& names, const std::vector<std::vector<CurvePoint>>& curves,
                      const std::string& title) {
    const Frame f{50, 35, 360, 300};
    std::string s = svg_header(600, 390);
    s += frame_axes(f, title, "FPR (unknown accepted)", "CCR (known correct)", true);
    for (std::size_t i = 0; i < curves.size(); ++i) {
        std::string pts;
        for (const auto& p : curves[i]) pts += fmt::format("{:.2f},{:.2f} ", f.px(p.fpr), f.py(p.ccr));
        s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", pts,
                         kPalette[i % 8]);
    }
    s += legend(f, names);
    return s + "</svg>\n";
}

std::string svg_oscr_overlay(const std::vector<std::string>& names, const std::vector<RunReport>& reports) {
    const Frame f{50, 35, 420, 260};
    std::string s = svg_header(700, 340);
    s += frame_axes(f, "OSCR per task", "task", "OSCR", false);
    std::size_t n = 0;
    for (const auto& r : reports) n = std::max(n, r.tasks.size());
    const double group = f.w / static_cast<double>(std::max<std::size_t>(n, 1));
    const double bar = group / static_cast<double>(reports.size() + 1);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t k = 0; k < reports.size(); ++k) {
            if (t >= reports[k].tasks.size()) continue;
            const double v = reports[k].tasks[t].oscr;
            const double x = f.x0 + group * static_cast<double>(t) + bar * (0.5 + static_cast<double>(k));
            s += fmt::format(
                "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"><title>{:.4f}</title></rect>\n",
                x, f.py(v), bar, f.py(0) - f.py(v), kPalette[k % 8], v);
        }
        s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n",
                         f.x0 + group * (static_cast<double>(t) + 0.5), f.y0 + f.h + 16, t + 1);
    }
    s += legend(f, names);
    return s + "</svg>\n";
}

std::vector<fs::path> plot_reports(const fs::path& root) {
    const auto paths = find_reports(root);
    if (paths.empty()) throw ReportError("no report.json found under " + root.string());
    std::vector<RunReport> reports;
    std::vector<std::string> names;
    std::vector<fs::path> written;
    for (const auto& p : paths) {
        reports.push_back(read_report(p));
        const auto& r = reports.back();
        names.push_back(run_name(r));
        const fs::path dir = p.parent_path() / "plots";
        fs::create_directories(dir);
        write_text(dir / "metrics.svg", svg_metric_bars(r));
        written.push_back(dir / "metrics.svg");
        for (const auto& t : r.tasks) {
            const auto file = dir / fmt::format("curve_task_{}.svg", t.task_index);
            write_text(file, svg_curve({names.back()}, {t.curve}, fmt::format("CCR-FPR, task {}", t.task_index)));
            written.push_back(file);
        }
    }
    if (reports.size() >= 2) {
        const fs::path dir = root / "plots";
        fs::create_directories(dir);
        write_text(dir / "overlay_oscr.svg", svg_oscr_overlay(names, reports));
        written.push_back(dir / "overlay_oscr.svg");
        std::size_t n = 0;
        for (const auto& r : reports) n = std::max(n, r.tasks.size());
        for (std::size_t t = 0; t < n; ++t) {
            std::vector<std::string> nm;
            std::vector<std::vector<CurvePoint>> cs;
            for (std::size_t k = 0; k < reports.size(); ++k)
                if (t < reports[k].tasks.size()) {
                    nm.push_back(names[k]);
                    cs.push_back(reports[k].tasks[t].curve);
                }
            const auto file = dir / fmt::format("overlay_curve_task_{}.svg", t + 1);
            write_text(file, svg_curve(nm, cs, fmt::format("CCR-FPR overlay, task {}", t + 1)));
            written.push_back(file);
        }
    }
    return written;
}

}  // namespace ogcil

#include "ogcil/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "ogcil/rng.hpp"

namespace ogcil {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ',' || line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ',' && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

template <class T>
T parse_number(std::string_view s, const std::filesystem::path& file, std::size_t line_no) {
    T value{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc() || ptr != end)
        throw DatasetError(file.string() + ":" + std::to_string(line_no) + ": cannot parse '" + std::string(s) + "'");
    return value;
}

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw DatasetError("cannot open " + p.string());
    return in;
}

bool skip_line(std::string_view line) {
    const auto pos = line.find_first_not_of(" \t\r");
    return pos == std::string_view::npos || line[pos] == '#';
}

}  // namespace

DatasetPaths DatasetPaths::in_directory(const std::filesystem::path& dir) {
    return {dir / "features.txt", dir / "edges.txt", dir / "labels.txt"};
}

Graph load_dataset(const DatasetPaths& paths, const LoadOptions& options) {
    Graph g;
    {
        auto in = open_in(paths.features);
        std::vector<std::vector<double>> rows;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (skip_line(line)) continue;
            std::vector<double> row;
            for (auto f : split_fields(line)) row.push_back(parse_number<double>(f, paths.features, line_no));
            if (!rows.empty() && row.size() != rows.front().size())
                throw DatasetError(paths.features.string() + ":" + std::to_string(line_no) + ": expected " +
                                   std::to_string(rows.front().size()) + " values, got " + std::to_string(row.size()));
            rows.push_back(std::move(row));
        }
        g.num_nodes = rows.size();
        const auto cols = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
        g.features.resize(static_cast<Eigen::Index>(rows.size()), cols);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (Eigen::Index j = 0; j < cols; ++j) g.features(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    }
    {
        auto in = open_in(paths.labels);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (skip_line(line)) continue;
            const auto f = split_fields(line);
            if (f.size() != 1) throw DatasetError(paths.labels.string() + ":" + std::to_string(line_no) + ": expected one label");
            g.labels.push_back(parse_number<int>(f[0], paths.labels, line_no));
        }
        if (g.labels.size() != g.num_nodes)
            throw DatasetError("label file has " + std::to_string(g.labels.size()) + " entries but feature file has " +
                               std::to_string(g.num_nodes) + " rows");
        for (auto& l : g.labels)
            if (l < 0) l = kMaskedLabel;
    }
    {
        auto in = open_in(paths.edges);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (skip_line(line)) continue;
            const auto f = split_fields(line);
            if (f.size() != 2) throw DatasetError(paths.edges.string() + ":" + std::to_string(line_no) + ": expected two columns");
            const Edge e{parse_number<int>(f[0], paths.edges, line_no), parse_number<int>(f[1], paths.edges, line_no)};
            if (e.u < 0 || e.v < 0 || static_cast<std::size_t>(e.u) >= g.num_nodes || static_cast<std::size_t>(e.v) >= g.num_nodes)
                throw DatasetError(paths.edges.string() + ":" + std::to_string(line_no) + ": endpoint out of range");
            if (e.u != e.v) g.edges.push_back(e);
        }
    }
    if (options.min_class_size > 0) mask_small_classes(g, options.min_class_size);
    try {
        g.validate();
    } catch (const GraphError& e) {
        throw DatasetError(std::string("invalid dataset: ") + e.what());
    }
    return g;
}

void write_dataset(const Graph& graph, const DatasetPaths& paths) {
    graph.validate();
    for (const auto* p : {&paths.features, &paths.edges, &paths.labels})
        if (p->has_parent_path()) std::filesystem::create_directories(p->parent_path());
    {
        std::ofstream out(paths.features);
        if (!out) throw DatasetError("cannot write " + paths.features.string());
        out.precision(17);
        for (Eigen::Index i = 0; i < graph.features.rows(); ++i) {
            for (Eigen::Index j = 0; j < graph.features.cols(); ++j) {
                if (j) out << ',';
                out << graph.features(i, j);
            }
            out << '\n';
        }
    }
    {
        std::ofstream out(paths.edges);
        if (!out) throw DatasetError("cannot write " + paths.edges.string());
        for (const auto& e : graph.edges) out << e.u << ' ' << e.v << '\n';
    }
    {
        std::ofstream out(paths.labels);
        if (!out) throw DatasetError("cannot write " + paths.labels.string());
        for (int l : graph.labels) out << l << '\n';
    }
}

void mask_small_classes(Graph& graph, std::size_t min_size) {
    std::map<int, std::size_t> counts;
    for (int l : graph.labels)
        if (l >= 0) ++counts[l];
    for (auto& l : graph.labels)
        if (l >= 0 && counts[l] < min_size) l = kMaskedLabel;
}

Graph make_blob_graph(const BlobGraphSpec& spec) {
    if (spec.class_sizes.empty()) throw DatasetError("blob graph needs at least one class");
    if (spec.feature_dim < 1) throw DatasetError("blob graph feature_dim must be >= 1");
    if (spec.homophily < 0.0 || spec.homophily > 1.0) throw DatasetError("homophily must be in [0, 1]");
    auto rng = make_rng(spec.seed, {0x626c6f62ULL});
    std::normal_distribution<double> normal(0.0, 1.0);

    const auto num_classes = static_cast<int>(spec.class_sizes.size());
    const auto f = static_cast<Eigen::Index>(spec.feature_dim);
    Eigen::MatrixXd centers(num_classes, f);
    for (int c = 0; c < num_classes; ++c)
        for (Eigen::Index j = 0; j < f; ++j) centers(c, j) = spec.center_scale * normal(rng);

    Graph g;
    std::vector<std::vector<int>> members(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) {
        if (spec.class_sizes[static_cast<std::size_t>(c)] < 1) throw DatasetError("class sizes must be >= 1");
        for (int k = 0; k < spec.class_sizes[static_cast<std::size_t>(c)]; ++k) {
            members[static_cast<std::size_t>(c)].push_back(static_cast<int>(g.labels.size()));
            g.labels.push_back(c);
        }
    }
    g.num_nodes = g.labels.size();
    g.features.resize(static_cast<Eigen::Index>(g.num_nodes), f);
    for (std::size_t i = 0; i < g.num_nodes; ++i)
        for (Eigen::Index j = 0; j < f; ++j)
            g.features(static_cast<Eigen::Index>(i), j) = centers(g.labels[i], j) + spec.noise * normal(rng);

    const auto n = static_cast<int>(g.num_nodes);
    const auto num_edges = static_cast<long>(std::llround(spec.avg_degree * static_cast<double>(n) / 2.0));
    std::uniform_int_distribution<int> any(0, n - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (long e = 0; e < num_edges; ++e) {
        const int u = any(rng);
        const auto& same = members[static_cast<std::size_t>(g.labels[static_cast<std::size_t>(u)])];
        int v = u;
        if (unit(rng) < spec.homophily) {
            if (same.size() < 2) continue;
            std::uniform_int_distribution<std::size_t> pick(0, same.size() - 1);
            while (v == u) v = same[pick(rng)];
        } else {
            if (num_classes < 2) continue;
            while (g.labels[static_cast<std::size_t>(v)] == g.labels[static_cast<std::size_t>(u)]) v = any(rng);
        }
        g.edges.push_back({std::min(u, v), std::max(u, v)});
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const Edge& a, const Edge& b) { return a.u < b.u || (a.u == b.u && a.v < b.v); });
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end(), [](const Edge& a, const Edge& b) { return a.u == b.u && a.v == b.v; }),
                  g.edges.end());
    return g;
}

BlobGraphSpec photo_like_spec(std::uint64_t seed) {
    BlobGraphSpec s;
    s.class_sizes = {369, 1686, 703, 915, 882, 823, 1941, 331};
    s.feature_dim = 64;
    s.center_scale = 0.35;
    s.noise = 1.0;
    s.avg_degree = 31.0;
    s.homophily = 0.83;
    s.seed = seed;
    return s;
}

}  // namespace ogcil

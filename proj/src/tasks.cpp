#include "ogcil/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>

#include "ogcil/rng.hpp"

namespace ogcil {

void SplitFractions::validate() const {
    if (!(train > 0.0) || !(val > 0.0) || !(test > 0.0))
        throw TaskError("split fractions must all be positive");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw TaskError("split fractions must sum to 1");
}

std::vector<int> nodes_of_classes(const Graph& graph, std::span<const int> classes) {
    const std::set<int> wanted(classes.begin(), classes.end());
    std::vector<int> out;
    for (std::size_t i = 0; i < graph.num_nodes; ++i)
        if (wanted.count(graph.labels[i])) out.push_back(static_cast<int>(i));
    return out;
}

namespace {

struct ClassSplit {
    std::vector<int> train, val, test;
};

ClassSplit split_class(std::vector<int> nodes, const SplitFractions& f, std::uint64_t seed, int class_id) {
    auto rng = make_rng(seed, {0x73706c6974ULL, static_cast<std::uint64_t>(class_id)});
    std::shuffle(nodes.begin(), nodes.end(), rng);
    const auto n = static_cast<long>(nodes.size());
    long n_train = std::max(1L, std::lround(f.train * static_cast<double>(n)));
    long n_val = std::max(1L, std::lround(f.val * static_cast<double>(n)));
    while (n_train + n_val > n - 1) {
        if (n_train >= n_val && n_train > 1)
            --n_train;
        else
            --n_val;
    }
    ClassSplit s;
    s.train.assign(nodes.begin(), nodes.begin() + n_train);
    s.val.assign(nodes.begin() + n_train, nodes.begin() + n_train + n_val);
    s.test.assign(nodes.begin() + n_train + n_val, nodes.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

void append(std::vector<int>& dst, const std::vector<int>& src) { dst.insert(dst.end(), src.begin(), src.end()); }

}  // namespace

TaskSequence build_task_sequence(const Graph& graph, std::span<const int> knowns_per_task,
                                 std::span<const int> unknowns_per_task, const SplitFractions& fractions,
                                 std::uint64_t seed) {
    fractions.validate();
    if (knowns_per_task.empty()) throw TaskError("at least one task is required");
    if (knowns_per_task.size() != unknowns_per_task.size())
        throw TaskError("knowns_per_task and unknowns_per_task must have the same length");
    for (std::size_t t = 0; t < knowns_per_task.size(); ++t) {
        if (knowns_per_task[t] < 1) throw TaskError("every task needs at least one known class");
        if (unknowns_per_task[t] < 0) throw TaskError("unknown class counts must be >= 0");
        if (t > 0 && knowns_per_task[t] < unknowns_per_task[t - 1])
            throw TaskError("task " + std::to_string(t + 1) + " has fewer known classes than task " +
                            std::to_string(t) + " has unknown classes to promote");
    }

    std::map<int, std::vector<int>> members;
    for (std::size_t i = 0; i < graph.num_nodes; ++i)
        if (graph.labels[i] >= 0) members[graph.labels[i]].push_back(static_cast<int>(i));

    int needed = unknowns_per_task.back();
    for (int k : knowns_per_task) needed += k;
    if (needed > static_cast<int>(members.size()))
        throw TaskError("task layout needs " + std::to_string(needed) + " classes but the graph has " +
                        std::to_string(members.size()));

    TaskSequence seq;
    seq.seed = seed;
    for (const auto& [c, _] : members) seq.class_order.push_back(c);
    auto rng = make_rng(seed, {0x636c617373ULL});
    std::shuffle(seq.class_order.begin(), seq.class_order.end(), rng);

    std::size_t cursor = 0;
    auto take = [&](int count) {
        std::vector<int> out(seq.class_order.begin() + static_cast<long>(cursor),
                             seq.class_order.begin() + static_cast<long>(cursor) + count);
        cursor += static_cast<std::size_t>(count);
        return out;
    };

    std::map<int, ClassSplit> splits;
    auto split_of = [&](int c) -> const ClassSplit& {
        auto it = splits.find(c);
        if (it == splits.end()) {
            if (members[c].size() < 3)
                throw TaskError("class " + std::to_string(c) + " has " + std::to_string(members[c].size()) +
                                " nodes; at least 3 are needed for a train/val/test split");
            it = splits.emplace(c, split_class(members[c], fractions, seed, c)).first;
        }
        return it->second;
    };

    std::vector<int> cumulative;
    std::vector<int> previous_unknown;
    for (std::size_t t = 0; t < knowns_per_task.size(); ++t) {
        TaskSpec task;
        task.task_index = static_cast<int>(t) + 1;
        task.known_classes = previous_unknown;
        append(task.known_classes, take(knowns_per_task[t] - static_cast<int>(previous_unknown.size())));
        task.unknown_classes = take(unknowns_per_task[t]);
        append(cumulative, task.known_classes);
        task.cumulative_known = cumulative;

        for (int c : task.known_classes) {
            const auto& s = split_of(c);
            append(task.train_ids, s.train);
            append(task.val_ids, s.val);
            append(task.test_known_ids, s.test);
        }
        for (int c : task.unknown_classes) append(task.test_unknown_ids, split_of(c).test);
        for (auto* v : {&task.train_ids, &task.val_ids, &task.test_known_ids, &task.test_unknown_ids})
            std::sort(v->begin(), v->end());
        previous_unknown = task.unknown_classes;
        seq.tasks.push_back(std::move(task));
    }
    return seq;
}

nlohmann::json task_manifest(const TaskSequence& sequence) {
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& t : sequence.tasks) {
        tasks.push_back({{"task", t.task_index},
                         {"known_classes", t.known_classes},
                         {"cumulative_known", t.cumulative_known},
                         {"unknown_classes", t.unknown_classes},
                         {"train", t.train_ids.size()},
                         {"val", t.val_ids.size()},
                         {"test_known", t.test_known_ids.size()},
                         {"test_unknown", t.test_unknown_ids.size()},
                         {"seed", sequence.seed}});
    }
    return {{"seed", sequence.seed}, {"class_order", sequence.class_order}, {"tasks", tasks}};
}

std::string to_string(ExemplarMethod m) {
    return m == ExemplarMethod::coverage_maximization ? "cm" : "mf";
}

ExemplarMethod parse_exemplar_method(const std::string& s) {
    if (s == "cm") return ExemplarMethod::coverage_maximization;
    if (s == "mf") return ExemplarMethod::mean_of_features;
    throw TaskError("unknown exemplar method '" + s + "' (expected cm or mf)");
}

namespace {

// Row indices grouped by class label, rows kept in input order.
std::map<int, std::vector<Eigen::Index>> rows_by_class(const EmbeddingBatch& e) {
    std::map<int, std::vector<Eigen::Index>> out;
    for (std::size_t i = 0; i < e.size(); ++i) out[e.labels[i]].push_back(static_cast<Eigen::Index>(i));
    return out;
}

int node_of(const EmbeddingBatch& e, Eigen::Index row) { return e.node_ids[static_cast<std::size_t>(row)]; }

// Prefer the larger value; on exact ties prefer the smaller node id.
bool better(double value, int node, double best_value, int best_node) {
    return value > best_value || (value == best_value && node < best_node);
}

}  // namespace

ExemplarSelection select_exemplars_cm(const EmbeddingBatch& embeddings, int k) {
    if (k < 1) throw TaskError("exemplars per class must be >= 1");
    embeddings.validate();
    ExemplarSelection out;
    for (const auto& [label, rows] : rows_by_class(embeddings)) {
        auto& chosen = out[label];
        if (rows.size() <= static_cast<std::size_t>(k)) {
            for (auto r : rows) chosen.push_back(node_of(embeddings, r));
            continue;
        }
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(embeddings.z.cols());
        for (auto r : rows) mean += embeddings.z.row(r);
        mean /= static_cast<double>(rows.size());

        std::size_t first = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const double d = (embeddings.z.row(rows[i]) - mean).squaredNorm();
            if (best < 0.0 || better(d, node_of(embeddings, rows[i]), best, node_of(embeddings, rows[first]))) {
                best = d;
                first = i;
            }
        }
        std::vector<bool> taken(rows.size(), false);
        std::vector<double> min_dist(rows.size(), std::numeric_limits<double>::infinity());
        std::size_t pick = first;
        for (int round = 0; round < k; ++round) {
            taken[pick] = true;
            chosen.push_back(node_of(embeddings, rows[pick]));
            for (std::size_t i = 0; i < rows.size(); ++i)
                min_dist[i] = std::min(min_dist[i], (embeddings.z.row(rows[i]) - embeddings.z.row(rows[pick])).squaredNorm());
            std::size_t next = rows.size();
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (taken[i]) continue;
                if (next == rows.size() ||
                    better(min_dist[i], node_of(embeddings, rows[i]), min_dist[next], node_of(embeddings, rows[next])))
                    next = i;
            }
            if (next == rows.size()) break;
            pick = next;
        }
    }
    return out;
}

ExemplarSelection select_exemplars_mf(const EmbeddingBatch& embeddings, int k) {
    if (k < 1) throw TaskError("exemplars per class must be >= 1");
    embeddings.validate();
    ExemplarSelection out;
    for (const auto& [label, rows] : rows_by_class(embeddings)) {
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(embeddings.z.cols());
        for (auto r : rows) mean += embeddings.z.row(r);
        mean /= static_cast<double>(rows.size());
        std::vector<std::pair<double, int>> ranked;
        for (auto r : rows) ranked.emplace_back((embeddings.z.row(r) - mean).squaredNorm(), node_of(embeddings, r));
        std::sort(ranked.begin(), ranked.end());
        auto& chosen = out[label];
        for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(k); ++i)
            chosen.push_back(ranked[i].second);
    }
    return out;
}

ExemplarSelection select_exemplars(const EmbeddingBatch& embeddings, int k, ExemplarMethod method) {
    return method == ExemplarMethod::coverage_maximization ? select_exemplars_cm(embeddings, k)
                                                           : select_exemplars_mf(embeddings, k);
}

void ExemplarStore::add(const Graph& graph, std::span<const int> graph_node_ids, const ExemplarSelection& selection) {
    if (graph_node_ids.size() != graph.num_nodes) throw TaskError("ExemplarStore::add: node id map size mismatch");
    std::unordered_map<int, int> row_of;
    for (std::size_t i = 0; i < graph_node_ids.size(); ++i) row_of.emplace(graph_node_ids[i], static_cast<int>(i));
    const auto adj = graph.adjacency_lists();
    for (const auto& [label, nodes] : selection) {
        if (limit_ > 0 && nodes.size() > static_cast<std::size_t>(limit_))
            throw TaskError("ExemplarStore::add: more than " + std::to_string(limit_) + " exemplars for class " +
                            std::to_string(label));
        auto& bucket = by_class_[label];
        bucket.clear();
        for (int node : nodes) {
            auto it = row_of.find(node);
            if (it == row_of.end()) throw TaskError("ExemplarStore::add: node " + std::to_string(node) + " not in graph");
            const auto ego = ego_nodes(adj, it->second, 2);
            Exemplar ex;
            ex.node_id = node;
            ex.label = label;
            ex.ego = induced_subgraph(graph, ego);
            bucket.push_back(std::move(ex));
        }
    }
}

bool ExemplarStore::covers(int class_id) const {
    auto it = by_class_.find(class_id);
    return it != by_class_.end() && !it->second.empty();
}

std::size_t ExemplarStore::size() const {
    std::size_t n = 0;
    for (const auto& [_, v] : by_class_) n += v.size();
    return n;
}

std::vector<const Exemplar*> ExemplarStore::all() const {
    std::vector<const Exemplar*> out;
    for (const auto& [_, v] : by_class_)
        for (const auto& e : v) out.push_back(&e);
    return out;
}

}  // namespace ogcil

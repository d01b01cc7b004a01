#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ogcil/engine.hpp"

namespace ogcil::detail {

// RNG stream purposes.
enum Stream : std::uint64_t {
    kInitStream = 1,
    kPrototypeStream = 2,
    kPseudoIdStream = 3,
    kPseudoOodStream = 4,
    kEpsStream = 5,
    kHeadStream = 6,
};

inline std::vector<int> local_rows(const std::vector<int>& global_nodes, const std::vector<int>& ids) {
    std::unordered_map<int, int> index;
    index.reserve(global_nodes.size() * 2);
    for (std::size_t i = 0; i < global_nodes.size(); ++i) index.emplace(global_nodes[i], static_cast<int>(i));
    std::vector<int> rows;
    rows.reserve(ids.size());
    for (int id : ids) {
        auto it = index.find(id);
        if (it == index.end()) throw EngineError("node " + std::to_string(id) + " is not in the task graph");
        rows.push_back(it->second);
    }
    return rows;
}

inline std::vector<int> labels_of(const Graph& graph, const std::vector<int>& ids) {
    std::vector<int> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(graph.labels[static_cast<std::size_t>(id)]);
    return out;
}

inline std::vector<int> set_difference(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out;
    for (int x : a)
        if (std::find(b.begin(), b.end(), x) == b.end()) out.push_back(x);
    return out;
}

inline double accuracy_of(const std::vector<OpenSetScore>& scores, const std::vector<int>& truth) {
    if (truth.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += scores[i].predicted == truth[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(truth.size());
}

// Exemplar ego subgraphs merged into one graph; `centers` are the exemplar rows.
struct ExemplarGraph {
    PreparedGraph prepared;
    std::vector<int> centers;
    std::vector<int> labels;
    std::vector<int> node_ids;
};

inline std::optional<ExemplarGraph> build_exemplar_graph(const ExemplarStore& store) {
    if (store.empty()) return std::nullopt;
    std::vector<Graph> egos;
    ExemplarGraph out;
    for (const auto* e : store.all()) {
        egos.push_back(e->ego);
        out.labels.push_back(e->label);
        out.node_ids.push_back(e->node_id);
    }
    std::vector<int> offsets;
    const Graph merged = disjoint_union(egos, &offsets);
    out.prepared = PreparedGraph(merged);
    out.centers = offsets;
    return out;
}

inline std::vector<Eigen::MatrixXd*> tensors_of(ModelState& s) {
    std::vector<Eigen::MatrixXd*> out;
    for_each_tensor(s, [&](Eigen::MatrixXd& m) { out.push_back(&m); });
    return out;
}

}  // namespace ogcil::detail

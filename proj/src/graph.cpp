#include "ogcil/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace ogcil {

void Graph::validate() const {
    if (static_cast<std::size_t>(features.rows()) != num_nodes)
        throw GraphError("feature rows (" + std::to_string(features.rows()) + ") != num_nodes (" +
                         std::to_string(num_nodes) + ")");
    if (labels.size() != num_nodes)
        throw GraphError("label count (" + std::to_string(labels.size()) + ") != num_nodes (" +
                         std::to_string(num_nodes) + ")");
    const auto n = static_cast<int>(num_nodes);
    for (const auto& e : edges) {
        if (e.u < 0 || e.u >= n || e.v < 0 || e.v >= n)
            throw GraphError("edge endpoint out of range: (" + std::to_string(e.u) + ", " +
                             std::to_string(e.v) + ")");
        if (e.u == e.v) throw GraphError("self-loop in raw edge list at node " + std::to_string(e.u));
    }
    if (!features.allFinite()) throw GraphError("features contain non-finite values");
}

std::vector<std::vector<int>> Graph::adjacency_lists() const {
    std::vector<std::vector<int>> adj(num_nodes);
    for (const auto& e : edges) {
        adj[e.u].push_back(e.v);
        adj[e.v].push_back(e.u);
    }
    for (auto& nbrs : adj) {
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    return adj;
}

Graph induced_subgraph(const Graph& graph, std::span<const int> nodes) {
    std::unordered_map<int, int> index;
    index.reserve(nodes.size() * 2);
    Graph sub;
    sub.num_nodes = nodes.size();
    sub.features.resize(static_cast<Eigen::Index>(nodes.size()), graph.features.cols());
    sub.labels.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const int id = nodes[i];
        if (id < 0 || static_cast<std::size_t>(id) >= graph.num_nodes)
            throw GraphError("induced_subgraph: node id out of range: " + std::to_string(id));
        if (!index.emplace(id, static_cast<int>(i)).second)
            throw GraphError("induced_subgraph: duplicate node id " + std::to_string(id));
        sub.features.row(static_cast<Eigen::Index>(i)) = graph.features.row(id);
        sub.labels[i] = graph.labels[id];
    }
    for (const auto& e : graph.edges) {
        auto a = index.find(e.u);
        if (a == index.end()) continue;
        auto b = index.find(e.v);
        if (b == index.end()) continue;
        sub.edges.push_back({a->second, b->second});
    }
    return sub;
}

std::vector<int> ego_nodes(const std::vector<std::vector<int>>& adjacency, int center, int hops) {
    std::vector<int> frontier{center};
    std::vector<int> seen{center};
    std::unordered_set<int> visited{center};
    for (int h = 0; h < hops; ++h) {
        std::vector<int> next;
        for (int u : frontier)
            for (int v : adjacency[u])
                if (visited.insert(v).second) {
                    seen.push_back(v);
                    next.push_back(v);
                }
        frontier = std::move(next);
    }
    std::sort(seen.begin() + 1, seen.end());
    return seen;
}

Graph disjoint_union(std::span<const Graph> graphs, std::vector<int>* offsets) {
    Graph out;
    Eigen::Index cols = graphs.empty() ? 0 : graphs.front().features.cols();
    std::size_t total = 0;
    for (const auto& g : graphs) {
        if (g.features.cols() != cols) throw GraphError("disjoint_union: feature width mismatch");
        total += g.num_nodes;
    }
    out.num_nodes = total;
    out.features.resize(static_cast<Eigen::Index>(total), cols);
    out.labels.reserve(total);
    if (offsets) offsets->clear();
    int base = 0;
    for (const auto& g : graphs) {
        if (offsets) offsets->push_back(base);
        out.features.middleRows(base, static_cast<Eigen::Index>(g.num_nodes)) = g.features;
        out.labels.insert(out.labels.end(), g.labels.begin(), g.labels.end());
        for (const auto& e : g.edges) out.edges.push_back({e.u + base, e.v + base});
        base += static_cast<int>(g.num_nodes);
    }
    return out;
}

SparseMatrix normalize_adjacency(const Graph& graph) {
    const auto n = static_cast<int>(graph.num_nodes);
    for (const auto& e : graph.edges)
        if (e.u < 0 || e.u >= n || e.v < 0 || e.v >= n)
            throw GraphError("normalize_adjacency: edge endpoint out of range");

    const auto adj = graph.adjacency_lists();
    std::vector<double> inv_sqrt_deg(graph.num_nodes);
    for (std::size_t i = 0; i < graph.num_nodes; ++i)
        inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(adj[i].size() + 1));

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(graph.num_nodes + 2 * graph.edges.size());
    for (int i = 0; i < n; ++i) {
        triplets.emplace_back(i, i, inv_sqrt_deg[i] * inv_sqrt_deg[i]);
        for (int j : adj[i]) triplets.emplace_back(i, j, inv_sqrt_deg[i] * inv_sqrt_deg[j]);
    }
    SparseMatrix a(n, n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    return a;
}

EncoderParams EncoderParams::init(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim, Rng& rng) {
    EncoderParams p;
    p.w1 = glorot_uniform(static_cast<Eigen::Index>(in_dim), static_cast<Eigen::Index>(hidden_dim), rng);
    p.w2 = glorot_uniform(static_cast<Eigen::Index>(hidden_dim), static_cast<Eigen::Index>(out_dim), rng);
    return p;
}

void EncoderParams::validate() const {
    if (w1.cols() == 0 || w2.cols() == 0) throw GraphError("encoder widths must be positive");
    if (w1.cols() != w2.rows()) throw GraphError("encoder layer shapes do not chain");
    if (!w1.allFinite() || !w2.allFinite()) throw GraphError("encoder weights contain non-finite values");
}

EncoderParams EncoderParams::zeros_like() const {
    return {Eigen::MatrixXd::Zero(w1.rows(), w1.cols()), Eigen::MatrixXd::Zero(w2.rows(), w2.cols())};
}

PreparedGraph::PreparedGraph(const Graph& graph) {
    graph.validate();
    adjacency_ = normalize_adjacency(graph);
    propagated_ = adjacency_ * graph.features;
}

EncoderTrace encoder_forward(const PreparedGraph& graph, const EncoderParams& params) {
    if (static_cast<std::size_t>(graph.propagated_features().cols()) != params.in_dim())
        throw GraphError("feature width " + std::to_string(graph.propagated_features().cols()) +
                         " does not match encoder input width " + std::to_string(params.in_dim()));
    EncoderTrace t;
    t.pre_activation.noalias() = graph.propagated_features() * params.w1;
    t.hidden = t.pre_activation.cwiseMax(0.0);
    t.propagated_hidden = graph.adjacency() * t.hidden;
    t.output.noalias() = t.propagated_hidden * params.w2;
    return t;
}

EncoderParams encoder_backward(const PreparedGraph& graph, const EncoderParams& params,
                               const EncoderTrace& trace, const Eigen::MatrixXd& d_output) {
    EncoderParams grad;
    grad.w2.noalias() = trace.propagated_hidden.transpose() * d_output;
    Eigen::MatrixXd d_prop_hidden = d_output * params.w2.transpose();
    // Â is symmetric, so Âᵀ·g = Â·g.
    Eigen::MatrixXd d_hidden = graph.adjacency() * d_prop_hidden;
    d_hidden.array() *= (trace.pre_activation.array() > 0.0).cast<double>();
    grad.w1.noalias() = graph.propagated_features().transpose() * d_hidden;
    return grad;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, std::span<const int> rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= m.rows()) throw GraphError("row index out of range: " + std::to_string(rows[i]));
        out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    }
    return out;
}

Eigen::MatrixXd encode_nodes(const Graph& graph, const EncoderParams& params, std::span<const int> node_ids) {
    if (node_ids.empty()) throw GraphError("encode_nodes: empty node id list");
    params.validate();
    if (graph.feature_dim() != params.in_dim())
        throw GraphError("encode_nodes: feature width " + std::to_string(graph.feature_dim()) +
                         " does not match encoder input width " + std::to_string(params.in_dim()));
    const PreparedGraph prepared(graph);
    return gather_rows(encoder_forward(prepared, params).output, node_ids);
}

}  // namespace ogcil

#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ogcil/rng.hpp"

namespace ogcil {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline constexpr int kMaskedLabel = -1;

struct Edge {
    int u = 0;
    int v = 0;
};

class GraphError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Attributed graph: dense node features, undirected edge list, integer labels.
struct Graph {
    std::size_t num_nodes = 0;
    Eigen::MatrixXd features;  // num_nodes x f
    std::vector<Edge> edges;
    std::vector<int> labels;   // kMaskedLabel when unlabeled

    std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }

    // Throws GraphError when an invariant does not hold.
    void validate() const;

    // Neighbor lists built from the edge list (duplicates removed).
    std::vector<std::vector<int>> adjacency_lists() const;
};

// Subgraph induced on `nodes`, renumbered in the given order.
Graph induced_subgraph(const Graph& graph, std::span<const int> nodes);

// Nodes within `hops` of `center`, center first, then ascending id.
std::vector<int> ego_nodes(const std::vector<std::vector<int>>& adjacency, int center, int hops);

// Disjoint union; `offsets[i]` is the first node index of graphs[i] in the result.
Graph disjoint_union(std::span<const Graph> graphs, std::vector<int>* offsets = nullptr);

// D^-1/2 (A + I) D^-1/2 with duplicate edges collapsed.
SparseMatrix normalize_adjacency(const Graph& graph);

// Two-layer GCN weights: features -> hidden (ReLU) -> embedding (linear).
struct EncoderParams {
    Eigen::MatrixXd w1;  // f x d_h
    Eigen::MatrixXd w2;  // d_h x d

    static EncoderParams init(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim, Rng& rng);

    std::size_t in_dim() const { return static_cast<std::size_t>(w1.rows()); }
    std::size_t hidden_dim() const { return static_cast<std::size_t>(w1.cols()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(w2.cols()); }

    void validate() const;
    EncoderParams zeros_like() const;
};

// Graph with its normalized adjacency and first propagation Â·X cached.
// Both depend only on the graph, so training reuses them every epoch.
class PreparedGraph {
public:
    PreparedGraph() = default;
    explicit PreparedGraph(const Graph& graph);

    std::size_t num_nodes() const { return static_cast<std::size_t>(adjacency_.rows()); }
    const SparseMatrix& adjacency() const { return adjacency_; }
    const Eigen::MatrixXd& propagated_features() const { return propagated_; }

private:
    SparseMatrix adjacency_;
    Eigen::MatrixXd propagated_;
};

// Intermediate activations of a full-graph forward pass.
struct EncoderTrace {
    Eigen::MatrixXd pre_activation;     // Â X W1
    Eigen::MatrixXd hidden;             // relu(pre_activation)
    Eigen::MatrixXd propagated_hidden;  // Â hidden
    Eigen::MatrixXd output;             // propagated_hidden W2
};

EncoderTrace encoder_forward(const PreparedGraph& graph, const EncoderParams& params);

// Gradient of a scalar loss with respect to the weights, given dLoss/dOutput for all nodes.
EncoderParams encoder_backward(const PreparedGraph& graph, const EncoderParams& params,
                               const EncoderTrace& trace, const Eigen::MatrixXd& d_output);

// Embeddings of `node_ids`; every node of `graph` takes part in message passing.
Eigen::MatrixXd encode_nodes(const Graph& graph, const EncoderParams& params, std::span<const int> node_ids);

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, std::span<const int> rows);

}  // namespace ogcil

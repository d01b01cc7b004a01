#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ogcil/embedding.hpp"
#include "ogcil/graph.hpp"

namespace ogcil {

class TaskError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SplitFractions {
    double train = 0.4;
    double val = 0.2;
    double test = 0.4;

    void validate() const;
};

struct TaskSpec {
    int task_index = 1;                  // 1-based
    std::vector<int> known_classes;      // introduced by this task
    std::vector<int> cumulative_known;   // all classes introduced so far
    std::vector<int> unknown_classes;    // present only in this task's test set
    std::vector<int> train_ids;
    std::vector<int> val_ids;
    std::vector<int> test_known_ids;     // test split of this task's known classes
    std::vector<int> test_unknown_ids;   // test split of the unknown classes
};

struct TaskSequence {
    std::uint64_t seed = 0;
    std::vector<int> class_order;  // seeded shuffle the tasks consume from
    std::vector<TaskSpec> tasks;
};

// Shuffles classes with `seed`, then consumes them task by task. Unknown classes of
// task t are promoted into the known set of task t+1. Per-class node splits follow `fractions`.
TaskSequence build_task_sequence(const Graph& graph, std::span<const int> knowns_per_task,
                                 std::span<const int> unknowns_per_task, const SplitFractions& fractions,
                                 std::uint64_t seed);

// Node ids whose label is in `classes`, ascending.
std::vector<int> nodes_of_classes(const Graph& graph, std::span<const int> classes);

// Human-readable record of the sequence: class ids, split sizes and seed per task.
nlohmann::json task_manifest(const TaskSequence& sequence);

enum class ExemplarMethod { coverage_maximization, mean_of_features };

std::string to_string(ExemplarMethod m);
ExemplarMethod parse_exemplar_method(const std::string& s);

using ExemplarSelection = std::map<int, std::vector<int>>;  // class -> node ids

// Greedy coverage: farthest from the class mean first, then the max-min-distance node.
ExemplarSelection select_exemplars_cm(const EmbeddingBatch& embeddings, int k);

// The k members closest to the class mean; ties by ascending node id.
ExemplarSelection select_exemplars_mf(const EmbeddingBatch& embeddings, int k);

ExemplarSelection select_exemplars(const EmbeddingBatch& embeddings, int k, ExemplarMethod method);

struct Exemplar {
    int node_id = -1;  // id in the source graph
    int label = -1;
    Graph ego;         // 2-hop ego subgraph; the exemplar is node 0
};

// Retained historical nodes with their receptive fields.
class ExemplarStore {
public:
    explicit ExemplarStore(int per_class_limit = 0) : limit_(per_class_limit) {}

    int per_class_limit() const { return limit_; }

    // Adds exemplars of `graph` for the selected nodes; ego subgraphs are cut from `graph`.
    // `graph_node_ids[i]` is the global id of row i in `graph`.
    void add(const Graph& graph, std::span<const int> graph_node_ids, const ExemplarSelection& selection);

    bool covers(int class_id) const;
    std::size_t size() const;
    bool empty() const { return size() == 0; }
    const std::map<int, std::vector<Exemplar>>& by_class() const { return by_class_; }

    // Every stored exemplar in ascending class order.
    std::vector<const Exemplar*> all() const;

private:
    int limit_;
    std::map<int, std::vector<Exemplar>> by_class_;
};

}  // namespace ogcil

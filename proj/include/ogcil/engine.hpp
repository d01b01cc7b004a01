#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ogcil/graph.hpp"
#include "ogcil/metrics.hpp"
#include "ogcil/model.hpp"
#include "ogcil/objectives.hpp"
#include "ogcil/synth.hpp"
#include "ogcil/tasks.hpp"

namespace ogcil {

class EngineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Ablation { none, no_kd, no_phsc, no_id, no_ood };

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& s);

struct EngineConfig {
    int epochs = 1;                    // E, per task
    double learning_rate = 1e-3;
    int hidden_dim = 256;              // GCN hidden width
    int embed_dim = 256;               // z width; CVAE hidden and latent widths match it
    LossWeights weights{10.0, 100.0};
    MixConfig mix;
    int exemplars_per_class = 5;       // k; 0 disables replay
    ExemplarMethod exemplar_method = ExemplarMethod::coverage_maximization;
    std::uint64_t seed = 0;
    Ablation ablation = Ablation::none;

    void validate() const;
};

struct TaskLayout {
    std::vector<int> knowns_per_task;
    std::vector<int> unknowns_per_task;
    SplitFractions fractions;
};

struct EpochLog {
    int epoch = 0;
    double phsc = 0.0;
    double pcvae = 0.0;
    double kd = 0.0;
    double total = 0.0;
    double val_acc = 0.0;  // of the parameters entering this epoch
};

// Nodes of one graph whose embeddings enter a training step.
struct NodeGroup {
    const PreparedGraph* graph = nullptr;
    const EncoderTrace* trace = nullptr;  // forward pass of `graph` under the current encoder; computed if null
    std::vector<int> rows;                // rows of `graph`
    std::vector<int> labels;
    std::vector<int> node_ids;
    Provenance provenance = Provenance::real;  // real rows also enter pcvae, exemplar rows do not
    Eigen::MatrixXd teacher;              // kd targets, rows.size() x d; empty means no kd on this group
};

struct StepResult {
    LossComponents losses;
    double total = 0.0;
    ModelState grad;  // same layout as the state
};

// Loss and gradient of one optimization step. pcvae sees real rows and pseudo-ID samples; the
// hypersphere loss (or the unknown-prototype cross-entropy when `hypersphere` is false) also sees
// exemplar rows and pseudo-OOD samples; kd covers every group with teacher targets. Pseudo samples
// are constants. `eps` has one row per real row followed by one per pseudo-ID sample.
StepResult training_step(const ModelState& state, std::span<const NodeGroup> groups, const EmbeddingBatch& pseudo_id,
                         const EmbeddingBatch& pseudo_ood, const Eigen::MatrixXd& eps, const LossWeights& weights,
                         bool use_kd, bool hypersphere);

struct TaskTrainingResult {
    ModelState state;              // best-validation snapshot
    std::vector<EpochLog> log;
    double best_val_acc = 0.0;
    int best_epoch = 0;            // number of updates applied to the retained snapshot
    double final_val_acc = 0.0;    // of the parameters after the last epoch
    bool replay_disabled = false;  // t > 1 with H = L = k = 0
};

// Fresh encoder, CVAE and an empty prototype table.
ModelState init_model(std::size_t feature_dim, const EngineConfig& config);

TeacherSnapshot capture_teacher(const ModelState& state);

// One task of the incremental procedure. Task 1 optimizes phsc + pcvae; later tasks add
// pseudo-ID replay, periodically regenerated pseudo-OOD mixes and distillation against `teacher`.
TaskTrainingResult train_task(const Graph& graph, const TaskSpec& task, const ModelState& state,
                              const TeacherSnapshot* teacher, const ExemplarStore& exemplars,
                              const EngineConfig& config);

// Picks exemplars for the task's classes from its training nodes and stores their ego subgraphs.
void update_exemplars(const Graph& graph, const TaskSpec& task, const EncoderParams& gnn, const EngineConfig& config,
                      ExemplarStore& store);

// Known test nodes of every task so far plus this task's unknown test nodes, scored in latent space.
std::vector<ScoredPrediction> score_task(const Graph& graph, const TaskSequence& sequence, int task_index,
                                         const ModelState& state);

struct RunReport {
    std::string method;  // "ogcil" or "softmax-baseline"
    std::uint64_t seed = 0;
    std::string ablation;
    std::vector<std::string> decisions;
    nlohmann::json config;
    nlohmann::json manifest;
    std::vector<MetricsReport> tasks;
    std::vector<std::vector<EpochLog>> logs;
    std::vector<int> best_epochs;
    bool replay_disabled = false;

    double mean_oscr() const;
    double mean_acc() const;
    double mean_auc() const;
    // Averages weighted by each task's test-set size.
    double weighted_oscr() const;
    double weighted_acc() const;
    double weighted_auc() const;
};

// Decisions every report states in its header.
std::vector<std::string> method_decisions(const EngineConfig& config);

// Called after each task with the retained state, e.g. to write checkpoints.
using TaskHook = std::function<void(const TaskSpec&, const ModelState&)>;

RunReport run_sequence(const Graph& graph, const TaskLayout& layout, const EngineConfig& config,
                       const TaskHook& on_task_end = {});

// GCN + linear softmax head with exemplar replay; open score = max class probability.
RunReport softmax_threshold_baseline(const Graph& graph, const TaskLayout& layout, const EngineConfig& config);

struct MetricSummary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for a single run
};

struct SeedSummary {
    std::size_t runs = 0;
    MetricSummary oscr, acc, auc;
};

SeedSummary summarize_runs(const std::vector<RunReport>& runs);

}  // namespace ogcil

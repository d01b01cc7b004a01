// Softmax-threshold replay baseline: GCN + linear head, cross-entropy over the
// current task's train nodes and stored exemplars, open score = max class probability.

#include <algorithm>
#include <cmath>

#include "ogcil/config.hpp"
#include "ogcil/engine.hpp"
#include "ogcil/optim.hpp"
#include "ogcil/rng.hpp"
#include "engine_internal.hpp"

namespace ogcil {

using namespace detail;

namespace {

struct BaselineState {
    EncoderParams gnn;
    Eigen::MatrixXd head_w;  // d x C
    Eigen::MatrixXd head_b;  // 1 x C
    std::vector<int> class_ids;

    int column_of(int c) const {
        const auto it = std::find(class_ids.begin(), class_ids.end(), c);
        if (it == class_ids.end()) throw EngineError("baseline: class " + std::to_string(c) + " has no head column");
        return static_cast<int>(it - class_ids.begin());
    }
};

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p = logits;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double m = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - m).exp().matrix();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

// Argmax class (lowest id on ties) and its probability.
std::vector<OpenSetScore> predict(const BaselineState& s, const Eigen::MatrixXd& z) {
    const Eigen::MatrixXd p = softmax_rows((z * s.head_w).rowwise() + s.head_b.row(0));
    std::vector<OpenSetScore> out(static_cast<std::size_t>(z.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        int best = -1;
        double best_p = -1.0;
        for (std::size_t c = 0; c < s.class_ids.size(); ++c) {
            const double v = p(i, static_cast<Eigen::Index>(c));
            if (v > best_p || (v == best_p && s.class_ids[c] < s.class_ids[static_cast<std::size_t>(best)])) {
                best_p = v;
                best = static_cast<int>(c);
            }
        }
        out[static_cast<std::size_t>(i)] = {best_p, s.class_ids[static_cast<std::size_t>(best)]};
    }
    return out;
}

// Mean cross-entropy; writes dLoss/dLogits.
double cross_entropy(const Eigen::MatrixXd& logits, const std::vector<int>& cols, Eigen::MatrixXd& d_logits) {
    d_logits = softmax_rows(logits);
    const auto n = static_cast<double>(logits.rows());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const auto c = cols[static_cast<std::size_t>(i)];
        loss -= std::log(std::max(d_logits(i, c), 1e-300));
        d_logits(i, c) -= 1.0;
    }
    d_logits /= n;
    return loss / n;
}

}  // namespace

RunReport softmax_threshold_baseline(const Graph& graph, const TaskLayout& layout, const EngineConfig& config) {
    config.validate();
    const TaskSequence seq =
        build_task_sequence(graph, layout.knowns_per_task, layout.unknowns_per_task, layout.fractions, config.seed);

    RunReport report;
    report.method = "softmax-baseline";
    report.seed = config.seed;
    report.ablation = "none";
    report.decisions = {"open-set score is the maximum softmax probability over classes known so far",
                        "classes assigned to tasks in the order of a seeded shuffle; unknown classes of task t become "
                        "known in task t+1"};
    report.config = config_to_json(config);
    report.manifest = task_manifest(seq);

    auto init_rng = make_rng(config.seed, {kInitStream});
    const auto d = static_cast<Eigen::Index>(config.embed_dim);
    BaselineState state;
    state.gnn = EncoderParams::init(graph.feature_dim(), static_cast<std::size_t>(config.hidden_dim),
                                    static_cast<std::size_t>(config.embed_dim), init_rng);
    state.head_w.resize(d, 0);
    state.head_b.resize(1, 0);
    ExemplarStore store(config.exemplars_per_class);

    for (const auto& task : seq.tasks) {
        auto head_rng = make_rng(config.seed, {kHeadStream, static_cast<std::uint64_t>(task.task_index)});
        const auto c_old = state.head_w.cols();
        const auto c_new = static_cast<Eigen::Index>(task.known_classes.size());
        state.head_w.conservativeResize(d, c_old + c_new);
        state.head_w.rightCols(c_new) = glorot_uniform(d, c_new, head_rng);
        state.head_b.conservativeResize(1, c_old + c_new);
        state.head_b.rightCols(c_new).setZero();
        state.class_ids.insert(state.class_ids.end(), task.known_classes.begin(), task.known_classes.end());

        const std::vector<int> task_nodes = nodes_of_classes(graph, task.known_classes);
        const Graph task_graph = induced_subgraph(graph, task_nodes);
        const PreparedGraph prepared(task_graph);
        const auto train_rows = local_rows(task_nodes, task.train_ids);
        const auto val_rows = local_rows(task_nodes, task.val_ids);
        const auto val_labels = labels_of(graph, task.val_ids);
        std::vector<int> train_cols;
        for (int l : labels_of(graph, task.train_ids)) train_cols.push_back(state.column_of(l));
        const auto ex = build_exemplar_graph(store);
        std::vector<int> ex_cols;
        if (ex)
            for (int l : ex->labels) ex_cols.push_back(state.column_of(l));

        Adam adam(config.learning_rate);
        BaselineState best = state;
        double best_acc = -1.0;
        std::vector<EpochLog> log;
        auto val_accuracy = [&](const Eigen::MatrixXd& all_z) {
            return accuracy_of(predict(state, gather_rows(all_z, val_rows)), val_labels);
        };
        for (int epoch = 1; epoch <= config.epochs; ++epoch) {
            const EncoderTrace trace = encoder_forward(prepared, state.gnn);
            const double acc = val_accuracy(trace.output);
            if (acc >= best_acc) {
                best_acc = acc;
                best = state;
            }
            const Eigen::MatrixXd z = gather_rows(trace.output, train_rows);
            Eigen::MatrixXd d_logits;
            double loss = cross_entropy((z * state.head_w).rowwise() + state.head_b.row(0), train_cols, d_logits);
            Eigen::MatrixXd g_w = z.transpose() * d_logits;
            Eigen::MatrixXd g_b = d_logits.colwise().sum();
            Eigen::MatrixXd d_task = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(prepared.num_nodes()), d);
            const Eigen::MatrixXd d_z = d_logits * state.head_w.transpose();
            for (std::size_t i = 0; i < train_rows.size(); ++i)
                d_task.row(train_rows[i]) += d_z.row(static_cast<Eigen::Index>(i));
            EncoderParams g_gnn = encoder_backward(prepared, state.gnn, trace, d_task);
            if (ex) {
                const EncoderTrace ex_trace = encoder_forward(ex->prepared, state.gnn);
                const Eigen::MatrixXd ze = gather_rows(ex_trace.output, ex->centers);
                Eigen::MatrixXd d_le;
                loss += cross_entropy((ze * state.head_w).rowwise() + state.head_b.row(0), ex_cols, d_le);
                g_w += ze.transpose() * d_le;
                g_b += d_le.colwise().sum();
                const Eigen::MatrixXd d_ze = d_le * state.head_w.transpose();
                Eigen::MatrixXd d_ex = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ex->prepared.num_nodes()), d);
                for (std::size_t i = 0; i < ex->centers.size(); ++i)
                    d_ex.row(ex->centers[i]) += d_ze.row(static_cast<Eigen::Index>(i));
                const EncoderParams g = encoder_backward(ex->prepared, state.gnn, ex_trace, d_ex);
                g_gnn.w1 += g.w1;
                g_gnn.w2 += g.w2;
            }
            if (!std::isfinite(loss)) throw EngineError("baseline: non-finite cross-entropy");
            log.push_back({epoch, 0.0, 0.0, 0.0, loss, acc});
            std::vector<Eigen::MatrixXd*> params = {&state.gnn.w1, &state.gnn.w2, &state.head_w, &state.head_b};
            std::vector<const Eigen::MatrixXd*> grads = {&g_gnn.w1, &g_gnn.w2, &g_w, &g_b};
            adam.step(params, grads);
        }
        if (val_accuracy(encoder_forward(prepared, state.gnn).output) >= best_acc) best = state;
        state = std::move(best);
        report.logs.push_back(std::move(log));
        report.best_epochs.push_back(0);

        if (config.exemplars_per_class > 0) {
            const auto z = gather_rows(encoder_forward(prepared, state.gnn).output, train_rows);
            const auto batch =
                EmbeddingBatch::from_nodes(z, labels_of(graph, task.train_ids), task.train_ids, Provenance::real);
            store.add(task_graph, task_nodes, select_exemplars(batch, config.exemplars_per_class,
                                                               ExemplarMethod::coverage_maximization));
        }

        // Same evaluation graph and test nodes as the main method.
        std::vector<int> classes = task.cumulative_known;
        classes.insert(classes.end(), task.unknown_classes.begin(), task.unknown_classes.end());
        const auto nodes = nodes_of_classes(graph, classes);
        const PreparedGraph eval_graph(induced_subgraph(graph, nodes));
        std::vector<int> ids;
        for (int tau = 0; tau < task.task_index; ++tau) {
            const auto& k = seq.tasks[static_cast<std::size_t>(tau)].test_known_ids;
            ids.insert(ids.end(), k.begin(), k.end());
        }
        const std::size_t n_known = ids.size();
        ids.insert(ids.end(), task.test_unknown_ids.begin(), task.test_unknown_ids.end());
        const auto scores =
            predict(state, gather_rows(encoder_forward(eval_graph, state.gnn).output, local_rows(nodes, ids)));
        std::vector<ScoredPrediction> preds;
        for (std::size_t i = 0; i < ids.size(); ++i)
            preds.push_back({ids[i], scores[i].predicted, scores[i].score,
                             i < n_known ? graph.labels[static_cast<std::size_t>(ids[i])] : kUnknownTruth});
        report.tasks.push_back(evaluate_predictions(task.task_index, preds));
    }
    return report;
}

}  // namespace ogcil

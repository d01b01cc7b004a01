#include "ogcil/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "ogcil/config.hpp"
#include "ogcil/optim.hpp"
#include "ogcil/rng.hpp"
#include "engine_internal.hpp"

namespace ogcil {

using namespace detail;

std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::none: return "none";
        case Ablation::no_kd: return "no-kd";
        case Ablation::no_phsc: return "no-phsc";
        case Ablation::no_id: return "no-id";
        case Ablation::no_ood: return "no-ood";
    }
    return "?";
}

Ablation parse_ablation(const std::string& s) {
    for (auto a : {Ablation::none, Ablation::no_kd, Ablation::no_phsc, Ablation::no_id, Ablation::no_ood})
        if (to_string(a) == s) return a;
    throw EngineError("unknown ablation '" + s + "' (expected no-kd, no-phsc, no-id or no-ood)");
}

void EngineConfig::validate() const {
    if (epochs < 1) throw EngineError("epochs must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw EngineError("learning_rate must be > 0");
    if (hidden_dim < 1 || embed_dim < 1) throw EngineError("model widths must be >= 1");
    if (exemplars_per_class < 0) throw EngineError("exemplars_per_class must be >= 0");
    weights.validate();
    mix.validate();
}

ModelState init_model(std::size_t feature_dim, const EngineConfig& config) {
    auto rng = make_rng(config.seed, {kInitStream});
    const auto d = static_cast<std::size_t>(config.embed_dim);
    ModelState s;
    s.gnn = EncoderParams::init(feature_dim, static_cast<std::size_t>(config.hidden_dim), d, rng);
    s.cvae = CvaeParams::init(d, d, d, rng);
    s.prototypes = PrototypeTable(d);
    s.unknown_prototype = standard_normal(1, static_cast<Eigen::Index>(d), rng) / std::sqrt(static_cast<double>(d));
    return s;
}

TeacherSnapshot capture_teacher(const ModelState& state) { return TeacherSnapshot(state.gnn, state.cvae); }

StepResult training_step(const ModelState& state, std::span<const NodeGroup> groups, const EmbeddingBatch& pseudo_id,
                         const EmbeddingBatch& pseudo_ood, const Eigen::MatrixXd& eps, const LossWeights& weights,
                         bool use_kd, bool hypersphere) {
    const auto d = static_cast<Eigen::Index>(state.gnn.out_dim());
    std::vector<EncoderTrace> own(groups.size());
    std::vector<const EncoderTrace*> traces(groups.size());
    std::vector<EmbeddingBatch> batches(groups.size());
    for (std::size_t k = 0; k < groups.size(); ++k) {
        const auto& g = groups[k];
        if (g.graph == nullptr) throw EngineError("training_step: group without a graph");
        if (g.trace) {
            traces[k] = g.trace;
        } else {
            own[k] = encoder_forward(*g.graph, state.gnn);
            traces[k] = &own[k];
        }
        batches[k] = EmbeddingBatch::from_nodes(gather_rows(traces[k]->output, g.rows), g.labels, g.node_ids,
                                                g.provenance);
    }

    // Row layout: pcvae batch = real groups, pseudo-ID; hypersphere batch = that, exemplar groups, pseudo-OOD.
    EmbeddingBatch pc_batch;
    std::vector<Eigen::Index> offset_ph(groups.size(), -1);
    for (std::size_t k = 0; k < groups.size(); ++k)
        if (groups[k].provenance == Provenance::real) {
            offset_ph[k] = static_cast<Eigen::Index>(pc_batch.size());
            pc_batch.append(batches[k]);
        }
    pc_batch.append(pseudo_id);
    EmbeddingBatch ph_batch = pc_batch;
    for (std::size_t k = 0; k < groups.size(); ++k)
        if (groups[k].provenance != Provenance::real) {
            offset_ph[k] = static_cast<Eigen::Index>(ph_batch.size());
            ph_batch.append(batches[k]);
        }
    ph_batch.append(pseudo_ood);
    ph_batch.validate();
    if (ph_batch.empty()) throw EngineError("training_step: empty batch");
    if (ph_batch.z.cols() != static_cast<Eigen::Index>(state.cvae.embed_dim()))
        throw EngineError("training_step: embedding width does not match the CVAE");

    // One encoder pass serves both losses; the pcvae rows are a prefix of the hypersphere rows.
    StepResult out;
    const PosteriorBatch post = cvae_encode_batch(ph_batch.z, state.cvae);
    PosteriorGrad pg = PosteriorGrad::zeros(post);
    ObjectiveGrad g_obj = ObjectiveGrad::zeros(static_cast<Eigen::Index>(ph_batch.size()), state.cvae, state.prototypes);
    weights.validate();
    out.losses.pcvae = pcvae_from_posterior(pc_batch, post, state.cvae, state.prototypes, weights, eps, &g_obj, &pg);
    out.losses.phsc = hypersphere ? phsc_from_posterior(ph_batch, post, state.prototypes, &g_obj, &pg)
                                  : unknown_ce_from_posterior(ph_batch, post, state.prototypes, state.unknown_prototype,
                                                              &g_obj, &pg);
    encoder_backprop(post, state.cvae, pg, g_obj);

    // kd over the groups that carry teacher targets, as one batch.
    std::vector<Eigen::Index> offset_kd(groups.size(), -1);
    Eigen::MatrixXd d_student;
    if (use_kd) {
        Eigen::Index rows = 0;
        for (std::size_t k = 0; k < groups.size(); ++k)
            if (groups[k].teacher.size() > 0) {
                if (groups[k].teacher.rows() != batches[k].z.rows() || groups[k].teacher.cols() != d)
                    throw EngineError("training_step: teacher targets do not match the group");
                offset_kd[k] = rows;
                rows += batches[k].z.rows();
            }
        Eigen::MatrixXd student(rows, d), target(rows, d);
        for (std::size_t k = 0; k < groups.size(); ++k)
            if (offset_kd[k] >= 0) {
                student.middleRows(offset_kd[k], batches[k].z.rows()) = batches[k].z;
                target.middleRows(offset_kd[k], batches[k].z.rows()) = groups[k].teacher;
            }
        out.losses.kd = kd_loss(student, target, &d_student);
        d_student *= weights.kd;
    }
    out.total = total_loss(out.losses, weights, use_kd);

    // Route embedding gradients back through the encoder, one graph at a time.
    out.grad = zero_gradient(state);
    for (std::size_t k = 0; k < groups.size(); ++k) {
        const auto& g = groups[k];
        const auto n = static_cast<Eigen::Index>(g.rows.size());
        Eigen::MatrixXd d_nodes = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g.graph->num_nodes()), d);
        for (Eigen::Index i = 0; i < n; ++i) {
            auto row = d_nodes.row(g.rows[static_cast<std::size_t>(i)]);
            row += g_obj.z.row(offset_ph[k] + i);
            if (offset_kd[k] >= 0) row += d_student.row(offset_kd[k] + i);
        }
        const EncoderParams gg = encoder_backward(*g.graph, state.gnn, *traces[k], d_nodes);
        out.grad.gnn.w1 += gg.w1;
        out.grad.gnn.w2 += gg.w2;
    }
    out.grad.cvae = std::move(g_obj.cvae);
    out.grad.prototypes.vectors() = g_obj.prototypes;
    out.grad.unknown_prototype = g_obj.unknown_prototype;
    return out;
}

TaskTrainingResult train_task(const Graph& graph, const TaskSpec& task, const ModelState& state,
                              const TeacherSnapshot* teacher, const ExemplarStore& exemplars,
                              const EngineConfig& config) {
    config.validate();
    const int t = task.task_index;
    if (t != state.tasks_completed + 1)
        throw EngineError("task " + std::to_string(t) + " out of order: " + std::to_string(state.tasks_completed) +
                          " tasks completed");
    const bool first = t == 1;
    if (!first && teacher == nullptr) throw EngineError("task " + std::to_string(t) + " needs a teacher snapshot");

    const std::vector<int> old_classes = set_difference(task.cumulative_known, task.known_classes);
    if (!first && config.exemplars_per_class > 0)
        for (int c : old_classes)
            if (!exemplars.covers(c))
                throw EngineError("task " + std::to_string(t) + ": no exemplar subgraphs for class " + std::to_string(c));

    const bool use_kd = !first && config.ablation != Ablation::no_kd && config.weights.kd > 0.0;
    LossWeights weights = config.weights;
    if (config.ablation == Ablation::no_kd) weights.kd = 0.0;
    MixConfig mix = config.mix;
    if (config.ablation == Ablation::no_id) mix.count_id = 0;
    if (config.ablation == Ablation::no_ood) mix.count_ood = 0;

    TaskTrainingResult result;
    result.replay_disabled = !first && mix.count_id == 0 && mix.count_ood == 0 && config.exemplars_per_class == 0;

    ModelState cur = state;
    cur.prototypes = cur.prototypes.register_classes(task.known_classes,
                                                     config.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(t)));

    // Inductive task graph: only nodes of this task's known classes.
    const std::vector<int> task_nodes = nodes_of_classes(graph, task.known_classes);
    const Graph task_graph = induced_subgraph(graph, task_nodes);
    const PreparedGraph prepared(task_graph);
    const std::vector<int> train_rows = local_rows(task_nodes, task.train_ids);
    const std::vector<int> val_rows = local_rows(task_nodes, task.val_ids);
    const std::vector<int> train_labels = labels_of(graph, task.train_ids);
    const std::vector<int> val_labels = labels_of(graph, task.val_ids);

    std::optional<ExemplarGraph> ex;
    if (!first && config.exemplars_per_class > 0) ex = build_exemplar_graph(exemplars);

    Eigen::MatrixXd teacher_real, teacher_ex;
    if (use_kd) {
        teacher_real = gather_rows(encoder_forward(prepared, teacher->gnn()).output, train_rows);
        if (ex) teacher_ex = gather_rows(encoder_forward(ex->prepared, teacher->gnn()).output, ex->centers);
    }

    const auto seed = config.seed;
    const auto task_key = static_cast<std::uint64_t>(t);
    EmbeddingBatch pseudo_id;
    if (!first && mix.count_id > 0 && !old_classes.empty()) {
        const int total = mix.id_mode == IdCountMode::per_class ? mix.count_id * static_cast<int>(old_classes.size())
                                                                : mix.count_id;
        auto rng = make_rng(seed, {kPseudoIdStream, task_key});
        pseudo_id = generate_pseudo_id(cur.prototypes, old_classes, total, cur.cvae, rng);
    }
    EmbeddingBatch pseudo_ood;
    auto ood_rng = make_rng(seed, {kPseudoOodStream, task_key});
    auto eps_rng = make_rng(seed, {kEpsStream, task_key});

    Adam adam(config.learning_rate);
    result.best_val_acc = -1.0;

    auto validation_accuracy = [&](const Eigen::MatrixXd& all_z) {
        const auto post = cvae_encode_batch(gather_rows(all_z, val_rows), cur.cvae);
        return accuracy_of(open_set_scores(post.mu, cur.prototypes), val_labels);
    };

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const EncoderTrace trace = encoder_forward(prepared, cur.gnn);
        const double val_acc = validation_accuracy(trace.output);
        if (val_acc >= result.best_val_acc) {
            result.best_val_acc = val_acc;
            result.best_epoch = epoch - 1;
            result.state = cur;
        }

        std::vector<NodeGroup> groups(1);
        groups[0].graph = &prepared;
        groups[0].trace = &trace;
        groups[0].rows = train_rows;
        groups[0].labels = train_labels;
        groups[0].node_ids = task.train_ids;
        groups[0].teacher = teacher_real;
        if (ex) {
            NodeGroup g;
            g.graph = &ex->prepared;
            g.rows = ex->centers;
            g.labels = ex->labels;
            g.node_ids = ex->node_ids;
            g.provenance = Provenance::exemplar;
            g.teacher = teacher_ex;
            groups.push_back(std::move(g));
        }

        if (!first && mix.count_ood > 0 && epoch % mix.regen_interval == 0) {
            EmbeddingBatch pool = EmbeddingBatch::from_nodes(gather_rows(trace.output, train_rows), train_labels,
                                                             task.train_ids, Provenance::real);
            pool.append(pseudo_id);
            pseudo_ood = generate_pseudo_ood(pool, mix.count_ood, mix, ood_rng);
        }

        const Eigen::MatrixXd eps =
            standard_normal(static_cast<Eigen::Index>(train_rows.size() + pseudo_id.size()),
                            static_cast<Eigen::Index>(cur.cvae.latent_dim()), eps_rng);
        const StepResult step = training_step(cur, groups, pseudo_id, pseudo_ood, eps, weights, use_kd,
                                              config.ablation != Ablation::no_phsc);
        result.log.push_back(
            {epoch, step.losses.phsc, step.losses.pcvae, step.losses.kd, step.total, val_acc});

        ModelState grad = step.grad;
        const auto params = tensors_of(cur);
        const auto grads = tensors_of(grad);
        std::vector<const Eigen::MatrixXd*> cgrads(grads.begin(), grads.end());
        adam.step(params, cgrads);
    }

    result.final_val_acc = validation_accuracy(encoder_forward(prepared, cur.gnn).output);
    if (result.final_val_acc >= result.best_val_acc) {
        result.best_val_acc = result.final_val_acc;
        result.best_epoch = config.epochs;
        result.state = cur;
    }
    result.state.tasks_completed = t;
    return result;
}

void update_exemplars(const Graph& graph, const TaskSpec& task, const EncoderParams& gnn, const EngineConfig& config,
                      ExemplarStore& store) {
    if (config.exemplars_per_class <= 0) return;
    const std::vector<int> task_nodes = nodes_of_classes(graph, task.known_classes);
    const Graph task_graph = induced_subgraph(graph, task_nodes);
    const PreparedGraph prepared(task_graph);
    const auto rows = local_rows(task_nodes, task.train_ids);
    const auto z = gather_rows(encoder_forward(prepared, gnn).output, rows);
    const auto batch = EmbeddingBatch::from_nodes(z, labels_of(graph, task.train_ids), task.train_ids, Provenance::real);
    store.add(task_graph, task_nodes, select_exemplars(batch, config.exemplars_per_class, config.exemplar_method));
}

std::vector<ScoredPrediction> score_task(const Graph& graph, const TaskSequence& sequence, int task_index,
                                         const ModelState& state) {
    if (task_index < 1 || static_cast<std::size_t>(task_index) > sequence.tasks.size())
        throw EngineError("score_task: task index out of range");
    const TaskSpec& task = sequence.tasks[static_cast<std::size_t>(task_index - 1)];
    std::vector<int> classes = task.cumulative_known;
    classes.insert(classes.end(), task.unknown_classes.begin(), task.unknown_classes.end());
    const std::vector<int> nodes = nodes_of_classes(graph, classes);
    const PreparedGraph prepared(induced_subgraph(graph, nodes));
    const Eigen::MatrixXd all_z = encoder_forward(prepared, state.gnn).output;

    std::vector<int> known_ids;
    for (int tau = 0; tau < task_index; ++tau) {
        const auto& ids = sequence.tasks[static_cast<std::size_t>(tau)].test_known_ids;
        known_ids.insert(known_ids.end(), ids.begin(), ids.end());
    }
    std::vector<int> ids = known_ids;
    ids.insert(ids.end(), task.test_unknown_ids.begin(), task.test_unknown_ids.end());
    const auto post = cvae_encode_batch(gather_rows(all_z, local_rows(nodes, ids)), state.cvae);
    const auto scores = open_set_scores(post.mu, state.prototypes);

    std::vector<ScoredPrediction> out;
    out.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const bool known = i < known_ids.size();
        out.push_back({ids[i], scores[i].predicted, scores[i].score,
                       known ? graph.labels[static_cast<std::size_t>(ids[i])] : kUnknownTruth});
    }
    return out;
}

std::vector<std::string> method_decisions(const EngineConfig& config) {
    std::vector<std::string> d = {
        "hypersphere loss orientation: binary cross-entropy with l = exp(-||h - p_c||^2) as the in-class "
        "probability, -y_c log l - (1 - y_c) log(1 - l); l clamped to [1e-7, 1 - 1e-7]",
        "open-set score computed in the CVAE latent space on h = mu(z): s = -min_c ||h - p_c||^2 over all "
        "classes known so far",
        std::string("pseudo-ID count interpreted as ") +
            (config.mix.id_mode == IdCountMode::total ? "a per-task total split evenly over previously known classes"
                                                       : "a per-class count for every previously known class"),
        "classes assigned to tasks in the order of a seeded shuffle; unknown classes of task t become known in task t+1",
        "decoder likelihood: unit-variance Gaussian, reconstruction term is squared error",
    };
    return d;
}

namespace {

double mean_of(const std::vector<MetricsReport>& tasks, double MetricsReport::*field) {
    if (tasks.empty()) return 0.0;
    double s = 0.0;
    for (const auto& t : tasks) s += t.*field;
    return s / static_cast<double>(tasks.size());
}

double weighted_of(const std::vector<MetricsReport>& tasks, double MetricsReport::*field) {
    double s = 0.0, w = 0.0;
    for (const auto& t : tasks) {
        const auto n = static_cast<double>(t.num_known + t.num_unknown);
        s += n * (t.*field);
        w += n;
    }
    return w > 0.0 ? s / w : 0.0;
}

}  // namespace

double RunReport::mean_oscr() const { return mean_of(tasks, &MetricsReport::oscr); }
double RunReport::mean_acc() const { return mean_of(tasks, &MetricsReport::closed_acc); }
double RunReport::mean_auc() const { return mean_of(tasks, &MetricsReport::auc); }
double RunReport::weighted_oscr() const { return weighted_of(tasks, &MetricsReport::oscr); }
double RunReport::weighted_acc() const { return weighted_of(tasks, &MetricsReport::closed_acc); }
double RunReport::weighted_auc() const { return weighted_of(tasks, &MetricsReport::auc); }

RunReport run_sequence(const Graph& graph, const TaskLayout& layout, const EngineConfig& config,
                       const TaskHook& on_task_end) {
    config.validate();
    for (std::size_t i = 0; i < layout.unknowns_per_task.size(); ++i)
        if (layout.unknowns_per_task[i] < 1)
            throw EngineError("task " + std::to_string(i + 1) + " has no unknown classes; open-set metrics need at least one");
    const TaskSequence seq =
        build_task_sequence(graph, layout.knowns_per_task, layout.unknowns_per_task, layout.fractions, config.seed);

    RunReport report;
    report.method = "ogcil";
    report.seed = config.seed;
    report.ablation = to_string(config.ablation);
    report.decisions = method_decisions(config);
    report.config = config_to_json(config);
    report.manifest = task_manifest(seq);

    ModelState state = init_model(graph.feature_dim(), config);
    ExemplarStore store(config.exemplars_per_class);
    std::optional<TeacherSnapshot> teacher;
    for (const auto& task : seq.tasks) {
        TaskTrainingResult r;
        try {
            r = train_task(graph, task, state, teacher ? &*teacher : nullptr, store, config);
        } catch (const std::exception& e) {
            throw EngineError("task " + std::to_string(task.task_index) + ": " + e.what());
        }
        state = std::move(r.state);
        report.replay_disabled = report.replay_disabled || r.replay_disabled;
        report.logs.push_back(std::move(r.log));
        report.best_epochs.push_back(r.best_epoch);
        update_exemplars(graph, task, state.gnn, config, store);
        if (on_task_end) on_task_end(task, state);
        teacher.emplace(capture_teacher(state));
        const auto preds = score_task(graph, seq, task.task_index, state);
        report.tasks.push_back(evaluate_predictions(task.task_index, preds));
    }
    return report;
}

SeedSummary summarize_runs(const std::vector<RunReport>& runs) {
    SeedSummary s;
    s.runs = runs.size();
    auto summarize = [&](auto getter) {
        MetricSummary m;
        if (runs.empty()) return m;
        for (const auto& r : runs) m.mean += getter(r);
        m.mean /= static_cast<double>(runs.size());
        if (runs.size() > 1) {
            double ss = 0.0;
            for (const auto& r : runs) ss += (getter(r) - m.mean) * (getter(r) - m.mean);
            m.stddev = std::sqrt(ss / static_cast<double>(runs.size() - 1));
        }
        return m;
    };
    s.oscr = summarize([](const RunReport& r) { return r.mean_oscr(); });
    s.acc = summarize([](const RunReport& r) { return r.mean_acc(); });
    s.auc = summarize([](const RunReport& r) { return r.mean_auc(); });
    return s;
}

}  // namespace ogcil

#include <doctest.h>

#include "ogcil/dataset.hpp"
#include "ogcil/engine.hpp"

using namespace ogcil;

namespace {

Graph blobs(std::vector<int> sizes, std::uint64_t seed = 1, double center_scale = 1.0) {
    BlobGraphSpec s;
    s.class_sizes = std::move(sizes);
    s.feature_dim = 8;
    s.center_scale = center_scale;
    s.avg_degree = 4.0;
    s.seed = seed;
    return make_blob_graph(s);
}

EngineConfig small_config(int epochs, std::uint64_t seed = 0) {
    EngineConfig c;
    c.epochs = epochs;
    c.hidden_dim = 16;
    c.embed_dim = 16;
    c.weights = {10.0, 100.0};
    c.mix.count_id = 40;
    c.mix.count_ood = 40;
    c.mix.regen_interval = 5;
    c.exemplars_per_class = 3;
    c.seed = seed;
    return c;
}

struct TwoTasks {
    Graph graph;
    TaskSequence seq;
    ModelState after_first;
    ExemplarStore store;
    TeacherSnapshot teacher;
};

TwoTasks first_task(const EngineConfig& c) {
    Graph g = blobs({40, 40, 40, 40, 40});
    const std::vector<int> knowns = {2, 2}, unknowns = {1, 1};
    TaskSequence seq = build_task_sequence(g, knowns, unknowns, {}, c.seed);
    const ModelState init = init_model(g.feature_dim(), c);
    auto r = train_task(g, seq.tasks[0], init, nullptr, ExemplarStore(c.exemplars_per_class), c);
    ExemplarStore store(c.exemplars_per_class);
    update_exemplars(g, seq.tasks[0], r.state.gnn, c, store);
    TeacherSnapshot teacher = capture_teacher(r.state);
    return {std::move(g), std::move(seq), std::move(r.state), std::move(store), std::move(teacher)};
}

double mean_sq_displacement(const ExemplarStore& store, const EncoderParams& a, const EncoderParams& b) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto* e : store.all()) {
        const std::vector<int> center = {0};
        sum += (encode_nodes(e->ego, a, center) - encode_nodes(e->ego, b, center)).squaredNorm();
        ++n;
    }
    return sum / static_cast<double>(n);
}

bool same_tensors(const ModelState& a, const ModelState& b) {
    std::vector<const Eigen::MatrixXd*> x, y;
    for_each_tensor(a, [&](const Eigen::MatrixXd& m) { x.push_back(&m); });
    for_each_tensor(b, [&](const Eigen::MatrixXd& m) { y.push_back(&m); });
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i]->rows() != y[i]->rows() || x[i]->cols() != y[i]->cols() || *x[i] != *y[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("task 1 training lowers the loss on two blobs") {
    const Graph g = blobs({50, 50});
    const std::vector<int> knowns = {2}, unknowns = {0};
    const auto seq = build_task_sequence(g, knowns, unknowns, {}, 0);
    const EngineConfig c = small_config(100);
    const auto r = train_task(g, seq.tasks[0], init_model(g.feature_dim(), c), nullptr, ExemplarStore(3), c);
    REQUIRE(r.log.size() == 100);
    CHECK(r.log.back().total < r.log.front().total);
    for (const auto& e : r.log) CHECK(e.kd == 0.0);
    CHECK(r.best_val_acc >= r.final_val_acc);
    CHECK(r.state.prototypes.size() == 2);
    CHECK(r.state.tasks_completed == 1);
}

TEST_CASE("huge distillation weight pins exemplar embeddings") {
    EngineConfig c = small_config(60);
    auto tt = first_task(c);
    c.weights.kd = 1e6;
    const auto r = train_task(tt.graph, tt.seq.tasks[1], tt.after_first, &tt.teacher, tt.store, c);
    CHECK(mean_sq_displacement(tt.store, r.state.gnn, tt.teacher.gnn()) < 1e-2);
    // a modest weight lets them drift further
    c.weights.kd = 0.0;
    const auto free = train_task(tt.graph, tt.seq.tasks[1], tt.after_first, &tt.teacher, tt.store, c);
    CHECK(mean_sq_displacement(tt.store, free.state.gnn, tt.teacher.gnn()) >
          mean_sq_displacement(tt.store, r.state.gnn, tt.teacher.gnn()));
}

TEST_CASE("teacher is untouched by the next task") {
    EngineConfig c = small_config(20);
    auto tt = first_task(c);
    const EncoderParams gnn = tt.teacher.gnn();
    const CvaeParams cvae = tt.teacher.cvae();
    train_task(tt.graph, tt.seq.tasks[1], tt.after_first, &tt.teacher, tt.store, c);
    CHECK(tt.teacher.gnn().w1 == gnn.w1);
    CHECK(tt.teacher.gnn().w2 == gnn.w2);
    for (std::size_t i = 0; i < cvae.encoder.layers.size(); ++i)
        CHECK(tt.teacher.cvae().encoder.layers[i].weight == cvae.encoder.layers[i].weight);
}

TEST_CASE("degenerate replay config is legal, flagged and independent of history") {
    EngineConfig c = small_config(20);
    auto tt = first_task(c);
    c.weights.kd = 0.0;
    c.mix.count_id = 0;
    c.mix.count_ood = 0;
    c.exemplars_per_class = 0;
    const auto a = train_task(tt.graph, tt.seq.tasks[1], tt.after_first, &tt.teacher, tt.store, c);
    CHECK(a.replay_disabled);
    for (const auto& e : a.log) CHECK(e.kd == 0.0);

    // a different teacher and an empty store change nothing
    EncoderParams other = tt.teacher.gnn();
    other.w1.array() += 0.5;
    const TeacherSnapshot moved(other, tt.teacher.cvae());
    const auto b = train_task(tt.graph, tt.seq.tasks[1], tt.after_first, &moved, ExemplarStore(0), c);
    CHECK(same_tensors(a.state, b.state));
    REQUIRE(a.log.size() == b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].total == b.log[i].total);

    const Graph g = blobs({40, 40, 40, 40, 40});
    TaskLayout layout{{2, 2}, {1, 1}, {}};
    CHECK(run_sequence(g, layout, c).replay_disabled);
    CHECK_FALSE(run_sequence(g, layout, small_config(5)).replay_disabled);
}

TEST_CASE("train_task preconditions") {
    EngineConfig c = small_config(5);
    auto tt = first_task(c);
    CHECK_THROWS_AS(train_task(tt.graph, tt.seq.tasks[1], tt.after_first, nullptr, tt.store, c), EngineError);
    CHECK_THROWS_AS(train_task(tt.graph, tt.seq.tasks[1], tt.after_first, &tt.teacher, ExemplarStore(3), c),
                    EngineError);
    const ModelState fresh = init_model(tt.graph.feature_dim(), c);
    CHECK_THROWS_AS(train_task(tt.graph, tt.seq.tasks[1], fresh, &tt.teacher, tt.store, c), EngineError);
    EngineConfig bad = c;
    bad.epochs = 0;
    CHECK_THROWS(bad.validate());
    bad = c;
    bad.learning_rate = -1.0;
    CHECK_THROWS(bad.validate());
    bad = c;
    bad.mix.regen_interval = 0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("prototype count follows the cumulative known classes") {
    EngineConfig c = small_config(5);
    const Graph g = blobs({30, 30, 30, 30, 30, 30, 30, 30});
    const std::vector<int> knowns = {3, 2, 2}, unknowns = {1, 1, 1};
    const auto seq = build_task_sequence(g, knowns, unknowns, {}, 0);
    ModelState s = init_model(g.feature_dim(), c);
    ExemplarStore store(c.exemplars_per_class);
    std::optional<TeacherSnapshot> teacher;
    for (const auto& task : seq.tasks) {
        auto r = train_task(g, task, s, teacher ? &*teacher : nullptr, store, c);
        s = r.state;
        CHECK(s.prototypes.size() == task.cumulative_known.size());
        CHECK(r.best_val_acc >= r.final_val_acc);
        update_exemplars(g, task, s.gnn, c, store);
        for (int cls : task.cumulative_known) CHECK(store.covers(cls));
        teacher.emplace(capture_teacher(s));
    }
}

TEST_CASE("Photo-shaped three-task run") {
    const Graph g = blobs({30, 60, 40, 40, 40, 40, 60, 30}, 3);
    TaskLayout layout{{3, 2, 2}, {1, 1, 1}, {}};
    int hooks = 0;
    const RunReport r = run_sequence(g, layout, small_config(30), [&](const TaskSpec& t, const ModelState& s) {
        ++hooks;
        CHECK(s.tasks_completed == t.task_index);
    });
    CHECK(hooks == 3);
    REQUIRE(r.tasks.size() == 3);
    REQUIRE(r.logs.size() == 3);
    for (const auto& t : r.tasks) {
        CHECK(t.oscr <= t.closed_acc);
        CHECK(t.num_unknown > 0);
        CHECK(t.curve.front().fpr == 0.0);
    }
    // later tasks score every known class so far
    CHECK(r.tasks[2].num_known > r.tasks[0].num_known);
    CHECK(r.decisions.size() >= 3);
    CHECK(r.mean_oscr() == doctest::Approx((r.tasks[0].oscr + r.tasks[1].oscr + r.tasks[2].oscr) / 3));
    CHECK(r.weighted_oscr() <= 1.0);
}

TEST_CASE("run_sequence is bitwise deterministic") {
    const Graph g = blobs({30, 30, 30, 30, 30});
    TaskLayout layout{{2, 2}, {1, 1}, {}};
    const auto a = run_sequence(g, layout, small_config(15, 4));
    const auto b = run_sequence(g, layout, small_config(15, 4));
    REQUIRE(a.tasks.size() == b.tasks.size());
    for (std::size_t i = 0; i < a.tasks.size(); ++i) {
        CHECK(a.tasks[i].oscr == b.tasks[i].oscr);
        CHECK(a.tasks[i].closed_acc == b.tasks[i].closed_acc);
        CHECK(a.tasks[i].auc == b.tasks[i].auc);
    }
    const auto other = run_sequence(g, layout, small_config(15, 5));
    CHECK(other.manifest != a.manifest);
}

TEST_CASE("run_sequence rejects tasks without unknown classes and wraps task errors") {
    const Graph g = blobs({30, 30, 30});
    TaskLayout none{{2}, {0}, {}};
    CHECK_THROWS_AS(run_sequence(g, none, small_config(2)), EngineError);
    TaskLayout too_many{{4}, {1}, {}};
    CHECK_THROWS(run_sequence(g, too_many, small_config(2)));
}

TEST_CASE("no-id ablation leaves task 1 identical") {
    const Graph g = blobs({30, 30, 30, 30, 30});
    TaskLayout layout{{2, 2}, {1, 1}, {}};
    EngineConfig full = small_config(20, 2);
    EngineConfig abl = full;
    abl.ablation = Ablation::no_id;
    const auto a = run_sequence(g, layout, full);
    const auto b = run_sequence(g, layout, abl);
    CHECK(a.tasks[0].oscr == b.tasks[0].oscr);
    CHECK(a.tasks[0].closed_acc == b.tasks[0].closed_acc);
    CHECK(a.tasks[0].auc == b.tasks[0].auc);
    for (std::size_t i = 0; i < a.logs[0].size(); ++i) CHECK(a.logs[0][i].total == b.logs[0][i].total);
    CHECK(b.ablation == "no-id");
}

TEST_CASE("no-phsc ablation trains the unknown prototype") {
    EngineConfig c = small_config(10);
    auto tt = first_task(c);
    c.ablation = Ablation::no_phsc;
    const auto r = train_task(tt.graph, tt.seq.tasks[1], tt.after_first, &tt.teacher, tt.store, c);
    CHECK(r.state.unknown_prototype != tt.after_first.unknown_prototype);
    c.ablation = Ablation::none;
    const auto f = train_task(tt.graph, tt.seq.tasks[1], tt.after_first, &tt.teacher, tt.store, c);
    CHECK(f.state.unknown_prototype == tt.after_first.unknown_prototype);
}

TEST_CASE("ablation names round trip") {
    for (auto a : {Ablation::none, Ablation::no_kd, Ablation::no_phsc, Ablation::no_id, Ablation::no_ood})
        CHECK(parse_ablation(to_string(a)) == a);
    CHECK_THROWS(parse_ablation("no-cvae"));
}

TEST_CASE("softmax baseline reaches full accuracy on separated blobs") {
    const Graph g = blobs({40, 40, 40}, 2, 8.0);
    TaskLayout layout{{2}, {1}, {}};
    const RunReport r = softmax_threshold_baseline(g, layout, small_config(100));
    CHECK(r.method == "softmax-baseline");
    REQUIRE(r.tasks.size() == 1);
    CHECK(r.tasks[0].closed_acc == 1.0);
}

TEST_CASE("seed summary uses the sample standard deviation") {
    std::vector<RunReport> runs(5);
    const double oscr[] = {0.5, 0.6, 0.7, 0.8, 0.9};
    for (int i = 0; i < 5; ++i) {
        MetricsReport m;
        m.oscr = oscr[i];
        m.closed_acc = 1.0;
        m.auc = 0.5;
        m.num_known = 10;
        m.num_unknown = 5;
        runs[static_cast<std::size_t>(i)].tasks = {m};
    }
    const SeedSummary s = summarize_runs(runs);
    CHECK(s.runs == 5);
    CHECK(s.oscr.mean == doctest::Approx(0.7));
    CHECK(s.oscr.stddev == doctest::Approx(std::sqrt(0.025)));
    CHECK(s.acc.stddev == 0.0);
}

#include <doctest.h>

#include <algorithm>
#include <limits>
#include <set>

#include "ogcil/metrics.hpp"
#include "oracles.hpp"

using namespace ogcil;

using oracles::auc_oracle;
using oracles::oscr_oracle;

TEST_CASE("open_set_score examples") {
    PrototypeTable t(2);
    const std::vector<int> cls = {4, 1};
    t = t.register_classes(cls, 0);
    Eigen::VectorXd p4(2), p1(2);
    p4 << 0, 0;
    p1 << 3, 0;
    t.set_prototype(4, p4);
    t.set_prototype(1, p1);

    auto at = open_set_score(p1, t, cls);
    CHECK(at.score == 0.0);
    CHECK(at.predicted == 1);

    Eigen::VectorXd h(2);
    h << 1, 0;  // distance^2 1 to class 4, 4 to class 1
    at = open_set_score(h, t, cls);
    CHECK(at.score == -1.0);
    CHECK(at.predicted == 4);

    h << 1.5, 0;  // tie: lower class id wins
    CHECK(open_set_score(h, t, cls).predicted == 1);

    const std::vector<int> none;
    CHECK_THROWS_AS(open_set_score(h, t, none), MetricsError);
    const std::vector<int> absent = {7};
    CHECK_THROWS(open_set_score(h, t, absent));
}

TEST_CASE("open_set_score matches a linear scan and is translation invariant") {
    Rng rng = make_rng(1);
    const std::vector<int> cls = {0, 1, 2, 3, 4};
    PrototypeTable t = PrototypeTable(6).register_classes(cls, 9);
    t.vectors() = standard_normal(5, 6, rng);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::VectorXd h = standard_normal(6, 1, rng);
        double best = std::numeric_limits<double>::infinity();
        int arg = -1;
        for (int c : cls) {
            double d = 0;
            for (int j = 0; j < 6; ++j) d += (h(j) - t.vectors()(c, j)) * (h(j) - t.vectors()(c, j));
            if (d < best) best = d, arg = c;
        }
        const auto s = open_set_score(h, t, cls);
        CHECK(s.predicted == arg);
        CHECK(s.score == doctest::Approx(-best).epsilon(1e-14));

        const Eigen::VectorXd shift = standard_normal(6, 1, rng) * 5.0;
        PrototypeTable moved = t;
        moved.vectors().rowwise() += shift.transpose();
        CHECK(open_set_score(h + shift, moved, cls).predicted == arg);
    }
    const auto rows = open_set_scores(standard_normal(4, 6, rng), t);
    CHECK(rows.size() == 4);
}

TEST_CASE("closed_set_accuracy") {
    auto pred = [](int p, int t) { return ScoredPrediction{0, p, 0.0, t}; };
    const std::vector<ScoredPrediction> all = {pred(1, 1), pred(2, 2)};
    CHECK(closed_set_accuracy(all) == 1.0);
    const std::vector<ScoredPrediction> none = {pred(1, 2), pred(2, 1)};
    CHECK(closed_set_accuracy(none) == 0.0);
    const std::vector<ScoredPrediction> three = {pred(1, 1), pred(2, 2), pred(3, 3), pred(0, 3)};
    CHECK(closed_set_accuracy(three) == 0.75);
    const std::vector<ScoredPrediction> empty;
    CHECK_THROWS_AS(closed_set_accuracy(empty), MetricsError);
}

TEST_CASE("auc_roc examples") {
    const std::vector<double> k1 = {2, 3}, u1 = {0, 1};
    CHECK(auc_roc(k1, u1) == 1.0);
    CHECK(auc_roc(k1, k1) == 0.5);
    const std::vector<double> k2 = {3, 1}, u2 = {2, 0};
    CHECK(auc_roc(k2, u2) == 0.75);
    const std::vector<double> empty;
    CHECK_THROWS_AS(auc_roc(empty, u1), MetricsError);
    CHECK_THROWS_AS(auc_roc(k1, empty), MetricsError);
}

TEST_CASE("oscr examples") {
    const std::vector<KnownSample> sep = {{5, true}, {4, true}};
    const std::vector<double> low = {1, 2};
    CHECK(oscr(sep, low).area == 1.0);

    const std::vector<KnownSample> wrong = {{5, false}, {-4, false}};
    CHECK(oscr(wrong, low).area == 0.0);

    const std::vector<KnownSample> mixed = {{2, true}, {0, false}};
    const std::vector<double> one = {1};
    const auto r = oscr(mixed, one);
    CHECK(r.area == oscr_oracle(mixed, one));
    CHECK(r.area == 0.5);
    CHECK(r.curve.front().fpr == 0.0);
    CHECK(r.curve.back().fpr == 1.0);

    const std::vector<KnownSample> none;
    CHECK_THROWS_AS(oscr(none, one), MetricsError);
}

TEST_CASE("oscr and auc match brute-force oracles on random inputs") {
    Rng rng = make_rng(3);
    std::uniform_int_distribution<int> n(1, 50), coarse(0, 6);
    std::bernoulli_distribution coin(0.7);
    for (int trial = 0; trial < 300; ++trial) {
        const bool ties = trial % 2 == 0;
        auto draw = [&] { return ties ? static_cast<double>(coarse(rng)) : standard_normal(1, 1, rng)(0, 0); };
        std::vector<KnownSample> known(static_cast<std::size_t>(n(rng)));
        for (auto& k : known) k = {draw(), coin(rng)};
        std::vector<double> unknown(static_cast<std::size_t>(n(rng)));
        for (auto& u : unknown) u = draw();
        CHECK(std::abs(oscr(known, unknown).area - oscr_oracle(known, unknown)) < 1e-12);

        std::vector<double> ks;
        for (const auto& k : known) ks.push_back(k.score);
        CHECK(std::abs(auc_roc(ks, unknown) - auc_oracle(ks, unknown)) < 1e-12);
    }
}

TEST_CASE("metric invariances") {
    Rng rng = make_rng(4);
    std::bernoulli_distribution coin(0.6);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<KnownSample> known(20);
        for (auto& k : known) k = {standard_normal(1, 1, rng)(0, 0) + 0.5, coin(rng)};
        std::vector<double> unknown(15);
        for (auto& u : unknown) u = standard_normal(1, 1, rng)(0, 0);
        std::vector<double> ks;
        for (const auto& k : known) ks.push_back(k.score);
        const double area = oscr(known, unknown).area;
        const double auc = auc_roc(ks, unknown);

        // strictly increasing transform
        auto mono = [](double x) { return std::exp(x) * 3.0 + 1.0; };
        std::vector<double> ks2, us2;
        for (double x : ks) ks2.push_back(mono(x));
        for (double x : unknown) us2.push_back(mono(x));
        CHECK(auc_roc(ks2, us2) == doctest::Approx(auc).epsilon(1e-15));

        // ordering
        auto known_r = known;
        auto unknown_r = unknown;
        std::shuffle(known_r.begin(), known_r.end(), rng);
        std::shuffle(unknown_r.begin(), unknown_r.end(), rng);
        CHECK(oscr(known_r, unknown_r).area == doctest::Approx(area).epsilon(1e-14));
        std::vector<double> ks_r;
        for (const auto& k : known_r) ks_r.push_back(k.score);
        CHECK(auc_roc(ks_r, unknown_r) == doctest::Approx(auc).epsilon(1e-14));

        // duplicating the whole input
        auto known_d = known;
        known_d.insert(known_d.end(), known.begin(), known.end());
        auto unknown_d = unknown;
        unknown_d.insert(unknown_d.end(), unknown.begin(), unknown.end());
        CHECK(oscr(known_d, unknown_d).area == doctest::Approx(area).epsilon(1e-14));
        std::vector<double> ks_d = ks;
        ks_d.insert(ks_d.end(), ks.begin(), ks.end());
        CHECK(auc_roc(ks_d, unknown_d) == doctest::Approx(auc).epsilon(1e-14));

        // oscr never exceeds accuracy
        double acc = 0;
        for (const auto& k : known) acc += k.correct ? 1 : 0;
        CHECK(area <= acc / 20.0 + 1e-15);
    }
}

TEST_CASE("evaluate_predictions assembles the per-task report") {
    std::vector<ScoredPrediction> preds = {
        {0, 1, -0.1, 1}, {1, 2, -0.2, 2}, {2, 1, -0.3, 2}, {3, 1, -5.0, kUnknownTruth}, {4, 2, -0.25, kUnknownTruth}};
    const MetricsReport r = evaluate_predictions(2, preds);
    CHECK(r.task_index == 2);
    CHECK(r.num_known == 3);
    CHECK(r.num_unknown == 2);
    CHECK(r.closed_acc == doctest::Approx(2.0 / 3.0));
    CHECK(r.auc == doctest::Approx(auc_oracle({-0.1, -0.2, -0.3}, {-5.0, -0.25})));
    CHECK(r.oscr <= r.closed_acc);
    CHECK(r.oscr == doctest::Approx(oscr_oracle({{-0.1, true}, {-0.2, true}, {-0.3, false}}, {-5.0, -0.25})));
}

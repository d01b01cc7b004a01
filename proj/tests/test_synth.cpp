#include <doctest.h>

#include <algorithm>
#include <set>

#include "ogcil/synth.hpp"

using namespace ogcil;

namespace {

CvaeParams linear_decoder(const Eigen::MatrixXd& w, const Eigen::MatrixXd& b) {
    Rng rng = make_rng(0);
    CvaeParams p = CvaeParams::init(static_cast<std::size_t>(w.cols()), 4, static_cast<std::size_t>(w.rows()), rng);
    p.decoder.layers = {DenseLayer{w, b}};
    return p;
}

EmbeddingBatch two_point_pool() {
    EmbeddingBatch pool;
    pool.z = Eigen::MatrixXd(2, 2);
    pool.z << 0, 0, 1, 1;
    pool.labels = {0, 1};
    pool.node_ids = {0, 1};
    pool.provenance = {Provenance::real, Provenance::real};
    return pool;
}

}  // namespace

TEST_CASE("split_counts: remainder to the lowest class ids") {
    const std::vector<int> classes = {4, 1, 3};
    CHECK(split_counts(classes, 300) == std::vector<int>{100, 100, 100});
    // remainder goes to class 1 then 3
    CHECK(split_counts(classes, 8) == std::vector<int>{2, 3, 3});
    CHECK(split_counts(classes, 0) == std::vector<int>{0, 0, 0});
    CHECK(split_counts(classes, 1) == std::vector<int>{0, 1, 0});
}

TEST_CASE("pseudo-ID: zero noise through an identity decoder returns the prototypes") {
    const std::vector<int> classes = {0, 1, 2};
    const PrototypeTable table = PrototypeTable(3).register_classes(classes, 5);
    const CvaeParams p = linear_decoder(Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Zero(1, 3));
    const std::vector<int> old = {2, 0};
    const EmbeddingBatch b = generate_pseudo_id(table, old, 5, p, Eigen::MatrixXd::Zero(5, 3));
    REQUIRE(b.size() == 5);
    for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(b.provenance[i] == Provenance::pseudo_id);
        CHECK(b.node_ids[i] == -1);
        CHECK((b.z.row(static_cast<Eigen::Index>(i)).transpose() - table.prototype(b.labels[i])).cwiseAbs().maxCoeff() ==
              0.0);
    }
    CHECK(std::count(b.labels.begin(), b.labels.end(), 0) == 3);
    CHECK(std::count(b.labels.begin(), b.labels.end(), 2) == 2);

    Rng rng = make_rng(1);
    CHECK(generate_pseudo_id(table, old, 0, p, rng).empty());
    const std::vector<int> missing = {9};
    CHECK_THROWS_AS(generate_pseudo_id(table, missing, 3, p, rng), std::invalid_argument);
}

TEST_CASE("pseudo-ID: Monte Carlo mean through a linear decoder") {
    const std::vector<int> classes = {0};
    const PrototypeTable table = PrototypeTable(3).register_classes(classes, 2);
    Rng wr = make_rng(9);
    const Eigen::MatrixXd w = standard_normal(3, 4, wr);
    const Eigen::MatrixXd b = standard_normal(1, 4, wr);
    const CvaeParams p = linear_decoder(w, b);
    Rng rng = make_rng(10);
    const EmbeddingBatch out = generate_pseudo_id(table, classes, 10000, p, rng);
    const Eigen::RowVectorXd mean = out.z.colwise().mean();
    // rows are samples, so the decoder computes h W + b
    const Eigen::RowVectorXd expect = table.prototype(0).transpose() * w + b;
    const double spectral = Eigen::JacobiSVD<Eigen::MatrixXd>(w).singularValues()(0);
    CHECK((mean - expect).norm() < 4.0 * spectral / 100.0);
}

TEST_CASE("pseudo-ID is deterministic given the rng seed") {
    const std::vector<int> classes = {0, 1};
    const PrototypeTable table = PrototypeTable(4).register_classes(classes, 3);
    Rng r0 = make_rng(0);
    CvaeParams p = CvaeParams::init(4, 4, 4, r0);
    p.decoder.layers.back().weight = standard_normal(4, 4, r0);
    Rng a = make_rng(77), b = make_rng(77);
    CHECK(generate_pseudo_id(table, classes, 9, p, a).z == generate_pseudo_id(table, classes, 9, p, b).z);
}

TEST_CASE("mix_pair") {
    Eigen::VectorXd z1(2), z2(2);
    z1 << 0, 0;
    z2 << 2, 4;
    CHECK(mix_pair(z1, z2, 1.0) == z1);
    CHECK(mix_pair(z1, z2, 0.0) == z2);
    const Eigen::VectorXd half = mix_pair(z1, z2, 0.5);
    CHECK(half(0) == 1.0);
    CHECK(half(1) == 2.0);
    CHECK_THROWS_AS(mix_pair(z1, z2, 1.5), SynthError);
    CHECK_THROWS_AS(mix_pair(z1, z2, -0.1), SynthError);
    CHECK_THROWS_AS(mix_pair(z1, Eigen::VectorXd::Zero(3), 0.5), SynthError);
}

TEST_CASE("pseudo-OOD: segment, sentinel and count") {
    MixConfig cfg;
    cfg.beta = 5.0;
    Rng rng = make_rng(4);
    CHECK(generate_pseudo_ood(two_point_pool(), 0, cfg, rng).empty());
    std::vector<MixRecord> rec;
    const EmbeddingBatch out = generate_pseudo_ood(two_point_pool(), 200, cfg, rng, &rec);
    REQUIRE(out.size() == 200);
    REQUIRE(rec.size() == 200);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        CHECK(out.labels[i] == kOodClass);
        CHECK(out.provenance[i] == Provenance::pseudo_ood);
        CHECK(out.z(r, 0) == doctest::Approx(out.z(r, 1)));
        CHECK(out.z(r, 0) >= 0.0);
        CHECK(out.z(r, 0) <= 1.0);
    }
}

TEST_CASE("pseudo-OOD: every output is a convex mix of two different classes") {
    Rng rng = make_rng(5);
    EmbeddingBatch pool;
    pool.z = standard_normal(12, 3, rng);
    for (int i = 0; i < 12; ++i) {
        pool.labels.push_back(i % 4);
        pool.node_ids.push_back(i < 8 ? i : -1);
        pool.provenance.push_back(i < 8 ? Provenance::real : Provenance::pseudo_id);
    }
    MixConfig cfg;
    std::vector<MixRecord> rec;
    const EmbeddingBatch out = generate_pseudo_ood(pool, 500, cfg, rng, &rec);
    std::set<std::pair<int, int>> kinds;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& m = rec[i];
        CHECK(pool.labels[static_cast<std::size_t>(m.first)] != pool.labels[static_cast<std::size_t>(m.second)]);
        CHECK(m.alpha >= 0.0);
        CHECK(m.alpha <= 1.0);
        const Eigen::RowVectorXd expect = m.alpha * pool.z.row(m.first) + (1 - m.alpha) * pool.z.row(m.second);
        CHECK((out.z.row(static_cast<Eigen::Index>(i)) - expect).cwiseAbs().maxCoeff() < 1e-15);
        kinds.insert({m.first >= 8, m.second >= 8});
    }
    // real-pseudo cross pairs do occur
    CHECK(kinds.count({false, true}) + kinds.count({true, false}) > 0);
}

TEST_CASE("pseudo-OOD: single-class pool rejected") {
    EmbeddingBatch pool = two_point_pool();
    pool.labels = {3, 3};
    MixConfig cfg;
    Rng rng = make_rng(6);
    CHECK_THROWS_AS(generate_pseudo_ood(pool, 5, cfg, rng), SynthError);
}

TEST_CASE("Beta(5,5) mixing weight has mean 0.5") {
    MixConfig cfg;
    cfg.beta = 5.0;
    Rng rng = make_rng(7);
    std::vector<MixRecord> rec;
    generate_pseudo_ood(two_point_pool(), 100000, cfg, rng, &rec);
    double sum = 0.0;
    for (const auto& r : rec) sum += r.alpha;
    const double mean = sum / static_cast<double>(rec.size());
    CHECK(mean >= 0.494);
    CHECK(mean <= 0.506);
}

TEST_CASE("Beta(1,1) mixing weight is uniform (KS at 1%)") {
    MixConfig cfg;
    cfg.beta = 1.0;
    Rng rng = make_rng(8);
    std::vector<MixRecord> rec;
    generate_pseudo_ood(two_point_pool(), 100000, cfg, rng, &rec);
    std::vector<double> a;
    for (const auto& r : rec) a.push_back(r.alpha);
    std::sort(a.begin(), a.end());
    const double n = static_cast<double>(a.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max({d, (static_cast<double>(i) + 1.0) / n - a[i], a[i] - static_cast<double>(i) / n});
    CHECK(d < 1.628 / std::sqrt(n));
}

TEST_CASE("MixConfig validation") {
    MixConfig c;
    c.beta = 0.0;
    CHECK_THROWS_AS(c.validate(), SynthError);
    c.beta = 5.0;
    c.regen_interval = 0;
    CHECK_THROWS_AS(c.validate(), SynthError);
    c.regen_interval = 1;
    c.count_id = -1;
    CHECK_THROWS_AS(c.validate(), SynthError);
}

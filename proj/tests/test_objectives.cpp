#include <doctest.h>

#include <cmath>
#include <limits>

#include "gradcheck.hpp"
#include "ogcil/objectives.hpp"

using namespace ogcil;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

// One-layer identity-ish CVAE: encoder emits [mu | logvar] from hand-set weights.
CvaeParams linear_cvae(const Eigen::MatrixXd& enc_w, const Eigen::MatrixXd& enc_b, const Eigen::MatrixXd& dec_w,
                       const Eigen::MatrixXd& dec_b) {
    CvaeParams c;
    c.encoder.layers = {{enc_w, enc_b}};
    c.decoder.layers = {{dec_w, dec_b}};
    return c;
}

EmbeddingBatch batch_of(const Eigen::MatrixXd& z, std::vector<int> labels) {
    std::vector<Provenance> prov;
    for (int y : labels) prov.push_back(y == kOodClass ? Provenance::pseudo_ood : Provenance::real);
    EmbeddingBatch b;
    b.z = z;
    b.node_ids.assign(labels.size(), -1);
    b.labels = std::move(labels);
    b.provenance = std::move(prov);
    return b;
}

PrototypeTable table_with(const Eigen::MatrixXd& rows) {
    std::vector<int> ids;
    for (int i = 0; i < rows.rows(); ++i) ids.push_back(i);
    PrototypeTable t = PrototypeTable(static_cast<std::size_t>(rows.cols())).register_classes(ids, 0);
    t.vectors() = rows;
    return t;
}

}  // namespace

TEST_CASE("kl_to_prototype closed-form examples") {
    CHECK(kl_to_prototype(vec({0.3, -1}), vec({1, 1}), vec({0.3, -1})) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(kl_to_prototype(vec({1.5}), vec({1}), vec({0.5})) == doctest::Approx(0.5));
    CHECK(kl_to_prototype(vec({0}), vec({2}), vec({0})) == doctest::Approx(0.5 * (4 - 1 - 2 * std::log(2.0))));
    CHECK_THROWS_AS(kl_to_prototype(vec({0}), vec({0}), vec({0})), LossError);
    CHECK_THROWS_AS(kl_to_prototype(vec({0}), vec({-1}), vec({0})), LossError);
    CHECK_THROWS_AS(kl_to_prototype(vec({0, 1}), vec({1}), vec({0})), LossError);
}

TEST_CASE("kl_to_prototype is non-negative and zero only at the prior") {
    Rng rng = make_rng(7);
    for (int k = 0; k < 2000; ++k) {
        const Eigen::VectorXd mu = standard_normal(4, 1, rng);
        const Eigen::VectorXd sigma = (standard_normal(4, 1, rng)).array().exp().matrix();
        const Eigen::VectorXd p = standard_normal(4, 1, rng);
        CHECK(kl_to_prototype(mu, sigma, p) >= 0.0);
    }
    const Eigen::VectorXd p = vec({0.1, 0.2, 0.3});
    CHECK(std::abs(kl_to_prototype(p, Eigen::VectorXd::Ones(3), p)) <= 1e-12);
    CHECK(kl_to_prototype(p, Eigen::VectorXd::Constant(3, 1.001), p) > 0.0);
}

TEST_CASE("pcvae_loss vanishes for exact reconstruction at the prior") {
    // mu = 0 (= prototype), logvar = 0, decoder maps h back to z only if eps = 0 and z = bias.
    const Eigen::MatrixXd enc_w = Eigen::MatrixXd::Zero(2, 4);
    const Eigen::MatrixXd enc_b = Eigen::MatrixXd::Zero(1, 4);
    const Eigen::MatrixXd dec_w = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd dec_b(1, 2);
    dec_b << 0.5, -0.25;
    const CvaeParams cvae = linear_cvae(enc_w, enc_b, dec_w, dec_b);
    const PrototypeTable table = table_with(Eigen::MatrixXd::Zero(1, 2));
    Eigen::MatrixXd z(2, 2);
    z << 0.5, -0.25, 0.5, -0.25;
    const auto b = batch_of(z, {0, 0});
    const Eigen::MatrixXd eps = Eigen::MatrixXd::Zero(2, 2);
    CHECK(pcvae_loss(b, cvae, table, LossWeights{10, 0}, eps) == doctest::Approx(0.0));
}

TEST_CASE("pcvae_loss with zero reconstruction weight is the mean KL") {
    const auto fx = gradcheck::make_fixture(3);
    const auto b = gradcheck::labeled_rows(fx.batch);
    const auto post = cvae_encode_batch(b.z, fx.state.cvae);
    double kl = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        kl += kl_to_prototype(post.mu.row(r).transpose(), post.sigma.row(r).transpose(),
                              fx.state.prototypes.prototype(b.labels[i]));
    }
    CHECK(pcvae_loss(b, fx.state.cvae, fx.state.prototypes, LossWeights{0, 0}, fx.eps) ==
          doctest::Approx(kl / static_cast<double>(b.size())).epsilon(1e-12));
}

TEST_CASE("pcvae_loss matches a hand trace on a two-sample batch") {
    // d = d_l = 1. Encoder: mu = 2z + 0.1, logvar = -z. Decoder: zhat = 0.5h - 0.2.
    Eigen::MatrixXd enc_w(1, 2), enc_b(1, 2), dec_w(1, 1), dec_b(1, 1);
    enc_w << 2.0, -1.0;
    enc_b << 0.1, 0.0;
    dec_w << 0.5;
    dec_b << -0.2;
    const CvaeParams cvae = linear_cvae(enc_w, enc_b, dec_w, dec_b);
    Eigen::MatrixXd protos(2, 1);
    protos << 0.3, -0.4;
    const PrototypeTable table = table_with(protos);
    Eigen::MatrixXd z(2, 1), eps(2, 1);
    z << 0.4, -0.6;
    eps << 0.7, -1.1;
    const auto b = batch_of(z, {0, 1});

    double expect = 0.0;
    const double zs[2] = {0.4, -0.6}, es[2] = {0.7, -1.1}, ps[2] = {0.3, -0.4};
    for (int i = 0; i < 2; ++i) {
        const double mu = 2 * zs[i] + 0.1;
        const double lv = -zs[i];
        const double sigma = std::exp(0.5 * lv);
        const double h = mu + sigma * es[i];
        const double zhat = 0.5 * h - 0.2;
        const double recon = (zs[i] - zhat) * (zs[i] - zhat);
        const double kl = 0.5 * (sigma * sigma + (mu - ps[i]) * (mu - ps[i]) - 1 - lv);
        expect += 10 * recon + kl;
    }
    expect /= 2;
    CHECK(pcvae_loss(b, cvae, table, LossWeights{10, 0}, eps) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("pcvae_loss rejects OOD rows") {
    auto fx = gradcheck::make_fixture(1);
    Eigen::MatrixXd eps = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(fx.batch.size()), 8);
    CHECK_THROWS_AS(pcvae_loss(fx.batch, fx.state.cvae, fx.state.prototypes, LossWeights{1, 0}, eps), LossError);
}

TEST_CASE("phsc_loss closed-form examples") {
    // Encoder with mu = z, so h is set directly.
    Eigen::MatrixXd enc_w = Eigen::MatrixXd::Zero(2, 4);
    enc_w.leftCols(2) = Eigen::MatrixXd::Identity(2, 2);
    const CvaeParams cvae =
        linear_cvae(enc_w, Eigen::MatrixXd::Zero(1, 4), Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(1, 2));
    Eigen::MatrixXd p(1, 2);
    p << 0.2, -0.1;
    const PrototypeTable one = table_with(p);

    SUBCASE("sample on its prototype") {
        CHECK(phsc_loss(batch_of(p, {0}), cvae, one) == doctest::Approx(-std::log(1 - 1e-7)));
        CHECK(phsc_loss(batch_of(p, {0}), cvae, one) < 1e-6);
    }
    SUBCASE("far OOD sample costs nothing") {
        Eigen::MatrixXd far(1, 2);
        far << 1e3, 1e3;
        CHECK(phsc_loss(batch_of(far, {kOodClass}), cvae, one) == doctest::Approx(-std::log1p(-1e-7)));
    }
    SUBCASE("negative at squared distance ln 2") {
        Eigen::MatrixXd h = p;
        h(0, 0) += std::sqrt(std::log(2.0));
        CHECK(phsc_loss(batch_of(h, {kOodClass}), cvae, one) == doctest::Approx(0.693147).epsilon(1e-5));
    }
    SUBCASE("empty table") {
        CHECK_THROWS_AS(phsc_loss(batch_of(p, {0}), cvae, PrototypeTable(2)), LossError);
    }
}

TEST_CASE("phsc_loss attracts positives and repels OOD rows") {
    Eigen::MatrixXd enc_w = Eigen::MatrixXd::Zero(3, 6);
    enc_w.leftCols(3) = Eigen::MatrixXd::Identity(3, 3);
    const CvaeParams cvae =
        linear_cvae(enc_w, Eigen::MatrixXd::Zero(1, 6), Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Zero(1, 3));
    Rng rng = make_rng(11);
    for (int k = 0; k < 50; ++k) {
        const Eigen::MatrixXd protos = standard_normal(3, 3, rng);
        const Eigen::RowVectorXd h = standard_normal(1, 3, rng);
        const Eigen::RowVectorXd toward = protos.row(1) - h;
        const PrototypeTable single = table_with(protos.row(1));
        double prev = phsc_loss(batch_of(h, {0}), cvae, single);
        for (double a : {0.2, 0.4, 0.6, 0.8, 0.95}) {
            const double cur = phsc_loss(batch_of(h + a * toward, {0}), cvae, single);
            CHECK(cur <= prev);
            prev = cur;
        }
        const Eigen::RowVectorXd away = h - protos.row(1);
        prev = phsc_loss(batch_of(h, {kOodClass}), cvae, single);
        for (double a : {0.2, 0.5, 1.0, 2.0}) {
            const double cur = phsc_loss(batch_of(h + a * away, {kOodClass}), cvae, single);
            CHECK(cur <= prev);
            prev = cur;
        }
    }
}

TEST_CASE("kd_loss") {
    Eigen::MatrixXd s(1, 1), t(1, 1);
    s << 1;
    t << 3;
    CHECK(kd_loss(s, t) == doctest::Approx(4.0));
    CHECK(kd_loss(t, t) == 0.0);
    Rng rng = make_rng(5);
    const Eigen::MatrixXd a = standard_normal(5, 4, rng), b = standard_normal(5, 4, rng);
    double sum = 0;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) sum += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
    CHECK(kd_loss(a, b) == doctest::Approx(sum / 5).epsilon(1e-14));
    CHECK_THROWS_AS(kd_loss(a, standard_normal(4, 4, rng)), LossError);
}

TEST_CASE("total_loss") {
    CHECK(total_loss({1, 2, 3}, LossWeights{10, 100}, true) == 303.0);
    CHECK(total_loss({1, 2, 3}, LossWeights{10, 100}, false) == 3.0);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    try {
        total_loss({1, nan, 3}, LossWeights{10, 100}, true);
        FAIL("expected an error");
    } catch (const LossError& e) {
        CHECK(std::string(e.what()).find("pcvae") != std::string::npos);
    }
    CHECK_THROWS_WITH_AS(total_loss({nan, 0, 0}, LossWeights{1, 1}, true), doctest::Contains("phsc"), LossError);
    CHECK_THROWS_WITH_AS(total_loss({0, 0, nan}, LossWeights{1, 1}, true), doctest::Contains("kd"), LossError);
    CHECK_THROWS_AS(LossWeights({-1, 0}).validate(), LossError);
}

TEST_CASE("losses are invariant to batch order") {
    auto fx = gradcheck::make_fixture(9);
    const double a = phsc_loss(fx.batch, fx.state.cvae, fx.state.prototypes);
    EmbeddingBatch r = fx.batch;
    r.z = fx.batch.z.colwise().reverse();
    std::reverse(r.labels.begin(), r.labels.end());
    std::reverse(r.provenance.begin(), r.provenance.end());
    CHECK(phsc_loss(r, fx.state.cvae, fx.state.prototypes) == doctest::Approx(a).epsilon(1e-13));
}

TEST_CASE("analytic gradients match central differences") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        CAPTURE(seed);
        CHECK(gradcheck::check_kl(seed).worst < 1e-4);
        CHECK(gradcheck::check_pcvae(seed).worst < 1e-4);
        CHECK(gradcheck::check_phsc(seed).worst < 1e-4);
        CHECK(gradcheck::check_unknown_ce(seed).worst < 1e-4);
        CHECK(gradcheck::check_kd(seed).worst < 1e-4);
        CHECK(gradcheck::check_total(seed).worst < 1e-4);
        CHECK(gradcheck::check_total(seed, false).worst < 1e-4);
    }
}

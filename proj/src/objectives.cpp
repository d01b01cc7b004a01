#include "ogcil/objectives.hpp"

#include <cmath>
#include <string>

namespace ogcil {

namespace {

void check_batch(const EmbeddingBatch& batch, const CvaeParams& cvae) {
    batch.validate();
    if (!batch.empty() && static_cast<std::size_t>(batch.z.cols()) != cvae.embed_dim())
        throw LossError("embedding width " + std::to_string(batch.z.cols()) + " != CVAE input width " +
                        std::to_string(cvae.embed_dim()));
}

}  // namespace

PosteriorGrad PosteriorGrad::zeros(const PosteriorBatch& post) {
    return {Eigen::MatrixXd::Zero(post.mu.rows(), post.mu.cols()),
            Eigen::MatrixXd::Zero(post.log_var.rows(), post.log_var.cols())};
}

void encoder_backprop(const PosteriorBatch& post, const CvaeParams& cvae, const PosteriorGrad& pg, ObjectiveGrad& grad) {
    Eigen::MatrixXd d_head(pg.mu.rows(), pg.mu.cols() + pg.log_var.cols());
    d_head << pg.mu, pg.log_var;
    grad.z += cvae.encoder.backward(post.trace, d_head, grad.cvae.encoder);
}

void LossWeights::validate() const {
    if (!std::isfinite(reconst) || reconst < 0.0) throw LossError("lambda_reconst must be finite and >= 0");
    if (!std::isfinite(kd) || kd < 0.0) throw LossError("lambda_kd must be finite and >= 0");
}

ObjectiveGrad ObjectiveGrad::zeros(Eigen::Index batch_rows, const CvaeParams& cvae, const PrototypeTable& table) {
    ObjectiveGrad g;
    g.z = Eigen::MatrixXd::Zero(batch_rows, static_cast<Eigen::Index>(cvae.embed_dim()));
    g.cvae = cvae.zeros_like();
    g.prototypes = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(table.size()), static_cast<Eigen::Index>(table.dim()));
    g.unknown_prototype = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(table.dim()));
    return g;
}

double kl_to_prototype(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma, const Eigen::VectorXd& p) {
    if (mu.size() != sigma.size() || mu.size() != p.size()) throw LossError("kl_to_prototype: length mismatch");
    if ((sigma.array() <= 0.0).any()) throw LossError("kl_to_prototype: sigma must be strictly positive");
    const auto s2 = sigma.array().square();
    return 0.5 * (s2 + (mu - p).array().square() - 1.0 - s2.log()).sum();
}

double kl_to_prototype(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma, const Eigen::VectorXd& p,
                       KlGrad& grad) {
    const double v = kl_to_prototype(mu, sigma, p);
    grad.mu = mu - p;
    grad.p = p - mu;
    grad.sigma = (sigma.array() - sigma.array().inverse()).matrix();
    return v;
}

double pcvae_from_posterior(const EmbeddingBatch& batch, const PosteriorBatch& post, const CvaeParams& cvae,
                            const PrototypeTable& table, const LossWeights& weights, const Eigen::MatrixXd& eps,
                            ObjectiveGrad* grad, PosteriorGrad* post_grad) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    if (n == 0) return 0.0;
    const auto dl = static_cast<Eigen::Index>(cvae.latent_dim());
    if (eps.rows() != n || eps.cols() != dl) throw LossError("pcvae_loss: noise shape mismatch");
    if (post.mu.rows() < n) throw LossError("pcvae_loss: posterior has fewer rows than the batch");

    Eigen::MatrixXd protos(n, dl);
    std::vector<Eigen::Index> proto_rows(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = batch.labels[static_cast<std::size_t>(i)];
        if (y == kOodClass) throw LossError("pcvae_loss: batch contains an OOD-sentinel sample");
        proto_rows[static_cast<std::size_t>(i)] = table.row_of(y);
        protos.row(i) = table.vectors().row(proto_rows[static_cast<std::size_t>(i)]);
    }

    const auto mu = post.mu.topRows(n);
    const auto log_var = post.log_var.topRows(n);
    const auto sigma = post.sigma.topRows(n);
    const Eigen::MatrixXd h = mu + sigma.cwiseProduct(eps);
    MlpTrace dec_trace;
    const Eigen::MatrixXd recon = cvae.decoder.forward(h, &dec_trace);
    const Eigen::MatrixXd residual = recon - batch.z;

    const Eigen::ArrayXXd clamped = log_var.array().max(kLogVarMin).min(kLogVarMax);
    const Eigen::ArrayXXd s2 = sigma.array().square();
    const Eigen::MatrixXd diff = mu - protos;
    const double recon_sum = residual.squaredNorm();
    const double kl_sum = 0.5 * (s2 + diff.array().square() - 1.0 - clamped).sum();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double loss = (weights.reconst * recon_sum + kl_sum) * inv_n;

    if (grad) {
        const Eigen::MatrixXd d_recon = (2.0 * weights.reconst * inv_n) * residual;
        grad->z.topRows(n) -= d_recon;
        const Eigen::MatrixXd d_h = cvae.decoder.backward(dec_trace, d_recon, grad->cvae.decoder);
        const Eigen::ArrayXXd in_range = ((log_var.array() >= kLogVarMin) && (log_var.array() <= kLogVarMax)).cast<double>();
        post_grad->mu.topRows(n) += d_h + inv_n * diff;
        post_grad->log_var.topRows(n) +=
            (in_range * (d_h.array() * eps.array() * 0.5 * sigma.array() + inv_n * 0.5 * (s2 - 1.0))).matrix();
        for (Eigen::Index i = 0; i < n; ++i)
            grad->prototypes.row(proto_rows[static_cast<std::size_t>(i)]) -= inv_n * diff.row(i);
    }
    return loss;
}

double pcvae_loss(const EmbeddingBatch& batch, const CvaeParams& cvae, const PrototypeTable& table,
                  const LossWeights& weights, const Eigen::MatrixXd& eps, ObjectiveGrad* grad) {
    check_batch(batch, cvae);
    weights.validate();
    if (batch.empty()) return 0.0;
    const PosteriorBatch post = cvae_encode_batch(batch.z, cvae);
    PosteriorGrad pg = PosteriorGrad::zeros(post);
    const double loss = pcvae_from_posterior(batch, post, cvae, table, weights, eps, grad, &pg);
    if (grad) encoder_backprop(post, cvae, pg, *grad);
    return loss;
}

double pcvae_loss(const EmbeddingBatch& batch, const CvaeParams& cvae, const PrototypeTable& table,
                  const LossWeights& weights, Rng& rng) {
    const Eigen::MatrixXd eps =
        standard_normal(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(cvae.latent_dim()), rng);
    return pcvae_loss(batch, cvae, table, weights, eps);
}

double phsc_from_posterior(const EmbeddingBatch& batch, const PosteriorBatch& post, const PrototypeTable& table,
                           ObjectiveGrad* grad, PosteriorGrad* post_grad) {
    if (table.empty()) throw LossError("phsc_loss: empty prototype table");
    const auto n = static_cast<Eigen::Index>(batch.size());
    if (n == 0) return 0.0;
    const Eigen::MatrixXd& protos = table.vectors();
    std::vector<Eigen::Index> target(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = batch.labels[static_cast<std::size_t>(i)];
        target[static_cast<std::size_t>(i)] = (y == kOodClass) ? -1 : table.row_of(y);
    }

    // Squared distances n x C via the expansion |h|^2 - 2 h.p + |p|^2, then clamped similarities.
    const Eigen::MatrixXd mu = post.mu.topRows(n);
    Eigen::MatrixXd d2 = (-2.0 * mu * protos.transpose());
    d2.colwise() += mu.rowwise().squaredNorm();
    d2.rowwise() += protos.rowwise().squaredNorm().transpose();
    d2 = d2.cwiseMax(0.0);

    const double lo = kProbClamp;
    const double hi = 1.0 - kProbClamp;
    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(n, protos.rows());  // dTerm/d(d2)
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index c = 0; c < protos.rows(); ++c) {
            const double l = std::exp(-d2(i, c));
            const double lc = std::min(std::max(l, lo), hi);
            const bool clamped = l < lo || l > hi;
            if (c == target[static_cast<std::size_t>(i)]) {
                total += -std::log(lc);
                if (!clamped) coef(i, c) = 1.0;
            } else {
                total += -std::log1p(-lc);
                if (!clamped) coef(i, c) = -l / (1.0 - l);
            }
        }
    if (grad) {
        // d/dmu_i = 2 sum_c coef_ic (mu_i - p_c); d/dp_c = -2 sum_i coef_ic (mu_i - p_c)
        coef *= 2.0 * inv_n;
        const Eigen::VectorXd row_sum = coef.rowwise().sum();
        const Eigen::VectorXd col_sum = coef.colwise().sum().transpose();
        post_grad->mu.topRows(n) += row_sum.asDiagonal() * mu - coef * protos;
        grad->prototypes -= coef.transpose() * mu - col_sum.asDiagonal() * protos;
    }
    return total * inv_n;
}

double phsc_loss(const EmbeddingBatch& batch, const CvaeParams& cvae, const PrototypeTable& table, ObjectiveGrad* grad) {
    if (table.empty()) throw LossError("phsc_loss: empty prototype table");
    check_batch(batch, cvae);
    if (batch.empty()) return 0.0;
    const PosteriorBatch post = cvae_encode_batch(batch.z, cvae);
    PosteriorGrad pg = PosteriorGrad::zeros(post);
    const double loss = phsc_from_posterior(batch, post, table, grad, &pg);
    if (grad) encoder_backprop(post, cvae, pg, *grad);
    return loss;
}

double unknown_ce_from_posterior(const EmbeddingBatch& batch, const PosteriorBatch& post, const PrototypeTable& table,
                                 const Eigen::MatrixXd& unknown_prototype, ObjectiveGrad* grad,
                                 PosteriorGrad* post_grad) {
    if (table.empty()) throw LossError("unknown_prototype_ce_loss: empty prototype table");
    const auto n = static_cast<Eigen::Index>(batch.size());
    if (n == 0) return 0.0;
    const auto known = static_cast<Eigen::Index>(table.size());
    Eigen::MatrixXd protos(known + 1, static_cast<Eigen::Index>(table.dim()));
    protos << table.vectors(), unknown_prototype;

    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::MatrixXd d_mu;
    if (grad) d_mu = Eigen::MatrixXd::Zero(n, post.mu.cols());
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = batch.labels[static_cast<std::size_t>(i)];
        const Eigen::Index target = (y == kOodClass) ? known : table.row_of(y);
        const Eigen::MatrixXd delta = (-protos).rowwise() + post.mu.row(i);  // rows: mu - p_c
        const Eigen::VectorXd logits = -delta.rowwise().squaredNorm();
        const double m = logits.maxCoeff();
        const Eigen::VectorXd ex = (logits.array() - m).exp().matrix();
        const double z = ex.sum();
        total += -(logits(target) - m - std::log(z));
        if (grad) {
            Eigen::VectorXd d_logit = ex / z;
            d_logit(target) -= 1.0;
            for (Eigen::Index c = 0; c <= known; ++c) {
                // logit = -d2, d(d2)/d(mu) = 2 delta
                const Eigen::RowVectorXd g = (-2.0 * inv_n * d_logit(c)) * delta.row(c);
                d_mu.row(i) += g;
                if (c < known)
                    grad->prototypes.row(c) -= g;
                else
                    grad->unknown_prototype.row(0) -= g;
            }
        }
    }
    if (grad) post_grad->mu.topRows(n) += d_mu;
    return total * inv_n;
}

double unknown_prototype_ce_loss(const EmbeddingBatch& batch, const CvaeParams& cvae, const PrototypeTable& table,
                                 const Eigen::MatrixXd& unknown_prototype, ObjectiveGrad* grad) {
    if (table.empty()) throw LossError("unknown_prototype_ce_loss: empty prototype table");
    check_batch(batch, cvae);
    if (batch.empty()) return 0.0;
    const PosteriorBatch post = cvae_encode_batch(batch.z, cvae);
    PosteriorGrad pg = PosteriorGrad::zeros(post);
    const double loss = unknown_ce_from_posterior(batch, post, table, unknown_prototype, grad, &pg);
    if (grad) encoder_backprop(post, cvae, pg, *grad);
    return loss;
}

double kd_loss(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher, Eigen::MatrixXd* d_student) {
    if (student.rows() != teacher.rows() || student.cols() != teacher.cols())
        throw LossError("kd_loss: student " + std::to_string(student.rows()) + "x" + std::to_string(student.cols()) +
                        " vs teacher " + std::to_string(teacher.rows()) + "x" + std::to_string(teacher.cols()));
    if (student.rows() == 0) {
        if (d_student) d_student->resize(0, student.cols());
        return 0.0;
    }
    const Eigen::MatrixXd diff = teacher - student;
    const double inv_n = 1.0 / static_cast<double>(student.rows());
    if (d_student) *d_student = (-2.0 * inv_n) * diff;
    return diff.squaredNorm() * inv_n;
}

double total_loss(const LossComponents& c, const LossWeights& weights, bool with_distillation) {
    weights.validate();
    if (!std::isfinite(c.phsc)) throw LossError("total_loss: non-finite phsc term");
    if (!std::isfinite(c.pcvae)) throw LossError("total_loss: non-finite pcvae term");
    if (!std::isfinite(c.kd)) throw LossError("total_loss: non-finite kd term");
    double total = c.phsc + c.pcvae;
    if (with_distillation) total += weights.kd * c.kd;
    return total;
}

}  // namespace ogcil

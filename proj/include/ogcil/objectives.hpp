#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "ogcil/embedding.hpp"
#include "ogcil/model.hpp"
#include "ogcil/rng.hpp"

namespace ogcil {

// Similarity clamp applied before taking logs in the hypersphere loss.
inline constexpr double kProbClamp = 1e-7;

class LossError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct LossWeights {
    double reconst = 0.0;
    double kd = 0.0;

    void validate() const;
};

// Gradients accumulated by the loss functions (+=), one slot per input group.
struct ObjectiveGrad {
    Eigen::MatrixXd z;                  // batch rows x d
    CvaeParams cvae;
    Eigen::MatrixXd prototypes;         // table rows x d_l
    Eigen::MatrixXd unknown_prototype;  // 1 x d_l

    static ObjectiveGrad zeros(Eigen::Index batch_rows, const CvaeParams& cvae, const PrototypeTable& table);
};

// KL( N(mu, diag sigma^2) || N(p, I) ).
double kl_to_prototype(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma, const Eigen::VectorXd& p);

struct KlGrad {
    Eigen::VectorXd mu, sigma, p;
};
// Same value, plus its partial derivatives.
double kl_to_prototype(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma, const Eigen::VectorXd& p,
                       KlGrad& grad);

// Mean over the batch of reconst * ||z - dec(mu + sigma*eps)||^2 + KL(q(h|z) || N(p_y, I)).
// `eps` holds one standard-normal draw per row (batch rows x latent).
double pcvae_loss(const EmbeddingBatch& batch, const CvaeParams& cvae, const PrototypeTable& table,
                  const LossWeights& weights, const Eigen::MatrixXd& eps, ObjectiveGrad* grad = nullptr);

double pcvae_loss(const EmbeddingBatch& batch, const CvaeParams& cvae, const PrototypeTable& table,
                  const LossWeights& weights, Rng& rng);

// Per-class binary cross-entropy on l = exp(-||mu(z) - p_c||^2), averaged over the batch.
// OOD-sentinel rows are negatives for every class.
double phsc_loss(const EmbeddingBatch& batch, const CvaeParams& cvae, const PrototypeTable& table,
                 ObjectiveGrad* grad = nullptr);

// Softmax cross-entropy over logits -||mu(z) - p||^2 with one extra prototype that
// absorbs every OOD-sentinel row. Replacement classifier for the ablation study.
double unknown_prototype_ce_loss(const EmbeddingBatch& batch, const CvaeParams& cvae, const PrototypeTable& table,
                                 const Eigen::MatrixXd& unknown_prototype, ObjectiveGrad* grad = nullptr);

// Mean squared row distance; optionally writes dLoss/dStudent.
double kd_loss(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher, Eigen::MatrixXd* d_student = nullptr);

// Forms that take an encoder pass computed once for a larger batch whose leading rows are
// `batch`. Gradients with respect to [mu | log-variance] accumulate into `post_grad`;
// encoder_backprop then pushes them through the encoder into `grad`.
struct PosteriorGrad {
    Eigen::MatrixXd mu, log_var;
    static PosteriorGrad zeros(const PosteriorBatch& post);
};
double pcvae_from_posterior(const EmbeddingBatch& batch, const PosteriorBatch& post, const CvaeParams& cvae,
                            const PrototypeTable& table, const LossWeights& weights, const Eigen::MatrixXd& eps,
                            ObjectiveGrad* grad, PosteriorGrad* post_grad);
double phsc_from_posterior(const EmbeddingBatch& batch, const PosteriorBatch& post, const PrototypeTable& table,
                           ObjectiveGrad* grad, PosteriorGrad* post_grad);
double unknown_ce_from_posterior(const EmbeddingBatch& batch, const PosteriorBatch& post, const PrototypeTable& table,
                                 const Eigen::MatrixXd& unknown_prototype, ObjectiveGrad* grad,
                                 PosteriorGrad* post_grad);
void encoder_backprop(const PosteriorBatch& post, const CvaeParams& cvae, const PosteriorGrad& post_grad,
                      ObjectiveGrad& grad);

struct LossComponents {
    double phsc = 0.0;
    double pcvae = 0.0;
    double kd = 0.0;
};

// phsc + pcvae (+ kd weight * kd when a teacher exists).
double total_loss(const LossComponents& components, const LossWeights& weights, bool with_distillation);

}  // namespace ogcil

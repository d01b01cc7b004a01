#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ogcil/graph.hpp"
#include "ogcil/rng.hpp"

namespace ogcil {

class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Log-variance is clamped to this range before exponentiation.
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

struct DenseLayer {
    Eigen::MatrixXd weight;  // in x out
    Eigen::MatrixXd bias;    // 1 x out
};

struct MlpTrace {
    std::vector<Eigen::MatrixXd> inputs;          // input of each layer
    std::vector<Eigen::MatrixXd> pre_activations;  // output of each layer before ReLU
};

// Stack of dense layers, ReLU between layers, none after the last.
// Rows of the input matrix are samples.
struct Mlp {
    std::vector<DenseLayer> layers;

    static Mlp init(std::span<const std::size_t> widths, Rng& rng);

    std::size_t in_dim() const { return static_cast<std::size_t>(layers.front().weight.rows()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(layers.back().weight.cols()); }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, MlpTrace* trace = nullptr) const;

    // Accumulates parameter gradients into `grad` and returns dLoss/dInput.
    Eigen::MatrixXd backward(const MlpTrace& trace, const Eigen::MatrixXd& d_output, Mlp& grad) const;

    Mlp zeros_like() const;
};

// Prototypical CVAE: the encoder emits [mu | log-variance], the decoder maps a latent back to an embedding.
struct CvaeParams {
    Mlp encoder;  // d -> hidden -> 2 * latent
    Mlp decoder;  // latent -> hidden -> d

    static CvaeParams init(std::size_t embed_dim, std::size_t hidden_dim, std::size_t latent_dim, Rng& rng);

    std::size_t embed_dim() const { return encoder.in_dim(); }
    std::size_t latent_dim() const { return encoder.out_dim() / 2; }

    void validate() const;
    CvaeParams zeros_like() const;
};

struct Posterior {
    Eigen::VectorXd mu;
    Eigen::VectorXd sigma;
};

Posterior cvae_encode(const Eigen::VectorXd& z, const CvaeParams& params);
Eigen::VectorXd sample_latent(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma, const Eigen::VectorXd& eps);
Eigen::VectorXd cvae_decode(const Eigen::VectorXd& h, const CvaeParams& params);

// Batched encoder pass. `log_var` holds the unclamped head output.
struct PosteriorBatch {
    Eigen::MatrixXd mu;
    Eigen::MatrixXd log_var;
    Eigen::MatrixXd sigma;  // exp(0.5 * clamp(log_var))
    MlpTrace trace;
};

PosteriorBatch cvae_encode_batch(const Eigen::MatrixXd& z, const CvaeParams& params);

// Learnable class prototypes in the latent space, one row per class.
class PrototypeTable {
public:
    PrototypeTable() = default;
    explicit PrototypeTable(std::size_t dim) : dim_(dim), vectors_(0, static_cast<Eigen::Index>(dim)) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return class_ids_.size(); }
    bool empty() const { return class_ids_.empty(); }
    bool contains(int class_id) const;

    // Row of `class_id`; throws ModelError when absent.
    Eigen::Index row_of(int class_id) const;

    const std::vector<int>& class_ids() const { return class_ids_; }
    const Eigen::MatrixXd& vectors() const { return vectors_; }
    Eigen::MatrixXd& vectors() { return vectors_; }
    Eigen::VectorXd prototype(int class_id) const { return vectors_.row(row_of(class_id)).transpose(); }

    // New prototypes ~ N(0, I) / sqrt(dim); existing rows untouched.
    PrototypeTable register_classes(std::span<const int> new_classes, std::uint64_t seed) const;

    void set_prototype(int class_id, const Eigen::VectorXd& p);

private:
    std::size_t dim_ = 0;
    std::vector<int> class_ids_;
    Eigen::MatrixXd vectors_;
};

// Frozen copy of the previous task's encoder and CVAE.
class TeacherSnapshot {
public:
    TeacherSnapshot(EncoderParams gnn, CvaeParams cvae) : gnn_(std::move(gnn)), cvae_(std::move(cvae)) {}

    const EncoderParams& gnn() const { return gnn_; }
    const CvaeParams& cvae() const { return cvae_; }

private:
    EncoderParams gnn_;
    CvaeParams cvae_;
};

// Everything the training engine optimizes.
struct ModelState {
    EncoderParams gnn;
    CvaeParams cvae;
    PrototypeTable prototypes;
    Eigen::MatrixXd unknown_prototype;  // 1 x latent; used only by the single-unknown-prototype ablation
    int tasks_completed = 0;
};

// Calls f(Eigen::MatrixXd&) on every trainable tensor, in a fixed order.
template <class State, class F>
void for_each_tensor(State& s, F&& f) {
    f(s.gnn.w1);
    f(s.gnn.w2);
    for (auto& l : s.cvae.encoder.layers) {
        f(l.weight);
        f(l.bias);
    }
    for (auto& l : s.cvae.decoder.layers) {
        f(l.weight);
        f(l.bias);
    }
    f(s.prototypes.vectors());
    f(s.unknown_prototype);
}

ModelState zero_gradient(const ModelState& state);

}  // namespace ogcil

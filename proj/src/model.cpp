#include "ogcil/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ogcil {

Mlp Mlp::init(std::span<const std::size_t> widths, Rng& rng) {
    if (widths.size() < 2) throw ModelError("Mlp::init needs at least input and output widths");
    Mlp m;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        DenseLayer layer;
        layer.weight = glorot_uniform(static_cast<Eigen::Index>(widths[i]), static_cast<Eigen::Index>(widths[i + 1]), rng);
        layer.bias = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(widths[i + 1]));
        m.layers.push_back(std::move(layer));
    }
    return m;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, MlpTrace* trace) const {
    if (trace) {
        trace->inputs.clear();
        trace->pre_activations.clear();
    }
    Eigen::MatrixXd cur = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (cur.cols() != l.weight.rows())
            throw ModelError("Mlp: input width " + std::to_string(cur.cols()) + " != layer width " +
                             std::to_string(l.weight.rows()));
        Eigen::MatrixXd pre = cur * l.weight;
        pre.rowwise() += l.bias.row(0);
        if (trace) {
            trace->inputs.push_back(cur);
            trace->pre_activations.push_back(pre);
        }
        cur = (i + 1 < layers.size()) ? Eigen::MatrixXd(pre.cwiseMax(0.0)) : std::move(pre);
    }
    return cur;
}

Eigen::MatrixXd Mlp::backward(const MlpTrace& trace, const Eigen::MatrixXd& d_output, Mlp& grad) const {
    Eigen::MatrixXd d = d_output;
    for (std::size_t k = layers.size(); k-- > 0;) {
        if (k + 1 < layers.size()) d.array() *= (trace.pre_activations[k].array() > 0.0).cast<double>();
        grad.layers[k].weight.noalias() += trace.inputs[k].transpose() * d;
        grad.layers[k].bias += d.colwise().sum();
        d = d * layers[k].weight.transpose();
    }
    return d;
}

Mlp Mlp::zeros_like() const {
    Mlp m;
    for (const auto& l : layers)
        m.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                            Eigen::MatrixXd::Zero(l.bias.rows(), l.bias.cols())});
    return m;
}

CvaeParams CvaeParams::init(std::size_t embed_dim, std::size_t hidden_dim, std::size_t latent_dim, Rng& rng) {
    const std::size_t enc[] = {embed_dim, hidden_dim, 2 * latent_dim};
    const std::size_t dec[] = {latent_dim, hidden_dim, embed_dim};
    CvaeParams p;
    p.encoder = Mlp::init(enc, rng);
    p.decoder = Mlp::init(dec, rng);
    // decoder starts out emitting zero
    p.decoder.layers.back().weight.setZero();
    return p;
}

void CvaeParams::validate() const {
    if (encoder.layers.empty() || decoder.layers.empty()) throw ModelError("CVAE encoder/decoder must have layers");
    if (encoder.out_dim() % 2 != 0) throw ModelError("CVAE encoder must emit [mu | log-variance]");
    if (decoder.in_dim() != latent_dim()) throw ModelError("CVAE decoder input width != latent width");
    if (decoder.out_dim() != embed_dim()) throw ModelError("CVAE decoder output width != embedding width");
}

CvaeParams CvaeParams::zeros_like() const { return {encoder.zeros_like(), decoder.zeros_like()}; }

PosteriorBatch cvae_encode_batch(const Eigen::MatrixXd& z, const CvaeParams& params) {
    if (!z.allFinite()) throw ModelError("cvae_encode: non-finite input");
    PosteriorBatch out;
    const Eigen::MatrixXd head = params.encoder.forward(z, &out.trace);
    const auto dl = static_cast<Eigen::Index>(params.latent_dim());
    out.mu = head.leftCols(dl);
    out.log_var = head.rightCols(dl);
    out.sigma = (0.5 * out.log_var.array().max(kLogVarMin).min(kLogVarMax)).exp().matrix();
    return out;
}

Posterior cvae_encode(const Eigen::VectorXd& z, const CvaeParams& params) {
    if (static_cast<std::size_t>(z.size()) != params.embed_dim())
        throw ModelError("cvae_encode: input width " + std::to_string(z.size()) + " != " +
                         std::to_string(params.embed_dim()));
    auto batch = cvae_encode_batch(z.transpose(), params);
    return {batch.mu.row(0).transpose(), batch.sigma.row(0).transpose()};
}

Eigen::VectorXd sample_latent(const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma, const Eigen::VectorXd& eps) {
    if (mu.size() != sigma.size() || mu.size() != eps.size())
        throw ModelError("sample_latent: length mismatch");
    return mu + sigma.cwiseProduct(eps);
}

Eigen::VectorXd cvae_decode(const Eigen::VectorXd& h, const CvaeParams& params) {
    if (!h.allFinite()) throw ModelError("cvae_decode: non-finite input");
    if (static_cast<std::size_t>(h.size()) != params.decoder.in_dim())
        throw ModelError("cvae_decode: latent width " + std::to_string(h.size()) + " != " +
                         std::to_string(params.decoder.in_dim()));
    return params.decoder.forward(h.transpose()).row(0).transpose();
}

bool PrototypeTable::contains(int class_id) const {
    return std::find(class_ids_.begin(), class_ids_.end(), class_id) != class_ids_.end();
}

Eigen::Index PrototypeTable::row_of(int class_id) const {
    auto it = std::find(class_ids_.begin(), class_ids_.end(), class_id);
    if (it == class_ids_.end()) throw ModelError("no prototype for class " + std::to_string(class_id));
    return static_cast<Eigen::Index>(it - class_ids_.begin());
}

PrototypeTable PrototypeTable::register_classes(std::span<const int> new_classes, std::uint64_t seed) const {
    if (dim_ == 0) throw ModelError("register_classes: prototype table has zero width");
    PrototypeTable out = *this;
    for (std::size_t i = 0; i < new_classes.size(); ++i) {
        if (out.contains(new_classes[i]) ||
            std::find(new_classes.begin(), new_classes.begin() + static_cast<std::ptrdiff_t>(i), new_classes[i]) !=
                new_classes.begin() + static_cast<std::ptrdiff_t>(i))
            throw ModelError("class " + std::to_string(new_classes[i]) + " already has a prototype");
    }
    auto rng = make_rng(seed, {0x70726f74ULL});
    const auto d = static_cast<Eigen::Index>(dim_);
    const Eigen::MatrixXd fresh = standard_normal(static_cast<Eigen::Index>(new_classes.size()), d, rng) /
                                  std::sqrt(static_cast<double>(dim_));
    const Eigen::Index old_rows = out.vectors_.rows();
    out.vectors_.conservativeResize(old_rows + fresh.rows(), d);
    out.vectors_.bottomRows(fresh.rows()) = fresh;
    out.class_ids_.insert(out.class_ids_.end(), new_classes.begin(), new_classes.end());
    return out;
}

void PrototypeTable::set_prototype(int class_id, const Eigen::VectorXd& p) {
    if (static_cast<std::size_t>(p.size()) != dim_) throw ModelError("set_prototype: width mismatch");
    vectors_.row(row_of(class_id)) = p.transpose();
}

ModelState zero_gradient(const ModelState& state) {
    ModelState g = state;
    for_each_tensor(g, [](Eigen::MatrixXd& m) { m.setZero(); });
    return g;
}

}  // namespace ogcil

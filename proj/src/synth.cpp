#include "ogcil/synth.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ogcil {

void MixConfig::validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw SynthError("beta must be a positive finite number");
    if (count_id < 0) throw SynthError("pseudo-ID count must be >= 0");
    if (count_ood < 0) throw SynthError("pseudo-OOD count must be >= 0");
    if (regen_interval < 1) throw SynthError("OOD regeneration interval must be >= 1");
}

std::vector<int> split_counts(std::span<const int> classes, int total) {
    std::vector<int> counts(classes.size(), 0);
    if (classes.empty() || total <= 0) return counts;
    const int n = static_cast<int>(classes.size());
    const int base = total / n;
    int extra = total % n;
    std::vector<std::size_t> order(classes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return classes[a] < classes[b]; });
    for (std::size_t k = 0; k < order.size(); ++k) counts[order[k]] = base + (extra-- > 0 ? 1 : 0);
    return counts;
}

EmbeddingBatch generate_pseudo_id(const PrototypeTable& table, std::span<const int> old_classes, int total,
                                  const CvaeParams& cvae, const Eigen::MatrixXd& noise) {
    if (total < 0) throw SynthError("generate_pseudo_id: negative count");
    for (int c : old_classes)
        if (!table.contains(c)) throw SynthError("generate_pseudo_id: unknown class id " + std::to_string(c));

    const auto counts = split_counts(old_classes, total);
    const auto dl = static_cast<Eigen::Index>(table.dim());
    int rows = 0;
    for (int k : counts) rows += k;
    if (noise.rows() != rows || noise.cols() != dl) throw SynthError("generate_pseudo_id: noise shape mismatch");

    Eigen::MatrixXd latent = noise;
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(rows));
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < old_classes.size(); ++i) {
        const Eigen::RowVectorXd p = table.vectors().row(table.row_of(old_classes[i]));
        for (int k = 0; k < counts[i]; ++k, ++r) {
            latent.row(r) += p;
            labels.push_back(old_classes[i]);
        }
    }
    EmbeddingBatch out;
    out.z = rows > 0 ? cvae.decoder.forward(latent) : Eigen::MatrixXd(0, static_cast<Eigen::Index>(cvae.embed_dim()));
    out.labels = std::move(labels);
    out.provenance.assign(static_cast<std::size_t>(rows), Provenance::pseudo_id);
    out.node_ids.assign(static_cast<std::size_t>(rows), -1);
    return out;
}

EmbeddingBatch generate_pseudo_id(const PrototypeTable& table, std::span<const int> old_classes, int total,
                                  const CvaeParams& cvae, Rng& rng) {
    if (total < 0) throw SynthError("generate_pseudo_id: negative count");
    const auto counts = split_counts(old_classes, total);
    int rows = 0;
    for (int k : counts) rows += k;
    return generate_pseudo_id(table, old_classes, total, cvae,
                              standard_normal(rows, static_cast<Eigen::Index>(table.dim()), rng));
}

Eigen::VectorXd mix_pair(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2, double alpha) {
    if (z1.size() != z2.size()) throw SynthError("mix_pair: length mismatch");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw SynthError("mix_pair: alpha outside [0, 1]");
    return alpha * z1 + (1.0 - alpha) * z2;
}

EmbeddingBatch generate_pseudo_ood(const EmbeddingBatch& pool, int count, const MixConfig& config, Rng& rng,
                                   std::vector<MixRecord>* records) {
    config.validate();
    pool.validate();
    if (count < 0) throw SynthError("generate_pseudo_ood: negative count");
    if (records) records->clear();

    EmbeddingBatch out;
    out.z.resize(count, pool.z.cols());
    if (count == 0) return out;

    std::vector<int> labeled;
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (pool.labels[i] != kOodClass) labeled.push_back(static_cast<int>(i));
    bool two_classes = false;
    for (int i : labeled)
        if (pool.labels[static_cast<std::size_t>(i)] != pool.labels[static_cast<std::size_t>(labeled.front())]) {
            two_classes = true;
            break;
        }
    if (!two_classes) throw SynthError("generate_pseudo_ood: pool needs at least two distinct class labels");

    std::uniform_int_distribution<std::size_t> pick(0, labeled.size() - 1);
    for (int k = 0; k < count; ++k) {
        const int a = labeled[pick(rng)];
        int b = a;
        // Rejection keeps the partner uniform over members of other classes.
        while (pool.labels[static_cast<std::size_t>(b)] == pool.labels[static_cast<std::size_t>(a)]) b = labeled[pick(rng)];
        const double alpha = sample_beta(config.beta, config.beta, rng);
        out.z.row(k) = mix_pair(pool.z.row(a).transpose(), pool.z.row(b).transpose(), alpha).transpose();
        if (records) records->push_back({a, b, alpha});
    }
    out.labels.assign(static_cast<std::size_t>(count), kOodClass);
    out.provenance.assign(static_cast<std::size_t>(count), Provenance::pseudo_ood);
    out.node_ids.assign(static_cast<std::size_t>(count), -1);
    return out;
}

}  // namespace ogcil

#include "ogcil/embedding.hpp"

#include <stdexcept>

namespace ogcil {

std::string_view to_string(Provenance p) {
    switch (p) {
        case Provenance::real: return "real";
        case Provenance::pseudo_id: return "pseudo-id";
        case Provenance::pseudo_ood: return "pseudo-ood";
        case Provenance::exemplar: return "exemplar";
    }
    return "?";
}

void EmbeddingBatch::validate() const {
    const auto n = labels.size();
    if (static_cast<std::size_t>(z.rows()) != n || provenance.size() != n || node_ids.size() != n)
        throw std::invalid_argument("EmbeddingBatch: row count mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        const bool sentinel = labels[i] == kOodClass;
        const bool ood = provenance[i] == Provenance::pseudo_ood;
        if (sentinel != ood) throw std::invalid_argument("EmbeddingBatch: OOD sentinel without pseudo-OOD provenance");
    }
}

void EmbeddingBatch::append(const EmbeddingBatch& other) {
    if (other.empty()) return;
    if (empty() && z.cols() == 0) {
        *this = other;
        return;
    }
    if (other.z.cols() != z.cols()) throw std::invalid_argument("EmbeddingBatch::append: width mismatch");
    const Eigen::Index old = z.rows();
    z.conservativeResize(old + other.z.rows(), z.cols());
    z.bottomRows(other.z.rows()) = other.z;
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    provenance.insert(provenance.end(), other.provenance.begin(), other.provenance.end());
    node_ids.insert(node_ids.end(), other.node_ids.begin(), other.node_ids.end());
}

EmbeddingBatch EmbeddingBatch::from_nodes(Eigen::MatrixXd z, std::vector<int> labels, std::vector<int> node_ids,
                                          Provenance provenance) {
    EmbeddingBatch b;
    const auto n = labels.size();
    b.z = std::move(z);
    b.labels = std::move(labels);
    b.node_ids = std::move(node_ids);
    b.provenance.assign(n, provenance);
    b.validate();
    return b;
}

}  // namespace ogcil

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ogcil {

// Class label carried by mixed out-of-distribution samples.
inline constexpr int kOodClass = -1;

enum class Provenance : std::uint8_t { real, pseudo_id, pseudo_ood, exemplar };

std::string_view to_string(Provenance p);

// Rows of `z` are embeddings; the parallel vectors describe each row.
struct EmbeddingBatch {
    Eigen::MatrixXd z;
    std::vector<int> labels;
    std::vector<Provenance> provenance;
    std::vector<int> node_ids;  // -1 for generated samples

    std::size_t size() const { return labels.size(); }
    bool empty() const { return labels.empty(); }
    Eigen::Index dim() const { return z.cols(); }

    // Throws std::invalid_argument on shape mismatch or sentinel/provenance disagreement.
    void validate() const;

    void append(const EmbeddingBatch& other);

    static EmbeddingBatch from_nodes(Eigen::MatrixXd z, std::vector<int> labels, std::vector<int> node_ids,
                                     Provenance provenance);
};

}  // namespace ogcil

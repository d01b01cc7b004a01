#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ogcil/embedding.hpp"
#include "ogcil/model.hpp"
#include "ogcil/rng.hpp"

namespace ogcil {

class SynthError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// How the pseudo-ID count is interpreted.
enum class IdCountMode { total, per_class };

struct MixConfig {
    double beta = 5.0;         // symmetric Beta(beta, beta) for the mixing weight
    int count_id = 0;          // H
    int count_ood = 0;         // L
    int regen_interval = 1;    // I, epochs between OOD refreshes
    IdCountMode id_mode = IdCountMode::total;

    void validate() const;
};

// Split `total` across `classes` as evenly as possible; the remainder goes to the lowest class ids.
std::vector<int> split_counts(std::span<const int> classes, int total);

// Samples h ~ N(p_c, I) and decodes it, `total` draws spread over `old_classes`.
EmbeddingBatch generate_pseudo_id(const PrototypeTable& table, std::span<const int> old_classes, int total,
                                  const CvaeParams& cvae, Rng& rng);

// Same, with the standard-normal offsets supplied by the caller (total x latent).
EmbeddingBatch generate_pseudo_id(const PrototypeTable& table, std::span<const int> old_classes, int total,
                                  const CvaeParams& cvae, const Eigen::MatrixXd& noise);

Eigen::VectorXd mix_pair(const Eigen::VectorXd& z1, const Eigen::VectorXd& z2, double alpha);

// Where each mixed sample came from; filled on request for inspection.
struct MixRecord {
    int first = 0;   // pool row
    int second = 0;  // pool row
    double alpha = 0.0;
};

// Convex mixes of pool rows with distinct class labels; alpha ~ Beta(beta, beta).
EmbeddingBatch generate_pseudo_ood(const EmbeddingBatch& pool, int count, const MixConfig& config, Rng& rng,
                                   std::vector<MixRecord>* records = nullptr);

}  // namespace ogcil

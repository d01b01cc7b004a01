#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace ogcil {

using Rng = std::mt19937_64;

// Independent stream for (seed, purpose, index...). Keeps ablations from
// shifting the random draws of unrelated components.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) {
    std::vector<std::uint32_t> words;
    words.push_back(static_cast<std::uint32_t>(seed));
    words.push_back(static_cast<std::uint32_t>(seed >> 32));
    for (auto s : stream) {
        words.push_back(static_cast<std::uint32_t>(s));
        words.push_back(static_cast<std::uint32_t>(s >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

inline Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) out(i, j) = normal(rng);
    return out;
}

// Glorot/Xavier uniform initialization.
inline Eigen::MatrixXd glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> uni(-limit, limit);
    Eigen::MatrixXd out(fan_in, fan_out);
    for (Eigen::Index i = 0; i < fan_in; ++i)
        for (Eigen::Index j = 0; j < fan_out; ++j) out(i, j) = uni(rng);
    return out;
}

// Beta(a, b) via the ratio of two gamma draws.
inline double sample_beta(double a, double b, Rng& rng) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
}

}  // namespace ogcil

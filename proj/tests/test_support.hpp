#pragma once

#include <mmx/ensemble.hpp>
#include <mmx/linalg.hpp>
#include <mmx/matrix.hpp>
#include <mmx/rng.hpp>

#include <vector>

namespace ts {

inline mmx::Matrix random_matrix(int rows, int cols, mmx::RandomStream& rng, double scale = 1.0) {
    mmx::Matrix a(rows, cols);
    for (double& v : a.entries()) v = scale * rng.gaussian();
    return a;
}

// rank-r matrix with unit-scale factors
inline mmx::Matrix random_low_rank(int rows, int cols, int r, mmx::RandomStream& rng) {
    return mmx::matmul(random_matrix(rows, r, rng), random_matrix(r, cols, rng));
}

inline double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double v : xs) s += v;
    return s / static_cast<double>(xs.size());
}

inline double sample_sd(const std::vector<double>& xs) {
    const double m = mean(xs);
    double s = 0.0;
    for (double v : xs) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

inline double stderr_of_mean(const std::vector<double>& xs) {
    return sample_sd(xs) / std::sqrt(static_cast<double>(xs.size()));
}

} // namespace ts

#pragma once

// Small synthetic classification sets shared by the unit and acceptance tests.

#include <advbal/core.hpp>
#include <advbal/rng.hpp>

#include <cmath>
#include <numbers>
#include <vector>

namespace advbal::fixtures {

struct Labeled {
    Matrix x;
    std::vector<int> labels;
};

// Two concentric rings: class 1 at radius in [0, 0.8), class 0 at [1.2, 2).
inline Labeled circles(Eigen::Index n, std::uint64_t seed) {
    RngStream rng(seed);
    Labeled out{Matrix(n, 2), std::vector<int>(static_cast<std::size_t>(n))};
    for (Eigen::Index i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const double r = label ? rng.uniform(0.0, 0.8) : rng.uniform(1.2, 2.0);
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        out.x(i, 0) = r * std::cos(theta);
        out.x(i, 1) = r * std::sin(theta);
        out.labels[static_cast<std::size_t>(i)] = label;
    }
    return out;
}

// Gaussian cloud split by the line x1 + x2 = 0, each side pushed out by margin / 2.
inline Labeled linear_separated(Eigen::Index n, std::uint64_t seed, double margin) {
    RngStream rng(seed);
    Labeled out{Matrix(n, 2), std::vector<int>(static_cast<std::size_t>(n))};
    const double push = margin / 2.0 / std::numbers::sqrt2;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double a = rng.normal();
        const double b = rng.normal();
        const int label = a + b > 0.0 ? 1 : 0;
        const double s = label ? push : -push;
        out.x(i, 0) = a + s;
        out.x(i, 1) = b + s;
        out.labels[static_cast<std::size_t>(i)] = label;
    }
    return out;
}

} // namespace advbal::fixtures

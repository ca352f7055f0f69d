#pragma once

// Seeded generators for the simulated benchmarks and their ground truth.

#include <advbal/core.hpp>
#include <advbal/csv.hpp>
#include <advbal/rng.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

namespace advbal {

// A generated dataset plus columns that only oracles may look at (latent
// covariates, counterfactuals, true propensities).
struct SimulatedDataset {
    Dataset data;
    Matrix oracle;
    std::vector<std::string> oracle_names;

    Vector oracle_column(const std::string& name) const {
        for (std::size_t j = 0; j < oracle_names.size(); ++j) {
            if (oracle_names[j] == name) return oracle.col(static_cast<Eigen::Index>(j));
        }
        throw InvalidInput("no oracle column '" + name + "'");
    }
};

inline constexpr std::size_t kPresetSizes[] = {200, 500, 1000, 2000, 5000};

inline double expit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double kang_schafer_propensity(double x1, double x2, double x3, double x4) {
    return expit(-x1 + 0.5 * x2 - 0.25 * x3 - 0.1 * x4);
}

// Four N(0,1) latents drive treatment and outcome; with transformed = true the
// emitted covariates are the nonlinear transforms of the latents. The random
// draws do not depend on `transformed`, so equal (n, seed) gives paired datasets.
// Outcomes are observed only for treated rows.
inline SimulatedDataset gen_kang_schafer(std::size_t n, std::uint64_t seed, bool transformed) {
    if (n < 10) throw InvalidInput("gen_kang_schafer: n must be at least 10");
    RngStream rng(seed);
    const auto rows = static_cast<Eigen::Index>(n);
    Matrix x(rows, 4);
    Matrix oracle(rows, 6);
    std::vector<int> a(n);
    std::vector<std::optional<double>> y(n);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const double z3 = rng.normal();
        const double z4 = rng.normal();
        const double eps = rng.normal();
        const double u = rng.uniform();
        const double p = kang_schafer_propensity(z1, z2, z3, z4);
        const int treated = u < p ? 1 : 0;
        const double outcome = 210.0 + 27.4 * z1 + 13.7 * z2 + 13.7 * z3 + 13.7 * z4 + eps;
        if (transformed) {
            x(i, 0) = std::exp(z1 / 2.0);
            x(i, 1) = z2 / (1.0 + std::exp(z1)) + 10.0;
            x(i, 2) = std::pow(z1 * z3 / 25.0 + 0.6, 3);
            x(i, 3) = std::pow(z2 + z4 + 20.0, 2);
        } else {
            x.row(i) << z1, z2, z3, z4;
        }
        oracle.row(i) << z1, z2, z3, z4, p, outcome;
        a[static_cast<std::size_t>(i)] = treated;
        if (treated) y[static_cast<std::size_t>(i)] = outcome;
    }
    return {Dataset(std::move(x), std::move(a), std::move(y), {"x1", "x2", "x3", "x4"}, {0, 1}),
            std::move(oracle),
            {"latent_x1", "latent_x2", "latent_x3", "latent_x4", "propensity", "y_full"}};
}

inline double circular_propensity(double x1, double x2) {
    return 0.95 / (1.0 + 3.0 / std::numbers::sqrt2 * std::hypot(x1, x2));
}

// Two U[-1, 1] covariates, radially symmetric propensity, potential outcomes
// N(|x|^2 - x1/2 - x2/2, 3) and N(|x|^2, 3). The factual outcome is emitted;
// both potential outcomes go to the oracle.
inline SimulatedDataset gen_circular(std::size_t n, std::uint64_t seed) {
    if (n < 10) throw InvalidInput("gen_circular: n must be at least 10");
    RngStream rng(seed);
    const auto rows = static_cast<Eigen::Index>(n);
    const double sd = std::sqrt(3.0);
    Matrix x(rows, 2);
    Matrix oracle(rows, 3);
    std::vector<int> a(n);
    std::vector<std::optional<double>> y(n);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double x1 = rng.uniform(-1.0, 1.0);
        const double x2 = rng.uniform(-1.0, 1.0);
        const double u = rng.uniform();
        const double e0 = rng.normal();
        const double e1 = rng.normal();
        const double r2 = x1 * x1 + x2 * x2;
        const double y0 = r2 - x1 / 2.0 - x2 / 2.0 + sd * e0;
        const double y1 = r2 + sd * e1;
        const double p = circular_propensity(x1, x2);
        const int treated = u < p ? 1 : 0;
        x.row(i) << x1, x2;
        oracle.row(i) << y0, y1, p;
        a[static_cast<std::size_t>(i)] = treated;
        y[static_cast<std::size_t>(i)] = treated ? y1 : y0;
    }
    return {Dataset(std::move(x), std::move(a), std::move(y), {"x1", "x2"}, {0, 1}), std::move(oracle),
            {"y0", "y1", "propensity"}};
}

struct BenchmarkTruth {
    std::string name;
    double true_value = 0.0;
    Estimand estimand;
};

inline BenchmarkTruth true_values(const std::string& benchmark_name) {
    if (benchmark_name == "kang_schafer") {
        return {benchmark_name, 210.0, Estimand::expected_potential_outcome(1)};
    }
    if (benchmark_name == "circular") {
        return {benchmark_name, 0.0, Estimand::ate()};
    }
    throw InvalidInput("unknown benchmark '" + benchmark_name + "' (expected kang_schafer or circular)");
}

inline void write_oracle_csv(std::ostream& out, const SimulatedDataset& sim) {
    for (std::size_t j = 0; j < sim.oracle_names.size(); ++j) out << (j ? "," : "") << sim.oracle_names[j];
    out << '\n';
    for (Eigen::Index i = 0; i < sim.oracle.rows(); ++i) {
        for (Eigen::Index j = 0; j < sim.oracle.cols(); ++j) {
            out << (j ? "," : "") << detail::format_real(sim.oracle(i, j));
        }
        out << '\n';
    }
}

} // namespace advbal

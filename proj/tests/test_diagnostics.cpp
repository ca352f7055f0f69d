#include <advbal/diagnostics.hpp>

#include <gtest/gtest.h>

#include <cmath>

#include "divergence_oracles.hpp"

using namespace advbal;

namespace {

Matrix gaussian(Eigen::Index n, Eigen::Index d, double shift, RngStream& rng) {
    Matrix x(n, d);
    for (auto& v : x.reshaped()) v = rng.normal() + shift;
    return x;
}

} // namespace

TEST(HDivergence, IdenticalSamplesNearZero) {
    // Training-set error on two draws from one distribution sits a little
    // below chance, so single draws can drift; the average should not.
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RngStream rng(seed);
        const Matrix x = gaussian(500, 3, 0.0, rng);
        EXPECT_LT(h_divergence(BalancingProblem(x, x), WeightVector::uniform(500), FamilySpec::logistic()), 0.15);
        const Matrix y = gaussian(500, 3, 0.0, rng);
        const double d = h_divergence(BalancingProblem(x, y), WeightVector::uniform(500), FamilySpec::logistic());
        EXPECT_LT(d, 0.35);
        total += d;
    }
    EXPECT_LT(total / 20.0, 0.15);
}

TEST(HDivergence, SeparatedSamplesNearTwo) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        RngStream rng(seed);
        Matrix s = gaussian(300, 2, 0.0, rng);
        Matrix t = gaussian(300, 2, 0.0, rng);
        s.col(0).array() -= 6.0;
        t.col(0).array() += 6.0;
        EXPECT_GT(h_divergence(BalancingProblem(s, t), WeightVector::uniform(300), FamilySpec::logistic()), 1.9);
    }
}

TEST(HDivergence, StaysInRange) {
    RngStream rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const BalancingProblem prob(gaussian(40, 2, 0.0, rng), gaussian(30, 2, 0.3 * rep, rng));
        const auto w = WeightVector(fixtures::random_simplex_weights(40, rng));
        for (const auto& mode : {PredictionMode::train(), PredictionMode::cross_fit(3)}) {
            const double d = h_divergence(prob, w, rep % 2 ? FamilySpec::logistic() : FamilySpec::stump(), mode);
            EXPECT_GE(d, 0.0);
            EXPECT_LE(d, 2.0);
        }
    }
}

TEST(HDivergence, ThresholdFamilyMatchesDirectMaximization) {
    RngStream rng(4);
    for (int rep = 0; rep < 30; ++rep) {
        const auto n = static_cast<Eigen::Index>(2 + rng.below(29));
        const auto nt = static_cast<Eigen::Index>(2 + rng.below(29));
        const Matrix s = gaussian(n, 1, 0.0, rng);
        const Matrix t = gaussian(nt, 1, rng.uniform(-1.0, 1.0), rng);
        const WeightVector w(fixtures::random_simplex_weights(n, rng));
        const double op = h_divergence(BalancingProblem(s, t), w, FamilySpec::stump());
        EXPECT_NEAR(op, fixtures::threshold_ipm(s.col(0), t.col(0), w.values()), 1e-9);
    }
}

TEST(Smd, Examples) {
    RngStream rng(5);
    const Matrix x = gaussian(50, 3, 0.0, rng);
    const auto same = standardized_mean_difference(BalancingProblem(x, x), WeightVector::uniform(50));
    EXPECT_LT(same.smd.cwiseAbs().maxCoeff(), 1e-12);

    Matrix s = gaussian(500, 3, 0.0, rng);
    const Matrix t = gaussian(500, 3, 0.0, rng);
    s.col(0).array() += 1.0;
    const auto shifted = standardized_mean_difference(BalancingProblem(s, t), WeightVector::uniform(500));
    EXPECT_NEAR(shifted.smd[0], 1.0, 0.15);
    EXPECT_NEAR(shifted.smd[1], 0.0, 0.15);
    EXPECT_NEAR(shifted.smd[2], 0.0, 0.15);

    Matrix cs = gaussian(10, 2, 0.0, rng);
    Matrix ct = gaussian(10, 2, 0.0, rng);
    cs.col(1).setConstant(4.0);
    ct.col(1).setConstant(4.0);
    const auto constant = standardized_mean_difference(BalancingProblem(cs, ct), WeightVector::uniform(10));
    EXPECT_EQ(constant.smd[1], 0.0);
    EXPECT_TRUE(constant.degenerate[1]);
    EXPECT_FALSE(constant.degenerate[0]);
}

TEST(WeightSqNorm, Examples) {
    EXPECT_NEAR(weight_sq_norm(WeightVector::uniform(100)), 0.01, 1e-15);
    Vector point = Vector::Zero(10);
    point[0] = 10.0;
    EXPECT_NEAR(weight_sq_norm(WeightVector(point)), 1.0, 1e-15);
    const auto w = WeightVector::normalized((Vector(3) << 2, 0.5, 0.5).finished());
    EXPECT_NEAR(weight_sq_norm(w), 0.5, 1e-15);
}

TEST(WeightSqNorm, MinimumAtUniform) {
    RngStream rng(6);
    for (int rep = 0; rep < 100; ++rep) {
        const auto n = static_cast<Eigen::Index>(2 + rng.below(100));
        const WeightVector w(fixtures::random_simplex_weights(n, rng));
        EXPECT_GT(weight_sq_norm(w), 1.0 / static_cast<double>(n) + 1e-12);
        EXPECT_LE(weight_sq_norm(w), 1.0);
    }
}

TEST(EffectiveSampleSize, Examples) {
    EXPECT_NEAR(effective_sample_size(WeightVector::uniform(100)), 100.0, 1e-12);
    Vector point = Vector::Zero(10);
    point[3] = 10.0;
    EXPECT_NEAR(effective_sample_size(WeightVector(point)), 1.0, 1e-15);
}

TEST(EffectiveSampleSize, ReciprocalOfWeightSqNorm) {
    RngStream rng(7);
    for (int rep = 0; rep < 100; ++rep) {
        const WeightVector w(fixtures::random_simplex_weights(static_cast<Eigen::Index>(2 + rng.below(300)), rng));
        EXPECT_NEAR(effective_sample_size(w) * weight_sq_norm(w), 1.0, 1e-10);
        EXPECT_GE(effective_sample_size(w), 1.0);
        EXPECT_LE(effective_sample_size(w), static_cast<double>(w.size()) + 1e-9);
    }
}

TEST(TheoremBound, Examples) {
    const double n = 250.0;
    EXPECT_NEAR(theorem_bound(0.0, 1.0 / n, 1.0, 0.05), 2.0 * std::sqrt(2.0 * std::log(40.0) / n), 1e-15);
    const double b1 = theorem_bound(0.3, 0.02, 1.7, 0.1);
    EXPECT_DOUBLE_EQ(theorem_bound(0.3, 0.02, 3.4, 0.1), 2.0 * b1);
    EXPECT_THROW(theorem_bound(2.5, 0.02, 1.0, 0.1), InvalidInput);
    EXPECT_THROW(theorem_bound(0.5, 0.0, 1.0, 0.1), InvalidInput);
    EXPECT_THROW(theorem_bound(0.5, 0.1, -1.0, 0.1), InvalidInput);
    EXPECT_THROW(theorem_bound(0.5, 0.1, 1.0, 1.0), InvalidInput);
}

TEST(TheoremBound, MonteCarloValidity) {
    const fixtures::ThresholdCombination f{{-0.5, 0.3, 1.0}, {0.4, -0.3, 0.2}};
    const double m = 1.0;
    int covered = 0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        RngStream rng(static_cast<std::uint64_t>(r));
        const Matrix s = gaussian(150, 1, 0.0, rng);
        const Matrix t = gaussian(150, 1, 0.5, rng);
        Vector y(150);
        for (Eigen::Index i = 0; i < 150; ++i) y[i] = f(s(i, 0)) + rng.uniform(-0.1, 0.1);
        const BalancingProblem prob(s, t);
        AdversarialParams params;
        params.family = FamilySpec::stump();
        const auto w = adversarial_balance(prob, params).weights;
        double target_f = 0.0;
        for (Eigen::Index j = 0; j < 150; ++j) target_f += f(t(j, 0));
        target_f /= 150.0;
        const double error = std::abs(weighted_outcome_estimate(w, y) - target_f);
        const double bound = theorem_bound(h_divergence(prob, w, FamilySpec::stump()), weight_sq_norm(w), m, 0.05);
        covered += error <= bound;
    }
    EXPECT_GE(covered, 95);
}

TEST(BalanceReport, FieldsAndJsonRoundTrip) {
    RngStream rng(8);
    const BalancingProblem prob(gaussian(60, 2, 0.0, rng), gaussian(80, 2, 0.5, rng));
    const WeightVector w(fixtures::random_simplex_weights(60, rng));
    const auto report = balance_report(prob, w, FamilySpec::logistic(), PredictionMode::train(), BoundParams{2.0, 0.05});
    ASSERT_TRUE(report.bound.has_value());
    EXPECT_DOUBLE_EQ(*report.bound, theorem_bound(report.h_divergence, report.weight_sq_norm, 2.0, 0.05));
    const auto j = to_json(report);
    for (const char* key : {"h_divergence", "smd", "weight_sq_norm", "ess", "bound"}) EXPECT_TRUE(j.contains(key));
    EXPECT_EQ(j.size(), 5u);
    const auto back = balance_report_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.h_divergence, report.h_divergence);
    EXPECT_EQ(back.smd, report.smd);
    EXPECT_EQ(back.weight_sq_norm, report.weight_sq_norm);
    EXPECT_EQ(back.ess, report.ess);
    EXPECT_EQ(back.bound, report.bound);

    const auto no_bound = balance_report(prob, w, FamilySpec::logistic());
    EXPECT_TRUE(to_json(no_bound).at("bound").is_null());
}

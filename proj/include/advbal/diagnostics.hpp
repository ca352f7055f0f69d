#pragma once

// Balance and error-bound diagnostics for a weighted source sample.

#include <advbal/adversarial.hpp>
#include <advbal/core.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace advbal {

// Empirical H-divergence from the best discriminator found in the family:
// clamp(2 (1 - L_n), 0, 2) with L_n the two-term 0-1 loss of a discriminator
// fit on the weighted augmented data. For a symmetric family whose fit
// minimizes 0-1 error exactly this equals
// 2 max_h |(1/n) sum_S w h - (1/n') sum_T h|.
inline double h_divergence(const BalancingProblem& prob, const WeightVector& w, const FamilySpec& family,
                           const PredictionMode& mode = PredictionMode::train(), std::uint64_t seed = 0) {
    if (w.size() != prob.n()) {
        throw InvalidInput("h_divergence: weights do not match the source size");
    }
    AugmentedData aug = augment_labeled_dataset(prob);
    const auto n = static_cast<Eigen::Index>(prob.n());
    aug.weights.head(n) = w.values();
    const Vector proba = discriminator_predictions(family, aug, mode, seed);
    const double loss = two_term_loss(proba.head(n), proba.tail(static_cast<Eigen::Index>(prob.n_target())), w);
    return std::clamp(2.0 * (1.0 - loss), 0.0, 2.0);
}

struct SmdResult {
    Vector smd;
    // Covariates with zero pooled spread; smd is 0 there when means agree.
    std::vector<bool> degenerate;
};

// Per covariate: (weighted source mean - target mean) / sqrt((var_S + var_T) / 2)
// with unweighted variances.
inline SmdResult standardized_mean_difference(const BalancingProblem& prob, const WeightVector& w) {
    if (w.size() != prob.n()) {
        throw InvalidInput("standardized_mean_difference: weights do not match the source size");
    }
    const Matrix& s = prob.source();
    const Matrix& t = prob.target();
    const Vector ws_mean = (s.transpose() * w.values()) / static_cast<double>(prob.n());
    const Vector s_mean = s.colwise().mean();
    const Vector t_mean = t.colwise().mean();
    SmdResult out{Vector(s.cols()), std::vector<bool>(static_cast<std::size_t>(s.cols()), false)};
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        const double var_s = (s.col(j).array() - s_mean[j]).square().sum() / static_cast<double>(s.rows() - 1);
        const double var_t = (t.col(j).array() - t_mean[j]).square().sum() / static_cast<double>(t.rows() - 1);
        const double pooled = std::sqrt(0.5 * (var_s + var_t));
        const double diff = ws_mean[j] - t_mean[j];
        if (pooled > 0.0) {
            out.smd[j] = diff / pooled;
        } else {
            out.smd[j] = 0.0;
            out.degenerate[static_cast<std::size_t>(j)] = true;
        }
    }
    return out;
}

// |w/n|^2, between 1/n (uniform) and 1 (a point mass).
inline double weight_sq_norm(const WeightVector& w) {
    return (w.values() / static_cast<double>(w.size())).squaredNorm();
}

// Kish effective sample size (sum w)^2 / sum w^2.
inline double effective_sample_size(const WeightVector& w) {
    const double total = w.values().sum();
    return total * total / w.values().squaredNorm();
}

// (M_Y / 2) d_H + 2 M_Y sqrt(2 |w/n|^2 ln(2 / delta)); holds with probability
// at least 1 - delta when E[Y | X] is a combination of family members with
// absolute coefficients summing to at most M_Y.
inline double theorem_bound(double h_div, double w_sq_norm, double max_outcome, double delta) {
    if (!(h_div >= 0.0 && h_div <= 2.0)) throw InvalidInput("theorem_bound: d_H must lie in [0, 2]");
    if (!(w_sq_norm > 0.0 && w_sq_norm <= 1.0)) throw InvalidInput("theorem_bound: |w/n|^2 must lie in (0, 1]");
    if (!(max_outcome > 0.0) || !std::isfinite(max_outcome)) throw InvalidInput("theorem_bound: M_Y must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidInput("theorem_bound: delta must lie in (0, 1)");
    return 0.5 * max_outcome * h_div + 2.0 * max_outcome * std::sqrt(2.0 * w_sq_norm * std::log(2.0 / delta));
}

struct BalanceReport {
    double h_divergence = 0.0;
    Vector smd;
    double weight_sq_norm = 0.0;
    double ess = 0.0;
    std::optional<double> bound;
};

struct BoundParams {
    double max_outcome = 1.0;
    double delta = 0.05;
};

inline BalanceReport balance_report(const BalancingProblem& prob, const WeightVector& w, const FamilySpec& family,
                                    const PredictionMode& mode = PredictionMode::train(),
                                    std::optional<BoundParams> bound = std::nullopt, std::uint64_t seed = 0) {
    BalanceReport r;
    r.h_divergence = h_divergence(prob, w, family, mode, seed);
    r.smd = standardized_mean_difference(prob, w).smd;
    r.weight_sq_norm = weight_sq_norm(w);
    r.ess = effective_sample_size(w);
    if (bound) r.bound = theorem_bound(r.h_divergence, r.weight_sq_norm, bound->max_outcome, bound->delta);
    return r;
}

inline nlohmann::json to_json(const BalanceReport& r) {
    nlohmann::json j;
    j["h_divergence"] = r.h_divergence;
    j["smd"] = std::vector<double>(r.smd.data(), r.smd.data() + r.smd.size());
    j["weight_sq_norm"] = r.weight_sq_norm;
    j["ess"] = r.ess;
    j["bound"] = r.bound ? nlohmann::json(*r.bound) : nlohmann::json(nullptr);
    return j;
}

inline BalanceReport balance_report_from_json(const nlohmann::json& j) {
    BalanceReport r;
    r.h_divergence = j.at("h_divergence").get<double>();
    const auto smd = j.at("smd").get<std::vector<double>>();
    r.smd = Eigen::Map<const Vector>(smd.data(), static_cast<Eigen::Index>(smd.size()));
    r.weight_sq_norm = j.at("weight_sq_norm").get<double>();
    r.ess = j.at("ess").get<double>();
    if (j.contains("bound") && !j.at("bound").is_null()) r.bound = j.at("bound").get<double>();
    return r;
}

} // namespace advbal

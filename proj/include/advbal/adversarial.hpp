#pragma once

// Adversarial balancing: alternate between fitting a discriminator that
// separates the weighted source sample (label 0) from the target sample
// (label 1) and an exponentiated-gradient step that raises the weight of
// source units the discriminator gets wrong.

#include <advbal/classifiers.hpp>
#include <advbal/core.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace advbal {

struct PredictionMode {
    enum class Kind { TrainPredictions, KFoldCrossFit };
    Kind kind = Kind::TrainPredictions;
    int k = 5;

    static PredictionMode train() { return {}; }
    static PredictionMode cross_fit(int k = 5) { return {Kind::KFoldCrossFit, k}; }
};

// Selects one family by cross-validation before the first iteration.
struct CvSelect {
    std::vector<FamilySpec> candidates;
    int k = 5;
};

using FamilyChoice = std::variant<FamilySpec, CvSelect>;

// alpha_{t+1} = 1 / (1 + 0.5 t), t = 0, 1, ...
inline double default_learning_rate(int t) { return 1.0 / (1.0 + 0.5 * static_cast<double>(t)); }

struct AdversarialParams {
    int n_iter = 20;
    LossKind loss = LossKind::ZeroOne;
    std::function<double(int)> learning_rate = default_learning_rate;
    PredictionMode prediction_mode;
    FamilyChoice family = FamilySpec::logistic();
    std::uint64_t seed = 0;
};

struct IterationRecord {
    double discriminator_loss = 0.0;  // two-term 0-1 loss of this iteration's discriminator
    Vector weights;                   // source weights after the update
    double weight_sq_norm = 0.0;      // |w/n|^2 of those weights
    double h_divergence = 0.0;        // 2 (1 - discriminator_loss)
};

struct AdversarialTrace {
    std::vector<IterationRecord> iterations;
};

struct AugmentedData {
    Matrix x;                 // source rows, then target rows
    std::vector<int> labels;  // 0 for source, 1 for target
    Vector weights;           // 1 for source, n / n' for target
};

inline AugmentedData augment_labeled_dataset(const BalancingProblem& prob) {
    const auto n = static_cast<Eigen::Index>(prob.n());
    const auto nt = static_cast<Eigen::Index>(prob.n_target());
    AugmentedData aug;
    aug.x.resize(n + nt, prob.source().cols());
    aug.x.topRows(n) = prob.source();
    aug.x.bottomRows(nt) = prob.target();
    aug.labels.assign(static_cast<std::size_t>(n), 0);
    aug.labels.resize(static_cast<std::size_t>(n + nt), 1);
    aug.weights.resize(n + nt);
    aug.weights.head(n).setOnes();
    aug.weights.tail(nt).setConstant(static_cast<double>(n) / static_cast<double>(nt));
    return aug;
}

// w_i <- n * w_i exp(alpha l_i) / sum_j w_j exp(alpha l_j).
inline WeightVector exp_gradient_step(const WeightVector& w, const Vector& per_unit_losses, double alpha) {
    if (static_cast<std::size_t>(per_unit_losses.size()) != w.size()) {
        throw InvalidInput("exp_gradient_step: losses and weights differ in length");
    }
    if (!per_unit_losses.allFinite() || (per_unit_losses.array() < 0.0).any()) {
        throw InvalidInput("exp_gradient_step: losses must be finite and nonnegative");
    }
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw InvalidInput("exp_gradient_step: alpha must be positive");
    }
    if (!(w.values().sum() > 0.0)) {
        throw InvalidInput("exp_gradient_step: all-zero weights");
    }
    // Shifting by the max loss leaves the normalized result unchanged and avoids overflow.
    const double top = per_unit_losses.maxCoeff();
    const Vector factor = (alpha * (per_unit_losses.array() - top)).exp().matrix();
    return WeightVector::normalized(w.values().cwiseProduct(factor));
}

// (1/n') sum_T l(p, 1) + (1/n) sum_S w_i l(p, 0).
inline double two_term_loss(const Vector& source_proba, const Vector& target_proba, const WeightVector& w,
                            LossKind kind = LossKind::ZeroOne) {
    double target_term = 0.0;
    for (Eigen::Index i = 0; i < target_proba.size(); ++i) target_term += loss_value(kind, target_proba[i], 1);
    double source_term = 0.0;
    for (Eigen::Index i = 0; i < source_proba.size(); ++i) {
        source_term += w.values()[i] * loss_value(kind, source_proba[i], 0);
    }
    return target_term / static_cast<double>(target_proba.size()) +
           source_term / static_cast<double>(source_proba.size());
}

// Discriminator predictions P(target | x) for every augmented row.
inline Vector discriminator_predictions(const FamilySpec& family, const AugmentedData& aug,
                                        const PredictionMode& mode, std::uint64_t seed) {
    if (mode.kind == PredictionMode::Kind::TrainPredictions) {
        return fit(family, aug.x, aug.labels, aug.weights, seed).predict_proba(aug.x);
    }
    const auto folds = stratified_folds(aug.labels, mode.k, seed);
    return cross_fit_proba(family, aug.x, aug.labels, aug.weights, folds, seed);
}

inline FamilySpec resolve_family(const FamilyChoice& choice, const AugmentedData& aug, std::uint64_t seed,
                                 std::vector<std::string>* warnings = nullptr) {
    if (const auto* spec = std::get_if<FamilySpec>(&choice)) return *spec;
    const auto& cv = std::get<CvSelect>(choice);
    auto sel = cross_val_select(cv.candidates, aug.x, aug.labels, aug.weights, cv.k, mix_seed(seed, 0xC5));
    if (warnings) warnings->insert(warnings->end(), sel.warnings.begin(), sel.warnings.end());
    return sel.family;
}

struct AdversarialResult {
    WeightVector weights;
    AdversarialTrace trace;
    FamilySpec family;  // the family used (after selection, if any)
    std::vector<std::string> warnings;
};

inline AdversarialResult adversarial_balance(const BalancingProblem& prob, const AdversarialParams& params) {
    if (params.n_iter < 1) {
        throw InvalidInput("adversarial_balance: n_iter must be at least 1");
    }
    const auto n = static_cast<Eigen::Index>(prob.n());
    const auto nt = static_cast<Eigen::Index>(prob.n_target());
    AugmentedData aug = augment_labeled_dataset(prob);
    std::vector<std::string> warnings;
    const FamilySpec family = resolve_family(params.family, aug, params.seed, &warnings);

    WeightVector w = WeightVector::uniform(prob.n());
    AdversarialTrace trace;
    trace.iterations.reserve(static_cast<std::size_t>(params.n_iter));
    for (int t = 0; t < params.n_iter; ++t) {
        const Vector proba = discriminator_predictions(family, aug, params.prediction_mode,
                                                       mix_seed(params.seed, static_cast<std::uint64_t>(t)));
        const Vector source_p = proba.head(n);
        const Vector target_p = proba.tail(nt);

        Vector losses(n);
        for (Eigen::Index i = 0; i < n; ++i) losses[i] = loss_value(params.loss, source_p[i], 0);
        if (!losses.allFinite()) {
            throw InternalError("adversarial_balance: non-finite discriminator loss");
        }
        const double alpha = params.learning_rate(t);
        if (!(alpha > 0.0)) {
            throw InvalidInput("adversarial_balance: learning rate must stay positive");
        }
        const double disc_loss = two_term_loss(source_p, target_p, w, LossKind::ZeroOne);

        w = exp_gradient_step(w, losses, alpha);
        aug.weights.head(n) = w.values();

        IterationRecord rec;
        rec.discriminator_loss = disc_loss;
        rec.weights = w.values();
        rec.weight_sq_norm = (w.values() / static_cast<double>(n)).squaredNorm();
        rec.h_divergence = 2.0 * (1.0 - disc_loss);
        trace.iterations.push_back(std::move(rec));
    }
    return {std::move(w), std::move(trace), family, std::move(warnings)};
}

} // namespace advbal

#pragma once

// Weighted binary classifiers used as plug-in discriminators.

#include <advbal/classifiers/family.hpp>
#include <advbal/classifiers/objectives.hpp>
#include <advbal/core.hpp>
#include <advbal/kernels.hpp>
#include <advbal/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <variant>
#include <vector>

namespace advbal {

namespace detail {

struct LinearParams {
    Vector coef;
    double intercept = 0.0;
};

struct KernelParams {
    Matrix support;  // standardized centers
    double scale = 1.0;
    Vector dual;
    double intercept = 0.0;
};

struct MlpParams {
    std::vector<MlpObjective::Shape> shapes;
    Vector theta;
};

struct StumpParams {
    Eigen::Index feature = 0;
    double threshold = 0.0;
    bool greater_is_one = true;
};

using ModelParams = std::variant<LinearParams, KernelParams, MlpParams, StumpParams>;

inline void check_training_inputs(const Matrix& x, const std::vector<int>& labels, const Vector& weights) {
    if (static_cast<std::size_t>(x.rows()) != labels.size() ||
        static_cast<Eigen::Index>(labels.size()) != weights.size()) {
        throw InvalidInput("fit: X rows, labels and sample weights must have equal length");
    }
    if (x.rows() == 0 || x.cols() == 0) {
        throw InvalidInput("fit: empty design matrix");
    }
    if (!x.allFinite()) {
        throw InvalidInput("fit: non-finite entries in X");
    }
    if (!weights.allFinite() || (weights.array() < 0.0).any()) {
        throw InvalidInput("fit: sample weights must be finite and nonnegative");
    }
    double mass[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw InvalidInput("fit: labels must be 0 or 1");
        }
        mass[labels[i]] += weights[static_cast<Eigen::Index>(i)];
    }
    if (!(mass[0] > 0.0) || !(mass[1] > 0.0)) {
        throw DegenerateLabels("fit: both classes must be present with positive total weight");
    }
}

inline Vector label_vector(const std::vector<int>& labels) {
    Vector y(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) y[static_cast<Eigen::Index>(i)] = labels[i];
    return y;
}

inline double default_kernel_scale(Eigen::Index dims) { return std::sqrt(static_cast<double>(dims) / 2.0); }

inline std::vector<Eigen::Index> choose_support(Eigen::Index rows, std::size_t max_support, std::uint64_t seed) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(rows));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    if (idx.size() > max_support) {
        RngStream rng(mix_seed(seed, 0x5u));
        rng.shuffle(idx);
        idx.resize(max_support);
        std::sort(idx.begin(), idx.end());
    }
    return idx;
}

// Training problem for the penalized-logistic families after standardization;
// also used by the gradient checker.
struct LogisticSetup {
    PenalizedLogistic objective;
    Matrix support;
    double scale = 1.0;
};

inline LogisticSetup logistic_setup(const FamilySpec& family, const Matrix& z, const Vector& y,
                                    const Vector& w, std::uint64_t seed) {
    if (family.kind == FamilyKind::LogisticRegression) {
        const Matrix penalty = Matrix::Identity(z.cols(), z.cols());
        return {PenalizedLogistic(z, y, w, penalty, family.regularization), Matrix(), 1.0};
    }
    const double scale = family.kernel_scale.value_or(default_kernel_scale(z.cols()));
    const auto idx = choose_support(z.rows(), family.max_support, seed);
    Matrix support(static_cast<Eigen::Index>(idx.size()), z.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) support.row(static_cast<Eigen::Index>(k)) = z.row(idx[k]);
    Matrix features = rbf_kernel_matrix(z, support, scale);
    Matrix penalty = rbf_kernel_matrix(support, support, scale);
    penalty.diagonal().array() += 1e-8;
    return {PenalizedLogistic(std::move(features), y, w, std::move(penalty), family.regularization),
            std::move(support), scale};
}

inline Eigen::Index mlp_width(Eigen::Index dims) { return 2 * dims; }

// Exhaustive search over features, cut points and both polarities for the
// minimum weighted 0-1 error; the constant classifiers are included.
inline StumpParams fit_stump(const Matrix& z, const Vector& y, const Vector& w) {
    StumpParams best;
    double best_err = std::numeric_limits<double>::infinity();
    const double total1 = (w.array() * y.array()).sum();
    const double total0 = w.sum() - total1;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        std::vector<Eigen::Index> order(static_cast<std::size_t>(z.rows()));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return z(a, j) < z(b, j); });
        // Prefix masses of rows with x <= cut, scanning cuts between distinct values.
        double below0 = 0.0;
        double below1 = 0.0;
        auto consider = [&](double threshold) {
            // greater_is_one: errors are class-1 rows below plus class-0 rows above.
            const double err_gt = below1 + (total0 - below0);
            const double err_le = below0 + (total1 - below1);
            if (err_gt < best_err) {
                best_err = err_gt;
                best = {j, threshold, true};
            }
            if (err_le < best_err) {
                best_err = err_le;
                best = {j, threshold, false};
            }
        };
        consider(-std::numeric_limits<double>::infinity());
        for (std::size_t k = 0; k < order.size(); ++k) {
            const auto i = order[k];
            (y[i] > 0.5 ? below1 : below0) += w[i];
            if (k + 1 < order.size() && z(order[k + 1], j) > z(i, j)) {
                consider(0.5 * (z(i, j) + z(order[k + 1], j)));
            }
        }
    }
    return best;
}

} // namespace detail

// A fitted discriminator. Immutable after fit; safe for concurrent prediction.
class ClassifierModel {
public:
    ClassifierModel(FamilySpec family, detail::Standardizer standardizer, detail::ModelParams params,
                    bool converged, int iterations)
        : family_(std::move(family)),
          standardizer_(std::move(standardizer)),
          params_(std::move(params)),
          converged_(converged),
          iterations_(iterations) {}

    // Zero-coefficient logistic model with the given intercept on d raw features.
    static ClassifierModel constant_logistic(Eigen::Index dims, double intercept) {
        detail::Standardizer s{Vector::Zero(dims), Vector::Ones(dims)};
        return ClassifierModel(FamilySpec::logistic(), std::move(s),
                               detail::LinearParams{Vector::Zero(dims), intercept}, true, 0);
    }

    const FamilySpec& family() const { return family_; }
    const detail::ModelParams& params() const { return params_; }
    const detail::Standardizer& standardizer() const { return standardizer_; }
    Eigen::Index dims() const { return standardizer_.mean.size(); }
    bool converged() const { return converged_; }
    int iterations() const { return iterations_; }

    // P(label = 1 | x) per row.
    Vector predict_proba(const Matrix& x) const {
        if (x.cols() != dims()) {
            throw InvalidInput("predict_proba: expected " + std::to_string(dims()) + " columns, got " +
                               std::to_string(x.cols()));
        }
        const Matrix z = standardizer_.apply(x);
        return std::visit([&](const auto& p) { return proba(p, z); }, params_);
    }

    std::vector<int> predict(const Matrix& x) const {
        const Vector p = predict_proba(x);
        std::vector<int> out(static_cast<std::size_t>(p.size()));
        for (Eigen::Index i = 0; i < p.size(); ++i) out[static_cast<std::size_t>(i)] = p[i] > 0.5 ? 1 : 0;
        return out;
    }

private:
    static Vector squash(const Vector& logits) {
        Vector p(logits.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = detail::sigmoid(logits[i]);
        return p;
    }

    static Vector proba(const detail::LinearParams& p, const Matrix& z) {
        return squash((z * p.coef).array() + p.intercept);
    }

    static Vector proba(const detail::KernelParams& p, const Matrix& z) {
        return squash((rbf_kernel_matrix(z, p.support, p.scale) * p.dual).array() + p.intercept);
    }

    static Vector proba(const detail::MlpParams& p, const Matrix& z) {
        return squash(detail::MlpObjective::forward(p.shapes, p.theta, z));
    }

    static Vector proba(const detail::StumpParams& p, const Matrix& z) {
        Vector out(z.rows());
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const bool above = z(i, p.feature) > p.threshold;
            out[i] = above == p.greater_is_one ? 1.0 : 0.0;
        }
        return out;
    }

    FamilySpec family_;
    detail::Standardizer standardizer_;
    detail::ModelParams params_;
    bool converged_;
    int iterations_;
};

// Minimizes the weighted, L2-regularized log-loss of the family (the stump
// minimizes weighted 0-1 error exactly). Features are standardized with the
// weighted moments of X. Non-convergence within budget is reported through
// ClassifierModel::converged(), not thrown.
inline ClassifierModel fit(const FamilySpec& family, const Matrix& x, const std::vector<int>& labels,
                           const Vector& sample_weights, std::uint64_t seed = 0) {
    family.validate();
    detail::check_training_inputs(x, labels, sample_weights);
    const Vector w = detail::mean_one(sample_weights);
    const Vector y = detail::label_vector(labels);
    auto standardizer = detail::Standardizer::fit(x, w);
    const Matrix z = standardizer.apply(x);

    switch (family.kind) {
    case FamilyKind::LogisticRegression:
    case FamilyKind::KernelLogisticRBF: {
        auto setup = detail::logistic_setup(family, z, y, w, seed);
        auto res = detail::minimize_newton(setup.objective, Vector::Zero(setup.objective.dims()),
                                           family.budget.max_iter, family.budget.tolerance);
        const Eigen::Index p = setup.objective.dims() - 1;
        detail::ModelParams params;
        if (family.kind == FamilyKind::LogisticRegression) {
            params = detail::LinearParams{res.theta.head(p), res.theta[p]};
        } else {
            params = detail::KernelParams{std::move(setup.support), setup.scale, res.theta.head(p), res.theta[p]};
        }
        return ClassifierModel(family, std::move(standardizer), std::move(params), res.converged,
                               res.iterations);
    }
    case FamilyKind::Mlp: {
        detail::MlpObjective obj(z, y, w, family.depth, detail::mlp_width(z.cols()), family.regularization);
        auto res = detail::minimize_gradient_descent(obj, obj.initial(mix_seed(seed, 0x3u)),
                                                     family.budget.max_iter, family.budget.tolerance);
        return ClassifierModel(family, std::move(standardizer), detail::MlpParams{obj.shapes(), res.theta},
                               res.converged, res.iterations);
    }
    case FamilyKind::Stump:
        return ClassifierModel(family, std::move(standardizer), detail::fit_stump(z, y, w), true, 1);
    }
    throw InvalidInput("fit: unknown family");
}

inline Vector predict_proba(const ClassifierModel& model, const Matrix& x) { return model.predict_proba(x); }

} // namespace advbal

#pragma once

// Shared data model: datasets, estimands, balancing problems, weights, losses
// and the weighted outcome estimator.

#include <advbal/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace advbal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kWeightMeanTolerance = 1e-9;

class Dataset {
public:
    Dataset() = default;

    // treatment_levels empty means "the distinct values present in treatment".
    Dataset(Matrix covariates, std::vector<int> treatment,
            std::vector<std::optional<double>> outcome,
            std::vector<std::string> column_names,
            std::vector<int> treatment_levels = {})
        : covariates_(std::move(covariates)),
          treatment_(std::move(treatment)),
          outcome_(std::move(outcome)),
          column_names_(std::move(column_names)),
          levels_(std::move(treatment_levels)) {
        const auto n = static_cast<std::size_t>(covariates_.rows());
        if (treatment_.size() != n || outcome_.size() != n) {
            throw InvalidInput("dataset: treatment/outcome length must equal the number of rows");
        }
        if (column_names_.size() != static_cast<std::size_t>(covariates_.cols())) {
            throw InvalidInput("dataset: column_names must have one entry per covariate");
        }
        if (!covariates_.allFinite()) {
            throw InvalidInput("dataset: covariates contain non-finite entries");
        }
        for (const auto& y : outcome_) {
            if (y && !std::isfinite(*y)) {
                throw InvalidInput("dataset: outcome contains a non-finite value");
            }
        }
        if (levels_.empty()) {
            std::set<int> present(treatment_.begin(), treatment_.end());
            levels_.assign(present.begin(), present.end());
        } else {
            std::sort(levels_.begin(), levels_.end());
            for (int a : treatment_) {
                if (!std::binary_search(levels_.begin(), levels_.end(), a)) {
                    throw InvalidInput("dataset: treatment value " + std::to_string(a) +
                                       " is not in the declared treatment set");
                }
            }
        }
    }

    const Matrix& covariates() const { return covariates_; }
    const std::vector<int>& treatment() const { return treatment_; }
    const std::vector<std::optional<double>>& outcome() const { return outcome_; }
    const std::vector<std::string>& column_names() const { return column_names_; }
    const std::vector<int>& treatment_levels() const { return levels_; }

    std::size_t rows() const { return treatment_.size(); }
    std::size_t dims() const { return static_cast<std::size_t>(covariates_.cols()); }

    std::size_t count(int treatment_value) const {
        return static_cast<std::size_t>(
            std::count(treatment_.begin(), treatment_.end(), treatment_value));
    }

    // Distinct treatment values that actually occur.
    std::vector<int> present_levels() const {
        std::set<int> present(treatment_.begin(), treatment_.end());
        return {present.begin(), present.end()};
    }

private:
    Matrix covariates_;
    std::vector<int> treatment_;
    std::vector<std::optional<double>> outcome_;
    std::vector<std::string> column_names_;
    std::vector<int> levels_;
};

struct Estimand {
    enum class Kind { ExpectedPotentialOutcome, ATE, ATT };

    Kind kind = Kind::ATE;
    // Treatment arm for ExpectedPotentialOutcome, reference (treated) arm for ATT.
    int level = 1;

    static Estimand expected_potential_outcome(int a) { return {Kind::ExpectedPotentialOutcome, a}; }
    static Estimand ate() { return {Kind::ATE, 1}; }
    static Estimand att(int reference_treatment = 1) { return {Kind::ATT, reference_treatment}; }

    friend bool operator==(const Estimand&, const Estimand&) = default;
};

// Source sample to be reweighted and the target sample it should resemble.
class BalancingProblem {
public:
    BalancingProblem(Matrix source, Matrix target,
                     std::vector<std::size_t> source_rows = {},
                     std::vector<std::size_t> target_rows = {})
        : source_(std::move(source)),
          target_(std::move(target)),
          source_rows_(std::move(source_rows)),
          target_rows_(std::move(target_rows)) {
        if (source_.cols() != target_.cols()) {
            throw InvalidInput("balancing problem: source and target column counts differ");
        }
        if (source_.rows() < 2 || target_.rows() < 2) {
            throw DegenerateProblem("balancing problem: source and target need at least 2 rows each (got " +
                                    std::to_string(source_.rows()) + " and " +
                                    std::to_string(target_.rows()) + ")");
        }
        if (!source_.allFinite() || !target_.allFinite()) {
            throw InvalidInput("balancing problem: non-finite covariates");
        }
    }

    const Matrix& source() const { return source_; }
    const Matrix& target() const { return target_; }
    std::size_t n() const { return static_cast<std::size_t>(source_.rows()); }
    std::size_t n_target() const { return static_cast<std::size_t>(target_.rows()); }
    std::size_t dims() const { return static_cast<std::size_t>(source_.cols()); }

    // Dataset row indices of each side; empty when built directly from matrices.
    const std::vector<std::size_t>& source_rows() const { return source_rows_; }
    const std::vector<std::size_t>& target_rows() const { return target_rows_; }

private:
    Matrix source_;
    Matrix target_;
    std::vector<std::size_t> source_rows_;
    std::vector<std::size_t> target_rows_;
};

// Nonnegative weights with mean exactly one (sum equals the sample size).
class WeightVector {
public:
    explicit WeightVector(Vector w) : w_(std::move(w)) {
        if (w_.size() == 0) {
            throw InvalidInput("weights: empty vector");
        }
        if (!w_.allFinite() || (w_.array() < 0.0).any()) {
            throw InvalidInput("weights: entries must be finite and nonnegative");
        }
        const double mean = w_.mean();
        if (std::abs(mean - 1.0) > kWeightMeanTolerance) {
            throw InvalidInput("weights: mean must be 1 (got " + std::to_string(mean) + ")");
        }
    }

    static WeightVector uniform(std::size_t n) {
        return WeightVector(Vector::Ones(static_cast<Eigen::Index>(n)));
    }

    // Rescales any nonnegative vector with positive sum to mean 1.
    static WeightVector normalized(const Vector& raw) {
        if (raw.size() == 0 || !raw.allFinite() || (raw.array() < 0.0).any()) {
            throw InvalidInput("weights: entries must be finite and nonnegative");
        }
        const double total = raw.sum();
        if (!(total > 0.0)) {
            throw InvalidInput("weights: all-zero weight vector cannot be normalized");
        }
        return WeightVector(raw * (static_cast<double>(raw.size()) / total));
    }

    const Vector& values() const { return w_; }
    double operator[](std::size_t i) const { return w_[static_cast<Eigen::Index>(i)]; }
    std::size_t size() const { return static_cast<std::size_t>(w_.size()); }

private:
    Vector w_;
};

enum class LossKind { ZeroOne, Log };

inline constexpr double kLogLossClip = 1e-12;

// 1 iff the hard prediction (1 when prob > 0.5, strictly) differs from label.
inline double zero_one_loss(double predicted_prob, int label) {
    if (!std::isfinite(predicted_prob)) {
        throw InvalidInput("zero_one_loss: non-finite probability");
    }
    const int hard = predicted_prob > 0.5 ? 1 : 0;
    return hard != label ? 1.0 : 0.0;
}

// Nonnegative log-loss with the probability clipped to [1e-12, 1 - 1e-12].
inline double log_loss(double predicted_prob, int label) {
    const double p = std::clamp(predicted_prob, kLogLossClip, 1.0 - kLogLossClip);
    return label == 1 ? -std::log(p) : -std::log1p(-p);
}

inline double loss_value(LossKind kind, double predicted_prob, int label) {
    return kind == LossKind::ZeroOne ? zero_one_loss(predicted_prob, label)
                                     : log_loss(predicted_prob, label);
}

// (1/n) sum w_i y_i under mean-1 weights.
inline double weighted_outcome_estimate(const WeightVector& w, const Vector& y) {
    if (static_cast<std::size_t>(y.size()) != w.size()) {
        throw InvalidInput("weighted_outcome_estimate: weights and outcomes differ in length");
    }
    if (!y.allFinite()) {
        throw InvalidInput("weighted_outcome_estimate: non-finite outcome");
    }
    return w.values().dot(y) / static_cast<double>(y.size());
}

inline Matrix select_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

inline std::vector<std::size_t> rows_with_treatment(const Dataset& ds, int value) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        if (ds.treatment()[i] == value) rows.push_back(i);
    }
    return rows;
}

inline BalancingProblem build_balancing_problem(const Dataset& ds, const Estimand& estimand,
                                                int treatment_value) {
    auto source_rows = rows_with_treatment(ds, treatment_value);
    std::vector<std::size_t> target_rows;
    if (estimand.kind == Estimand::Kind::ATT) {
        if (ds.present_levels().size() != 2) {
            throw InvalidInput("ATT requires exactly two treatment values present");
        }
        target_rows = rows_with_treatment(ds, estimand.level);
    } else {
        target_rows.resize(ds.rows());
        for (std::size_t i = 0; i < ds.rows(); ++i) target_rows[i] = i;
    }
    if (source_rows.size() < 2 || target_rows.size() < 2) {
        throw DegenerateProblem("treatment value " + std::to_string(treatment_value) +
                                ": need at least 2 source and 2 target rows (got " +
                                std::to_string(source_rows.size()) + " and " +
                                std::to_string(target_rows.size()) + ")");
    }
    Matrix source = select_rows(ds.covariates(), source_rows);
    Matrix target = select_rows(ds.covariates(), target_rows);
    return BalancingProblem(std::move(source), std::move(target), std::move(source_rows),
                            std::move(target_rows));
}

// Observed outcomes of the given dataset rows; a missing one is an error here.
inline Vector outcomes_for_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
    Vector y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& cell = ds.outcome()[rows[i]];
        if (!cell) {
            throw InvalidInput("outcome missing for row " + std::to_string(rows[i]));
        }
        y[static_cast<Eigen::Index>(i)] = *cell;
    }
    return y;
}

} // namespace advbal

#pragma once

#include <advbal/classifiers/model.hpp>

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace advbal {

struct FoldAssignment {
    std::vector<int> fold;  // fold index per row
    int k = 0;
    std::vector<std::string> warnings;
};

// Stratified k-fold assignment, deterministic in seed. Each class is shuffled
// and dealt round-robin, so every fold holds both classes. k shrinks to the
// minority-class size when that is smaller.
inline FoldAssignment stratified_folds(const std::vector<int>& labels, int k, std::uint64_t seed) {
    if (k < 2) {
        throw InvalidInput("stratified_folds: k must be at least 2");
    }
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw InvalidInput("stratified_folds: labels must be 0 or 1");
        by_class[labels[i]].push_back(i);
    }
    const std::size_t minority = std::min(by_class[0].size(), by_class[1].size());
    if (minority < 2) {
        throw DegenerateLabels("stratified_folds: the minority class has " + std::to_string(minority) +
                               " member(s); at least 2 are needed");
    }
    FoldAssignment out;
    out.k = k;
    if (minority < static_cast<std::size_t>(k)) {
        out.k = static_cast<int>(minority);
        out.warnings.push_back("stratified_folds: reduced k from " + std::to_string(k) + " to " +
                               std::to_string(out.k) + " (minority class size)");
    }
    out.fold.assign(labels.size(), 0);
    RngStream rng(mix_seed(seed, 0xF01D));
    for (auto& members : by_class) {
        rng.shuffle(members);
        for (std::size_t r = 0; r < members.size(); ++r) out.fold[members[r]] = static_cast<int>(r % out.k);
    }
    return out;
}

namespace detail {

struct Split {
    Matrix x;
    std::vector<int> labels;
    Vector weights;
    std::vector<std::size_t> rows;
};

inline Split take(const Matrix& x, const std::vector<int>& labels, const Vector& w,
                  const std::vector<int>& fold, int f, bool inside) {
    Split s;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if ((fold[i] == f) == inside) s.rows.push_back(i);
    }
    s.x = select_rows(x, s.rows);
    s.weights.resize(static_cast<Eigen::Index>(s.rows.size()));
    for (std::size_t r = 0; r < s.rows.size(); ++r) {
        s.labels.push_back(labels[s.rows[r]]);
        s.weights[static_cast<Eigen::Index>(r)] = w[static_cast<Eigen::Index>(s.rows[r])];
    }
    return s;
}

} // namespace detail

// Out-of-fold P(label = 1) for every row: each fold is scored by a model fit on
// the remaining folds.
inline Vector cross_fit_proba(const FamilySpec& family, const Matrix& x, const std::vector<int>& labels,
                              const Vector& weights, const FoldAssignment& folds, std::uint64_t seed) {
    Vector out(x.rows());
    for (int f = 0; f < folds.k; ++f) {
        auto train = detail::take(x, labels, weights, folds.fold, f, false);
        auto held = detail::take(x, labels, weights, folds.fold, f, true);
        auto model = fit(family, train.x, train.labels, train.weights, mix_seed(seed, static_cast<std::uint64_t>(f)));
        const Vector p = model.predict_proba(held.x);
        for (std::size_t r = 0; r < held.rows.size(); ++r) out[static_cast<Eigen::Index>(held.rows[r])] = p[static_cast<Eigen::Index>(r)];
    }
    return out;
}

struct CvSelection {
    FamilySpec family;
    std::size_t index = 0;
    std::vector<double> cv_errors;  // mean held-out weighted 0-1 error per candidate
    int folds = 0;
    std::vector<std::string> warnings;
};

// Picks the candidate with the smallest mean weighted 0-1 error over
// stratified folds; ties go to the earlier candidate.
inline CvSelection cross_val_select(const std::vector<FamilySpec>& candidates, const Matrix& x,
                                    const std::vector<int>& labels, const Vector& weights, int k,
                                    std::uint64_t seed) {
    if (candidates.empty()) {
        throw InvalidInput("cross_val_select: no candidates");
    }
    if (x.rows() < k) {
        throw InvalidInput("cross_val_select: fewer rows than folds");
    }
    detail::check_training_inputs(x, labels, weights);
    auto folds = stratified_folds(labels, k, seed);
    CvSelection sel;
    sel.folds = folds.k;
    sel.warnings = folds.warnings;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        double total = 0.0;
        for (int f = 0; f < folds.k; ++f) {
            auto train = detail::take(x, labels, weights, folds.fold, f, false);
            auto held = detail::take(x, labels, weights, folds.fold, f, true);
            auto model = fit(candidates[c], train.x, train.labels, train.weights,
                             mix_seed(seed, static_cast<std::uint64_t>(f)));
            const Vector p = model.predict_proba(held.x);
            double err = 0.0;
            for (Eigen::Index r = 0; r < p.size(); ++r) {
                err += held.weights[r] * zero_one_loss(p[r], held.labels[static_cast<std::size_t>(r)]);
            }
            const double mass = held.weights.sum();
            total += mass > 0.0 ? err / mass : 0.0;
        }
        const double mean = total / folds.k;
        sel.cv_errors.push_back(mean);
        if (mean < best) {
            best = mean;
            sel.index = c;
        }
    }
    sel.family = candidates[sel.index];
    return sel;
}

} // namespace advbal

#pragma once

// Comparison weighting methods: inverse propensity weighting and weights that
// minimize the squared kernel MMD between the reweighted source and the target.

#include <advbal/classifiers.hpp>
#include <advbal/core.hpp>
#include <advbal/kernels.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

namespace advbal {

inline constexpr double kPropensityClip = 1e-12;

struct IpwResult {
    WeightVector weights;
    std::vector<std::size_t> source_rows;            // dataset rows the weights refer to
    std::vector<std::size_t> positivity_violations;  // source rows with propensity <= 1e-12
};

// Hajek-normalized inverse propensity weights from fitted propensities of the
// source arm. ATE legs use marginal / p(x); ATT uses the odds form
// (1 - p(x)) / p(x) * marginal / (1 - marginal).
inline WeightVector ipw_from_propensity(const Vector& source_propensity, double marginal, const Estimand& estimand,
                                        std::vector<std::size_t>* clipped = nullptr) {
    Vector raw(source_propensity.size());
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        double p = source_propensity[i];
        if (p <= kPropensityClip) {
            if (clipped) clipped->push_back(static_cast<std::size_t>(i));
            p = kPropensityClip;
        }
        p = std::min(p, 1.0);
        raw[i] = estimand.kind == Estimand::Kind::ATT ? (1.0 - p) / p * marginal / (1.0 - marginal) : marginal / p;
    }
    return WeightVector::normalized(raw);
}

inline IpwResult ipw_weights(const Dataset& ds, const FamilySpec& family, const Estimand& estimand,
                             int treatment_value, std::uint64_t seed = 0) {
    auto source_rows = rows_with_treatment(ds, treatment_value);
    if (source_rows.size() < 2) {
        throw DegenerateProblem("ipw_weights: treatment value " + std::to_string(treatment_value) +
                                " has fewer than 2 units");
    }
    if (estimand.kind == Estimand::Kind::ATT && ds.present_levels().size() != 2) {
        throw InvalidInput("ATT requires exactly two treatment values present");
    }
    std::vector<int> labels(ds.rows());
    for (std::size_t i = 0; i < ds.rows(); ++i) labels[i] = ds.treatment()[i] == treatment_value ? 1 : 0;
    const auto model = fit(family, ds.covariates(), labels, Vector::Ones(static_cast<Eigen::Index>(ds.rows())), seed);
    const Vector source_p = model.predict_proba(select_rows(ds.covariates(), source_rows));
    const double marginal = static_cast<double>(source_rows.size()) / static_cast<double>(ds.rows());

    std::vector<std::size_t> clipped;
    auto w = ipw_from_propensity(source_p, marginal, estimand, &clipped);
    for (auto& idx : clipped) idx = source_rows[idx];
    return {std::move(w), std::move(source_rows), std::move(clipped)};
}

// Euclidean projection onto {w >= 0, sum w = total} by the sort-and-threshold rule.
inline Vector project_to_scaled_simplex(const Vector& v, double total) {
    std::vector<double> u(v.data(), v.data() + v.size());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumulative += u[j];
        const double candidate = (cumulative - total) / static_cast<double>(j + 1);
        if (u[j] - candidate > 0.0) theta = candidate;
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

// Minimize 0.5 w'Qw + c'w over mean-1 nonnegative weights.
struct QpProblem {
    Matrix q;
    Vector c;

    QpProblem(Matrix q_in, Vector c_in) : q(std::move(q_in)), c(std::move(c_in)) {
        if (q.rows() != q.cols() || q.rows() != c.size() || q.rows() == 0) {
            throw InvalidInput("qp: Q must be square and match c");
        }
        if (!q.allFinite() || !c.allFinite()) {
            throw InvalidInput("qp: non-finite entries");
        }
        if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
            throw InvalidInput("qp: Q is not symmetric");
        }
        // The dense eigen check is cubic; larger problems are trusted to come
        // from a PSD construction (kernel Gram matrices).
        if (q.rows() <= 500) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(q, Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() < -1e-8) {
                throw InvalidInput("qp: Q is not positive semidefinite");
            }
        }
    }

    Eigen::Index size() const { return c.size(); }
    double objective(const Vector& w) const { return 0.5 * w.dot(q * w) + c.dot(w); }
    Vector gradient(const Vector& w) const { return q * w + c; }
};

struct QpResult {
    WeightVector weights;
    int iterations = 0;
    double gradient_mapping_norm = 0.0;
    bool converged = false;
};

// Accelerated projected gradient (FISTA with adaptive restart) with step 1/L,
// L the Gershgorin bound on the largest eigenvalue of Q. Stops when the
// gradient mapping L |w - P(w - grad/L)| drops to tol.
inline QpResult simplex_qp_solve(const QpProblem& qp, const WeightVector& init, double tol = 1e-8,
                                 int max_iter = 10000) {
    if (static_cast<Eigen::Index>(init.size()) != qp.size()) {
        throw InvalidInput("simplex_qp_solve: initial point has the wrong size");
    }
    const double total = static_cast<double>(qp.size());
    double lipschitz = qp.q.cwiseAbs().rowwise().sum().maxCoeff();
    if (!(lipschitz > 0.0)) lipschitz = 1.0;

    auto project = [&](const Vector& v) { return project_to_scaled_simplex(v, total); };
    auto mapping_norm = [&](const Vector& w, const Vector& grad) {
        return lipschitz * (w - project(w - grad / lipschitz)).norm();
    };

    Vector x = project(init.values());
    Vector y = x;
    double momentum = 1.0;
    QpResult res{WeightVector::normalized(x)};
    int it = 0;
    for (; it < max_iter; ++it) {
        const Vector gy = qp.gradient(y);
        Vector next = project(y - gy / lipschitz);
        if (lipschitz * (y - next).norm() <= tol) {
            x = std::move(next);
            res.converged = true;
            ++it;
            break;
        }
        if ((y - next).dot(next - x) > 0.0) {
            // Momentum is pointing uphill; restart.
            momentum = 1.0;
            y = next;
        } else {
            const double following = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
            y = next + ((momentum - 1.0) / following) * (next - x);
            momentum = following;
        }
        x = std::move(next);
    }
    res.iterations = it;
    // Accelerated iterates are not monotone; never return worse than the start.
    const Vector start = project(init.values());
    if (qp.objective(x) > qp.objective(start)) x = start;
    res.gradient_mapping_norm = mapping_norm(x, qp.gradient(x));
    if (!res.converged) res.converged = res.gradient_mapping_norm <= tol;
    res.weights = WeightVector::normalized(x.cwiseMax(0.0));
    return res;
}

struct MmdResult {
    WeightVector weights;
    bool converged = false;
    int iterations = 0;
    double gradient_mapping_norm = 0.0;
    double objective = 0.0;  // at the solution, constant target-target term omitted
};

namespace detail {

// sum_j k(a_i, b_j) without materializing the kernel matrix.
inline Vector kernel_row_sums(const Matrix& a, const Matrix& b, double scale) {
    const double inv = 1.0 / (2.0 * scale * scale);
    const Matrix at = a.transpose();
    const Matrix bt = b.transpose();
    Vector out = Vector::Zero(a.rows());
    for (Eigen::Index i = 0; i < at.cols(); ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < bt.cols(); ++j) s += std::exp(-(at.col(i) - bt.col(j)).squaredNorm() * inv);
        out[i] = s;
    }
    return out;
}

} // namespace detail

// QP pieces of (1/n^2) w'K_SS w - (2/(n n')) w'K_ST 1 + ridge |w/n|^2.
inline QpProblem mmd_qp(const BalancingProblem& prob, double scale = 1.0, double ridge = 1e-6) {
    if (!(scale > 0.0)) throw InvalidInput("mmd: scale must be positive");
    if (ridge < 0.0) throw InvalidInput("mmd: ridge must be nonnegative");
    const double n = static_cast<double>(prob.n());
    const double nt = static_cast<double>(prob.n_target());
    Matrix q = rbf_kernel_matrix(prob.source(), prob.source(), scale);
    q.diagonal().array() += ridge;
    q *= 2.0 / (n * n);
    Vector c = detail::kernel_row_sums(prob.source(), prob.target(), scale) * (-2.0 / (n * nt));
    return QpProblem(std::move(q), std::move(c));
}

inline MmdResult mmd_weights(const BalancingProblem& prob, double scale = 1.0, double ridge = 1e-6,
                             double tol = 1e-8, int max_iter = 10000) {
    const QpProblem qp = mmd_qp(prob, scale, ridge);
    auto sol = simplex_qp_solve(qp, WeightVector::uniform(prob.n()), tol, max_iter);
    const double obj = qp.objective(sol.weights.values());
    return {std::move(sol.weights), sol.converged, sol.iterations, sol.gradient_mapping_norm, obj};
}

} // namespace advbal

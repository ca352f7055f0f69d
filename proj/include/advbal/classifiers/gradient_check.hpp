#pragma once

#include <advbal/classifiers/model.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace advbal {

namespace detail {

template <class Objective>
double gradient_discrepancy(const Objective& obj, const Vector& theta, double epsilon) {
    const Vector analytic = obj.gradient(theta);
    Vector numeric(theta.size());
    Vector probe = theta;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        probe[k] = theta[k] + epsilon;
        const double up = obj.value(probe);
        probe[k] = theta[k] - epsilon;
        const double down = obj.value(probe);
        probe[k] = theta[k];
        numeric[k] = (up - down) / (2.0 * epsilon);
    }
    const double scale = std::max({analytic.lpNorm<Eigen::Infinity>(), numeric.lpNorm<Eigen::Infinity>(), 1e-12});
    return (analytic - numeric).lpNorm<Eigen::Infinity>() / scale;
}

} // namespace detail

// Max componentwise gap between the analytic gradient of the training
// objective and central finite differences, relative to the gradient's
// infinity norm, at a random parameter point drawn from N(0, 0.5^2).
inline double gradient_check(const FamilySpec& family, const Matrix& x, const std::vector<int>& labels,
                             const Vector& weights, double epsilon = 1e-6, std::uint64_t seed = 0) {
    family.validate();
    detail::check_training_inputs(x, labels, weights);
    const Vector w = detail::mean_one(weights);
    const Vector y = detail::label_vector(labels);
    const auto standardizer = detail::Standardizer::fit(x, w);
    const Matrix z = standardizer.apply(x);
    RngStream rng(mix_seed(seed, 0x6C));
    auto random_point = [&](Eigen::Index dims) {
        Vector theta(dims);
        for (Eigen::Index k = 0; k < dims; ++k) theta[k] = 0.5 * rng.normal();
        return theta;
    };
    switch (family.kind) {
    case FamilyKind::LogisticRegression:
    case FamilyKind::KernelLogisticRBF: {
        const auto setup = detail::logistic_setup(family, z, y, w, seed);
        return detail::gradient_discrepancy(setup.objective, random_point(setup.objective.dims()), epsilon);
    }
    case FamilyKind::Mlp: {
        const detail::MlpObjective obj(z, y, w, family.depth, detail::mlp_width(z.cols()), family.regularization);
        return detail::gradient_discrepancy(obj, random_point(obj.dims()), epsilon);
    }
    case FamilyKind::Stump:
        throw InvalidInput("gradient_check: the stump family has no gradient");
    }
    return 0.0;
}

} // namespace advbal

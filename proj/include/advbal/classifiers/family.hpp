#pragma once

#include <advbal/error.hpp>

#include <cstddef>
#include <optional>
#include <string>

namespace advbal {

enum class FamilyKind {
    LogisticRegression,
    KernelLogisticRBF,
    Mlp,
    // Exhaustive weighted 0-1 decision stump (thresholds and their inverses).
    Stump,
};

struct TrainingBudget {
    int max_iter = 100;
    double tolerance = 1e-6;
};

// A discriminator family and its hyperparameters.
struct FamilySpec {
    FamilyKind kind = FamilyKind::LogisticRegression;
    double regularization = 1.0;
    // RBF bandwidth sigma in exp(-|x-y|^2 / (2 sigma^2)) on standardized
    // features. Unset selects sigma^2 = d / 2, i.e. gamma = 1 / (d * var).
    std::optional<double> kernel_scale;
    // Kernel expansion uses at most this many training points as centers.
    std::size_t max_support = 100;
    int depth = 1;
    TrainingBudget budget;

    static FamilySpec logistic(double lambda = 1.0) {
        FamilySpec f;
        f.kind = FamilyKind::LogisticRegression;
        f.regularization = lambda;
        return f;
    }

    static FamilySpec kernel_rbf(std::optional<double> scale = std::nullopt, double lambda = 1.0) {
        FamilySpec f;
        f.kind = FamilyKind::KernelLogisticRBF;
        f.regularization = lambda;
        f.kernel_scale = scale;
        return f;
    }

    static FamilySpec mlp(int depth) {
        FamilySpec f;
        f.kind = FamilyKind::Mlp;
        f.depth = depth;
        f.regularization = 1e-4;
        f.budget = {2000, 1e-6};
        return f;
    }

    static FamilySpec stump() {
        FamilySpec f;
        f.kind = FamilyKind::Stump;
        return f;
    }

    void validate() const {
        if (!(regularization > 0.0)) {
            throw InvalidInput("family: regularization must be positive");
        }
        if (kind == FamilyKind::Mlp && (depth < 1 || depth > 3)) {
            throw InvalidInput("family: MLP depth must be 1, 2 or 3");
        }
        if (kernel_scale && !(*kernel_scale > 0.0)) {
            throw InvalidInput("family: kernel scale must be positive");
        }
        if (kind == FamilyKind::KernelLogisticRBF && max_support < 1) {
            throw InvalidInput("family: max_support must be at least 1");
        }
        if (budget.max_iter < 1 || !(budget.tolerance > 0.0)) {
            throw InvalidInput("family: invalid training budget");
        }
    }

    std::string name() const {
        switch (kind) {
        case FamilyKind::LogisticRegression: return "lr";
        case FamilyKind::KernelLogisticRBF: return "kernel";
        case FamilyKind::Mlp: return "mlp" + std::to_string(depth);
        case FamilyKind::Stump: return "stump";
        }
        return "unknown";
    }
};

} // namespace advbal

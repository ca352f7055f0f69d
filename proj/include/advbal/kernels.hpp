#pragma once

#include <advbal/core.hpp>

#include <cmath>

namespace advbal {

// K_ij = exp(-|a_i - b_j|^2 / (2 scale^2)). Distances are formed directly, so
// K(A, A) is exactly symmetric with a unit diagonal.
inline Matrix rbf_kernel_matrix(const Matrix& a, const Matrix& b, double scale) {
    if (a.cols() != b.cols()) {
        throw InvalidInput("rbf_kernel_matrix: column counts differ");
    }
    if (!(scale > 0.0)) {
        throw InvalidInput("rbf_kernel_matrix: scale must be positive");
    }
    const double inv = 1.0 / (2.0 * scale * scale);
    const Matrix at = a.transpose();
    const Matrix bt = b.transpose();
    Matrix k(a.rows(), b.rows());
    for (Eigen::Index j = 0; j < bt.cols(); ++j) {
        for (Eigen::Index i = 0; i < at.cols(); ++i) {
            k(i, j) = std::exp(-(at.col(i) - bt.col(j)).squaredNorm() * inv);
        }
    }
    return k;
}

} // namespace advbal

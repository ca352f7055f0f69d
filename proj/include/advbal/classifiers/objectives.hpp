#pragma once

// Weighted, L2-regularized log-loss objectives with analytic gradients.
// Parameters are flattened into a single vector so the same objective object
// drives both training and finite-difference gradient checks.

#include <advbal/core.hpp>
#include <advbal/rng.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <vector>

namespace advbal::detail {

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Per-column shift and scale captured at fit time from weighted moments.
struct Standardizer {
    Vector mean;
    Vector scale;

    static Standardizer fit(const Matrix& x, const Vector& w) {
        Standardizer s;
        const double total = w.sum();
        s.mean = (x.transpose() * w) / total;
        s.scale.resize(x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double var = (w.array() * (x.col(j).array() - s.mean[j]).square()).sum() / total;
            const double sd = std::sqrt(var);
            s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[j])) ? sd : 1.0;
        }
        return s;
    }

    Matrix apply(const Matrix& x) const {
        return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
    }
};

// Weights rescaled to mean 1 so regularization strength does not depend on
// the overall weight scale.
inline Vector mean_one(const Vector& w) { return w * (static_cast<double>(w.size()) / w.sum()); }

// sum_i w_i * logloss(sigmoid(phi_i . beta + b), y_i) + (lambda/2) beta' P beta.
// Parameter layout: [beta (p entries), b].
class PenalizedLogistic {
public:
    PenalizedLogistic(Matrix features, Vector labels, Vector weights, Matrix penalty, double lambda)
        : phi_(std::move(features)),
          y_(std::move(labels)),
          w_(std::move(weights)),
          penalty_(std::move(penalty)),
          lambda_(lambda) {}

    Eigen::Index dims() const { return phi_.cols() + 1; }

    Vector logits(const Vector& theta) const {
        return (phi_ * theta.head(phi_.cols())).array() + theta[phi_.cols()];
    }

    double value(const Vector& theta) const {
        const Vector f = logits(theta);
        double loss = 0.0;
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            loss += w_[i] * (softplus(f[i]) - y_[i] * f[i]);
        }
        const auto beta = theta.head(phi_.cols());
        return loss + 0.5 * lambda_ * beta.dot(penalty_ * beta);
    }

    Vector gradient(const Vector& theta) const {
        const Vector f = logits(theta);
        Vector r(f.size());
        for (Eigen::Index i = 0; i < f.size(); ++i) r[i] = w_[i] * (sigmoid(f[i]) - y_[i]);
        Vector g(dims());
        const auto beta = theta.head(phi_.cols());
        g.head(phi_.cols()) = phi_.transpose() * r + lambda_ * (penalty_ * beta);
        g[phi_.cols()] = r.sum();
        return g;
    }

    Matrix hessian(const Vector& theta) const {
        const Vector f = logits(theta);
        Vector d(f.size());
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            const double s = sigmoid(f[i]);
            d[i] = w_[i] * s * (1.0 - s);
        }
        const Eigen::Index p = phi_.cols();
        Matrix h(p + 1, p + 1);
        const Matrix dphi = phi_.array().colwise() * d.array();
        h.topLeftCorner(p, p) = phi_.transpose() * dphi + lambda_ * penalty_;
        h.topRightCorner(p, 1) = dphi.colwise().sum().transpose();
        h.bottomLeftCorner(1, p) = h.topRightCorner(p, 1).transpose();
        h(p, p) = d.sum();
        return h;
    }

private:
    Matrix phi_;
    Vector y_;
    Vector w_;
    Matrix penalty_;
    double lambda_;
};

struct NewtonResult {
    Vector theta;
    int iterations = 0;
    bool converged = false;
};

// Damped Newton with Armijo backtracking; falls back to the gradient
// direction when the Newton system does not yield a descent direction.
inline NewtonResult minimize_newton(const PenalizedLogistic& obj, Vector theta, int max_iter, double tol) {
    NewtonResult res;
    double fval = obj.value(theta);
    for (int it = 0; it < max_iter; ++it) {
        const Vector g = obj.gradient(theta);
        res.iterations = it;
        if (g.norm() <= tol) {
            res.converged = true;
            break;
        }
        const Matrix h = obj.hessian(theta);
        Eigen::LDLT<Matrix> ldlt(h);
        Vector step = -ldlt.solve(g);
        if (ldlt.info() != Eigen::Success || !step.allFinite() || step.dot(g) >= 0.0) {
            step = -g;
        }
        const double slope = step.dot(g);
        // Newton decrement below the resolution of the summed objective.
        if (-slope <= 1e-13 * std::max(1.0, std::abs(fval))) {
            res.converged = true;
            break;
        }
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            Vector cand = theta + t * step;
            const double fc = obj.value(cand);
            if (std::isfinite(fc) && fc <= fval + 1e-4 * t * slope) {
                theta = std::move(cand);
                fval = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // No further decrease representable in floating point.
            res.converged = g.norm() <= std::sqrt(tol);
            res.iterations = it + 1;
            res.theta = std::move(theta);
            return res;
        }
        res.iterations = it + 1;
    }
    if (!res.converged) res.converged = obj.gradient(theta).norm() <= tol;
    res.theta = std::move(theta);
    return res;
}

// Feed-forward ReLU network with a logistic output unit.
// Objective: (1/N) sum_i w_i * logloss_i + (alpha / (2N)) * sum of squared
// connection weights (biases unpenalized).
class MlpObjective {
public:
    MlpObjective(Matrix x, Vector labels, Vector weights, int depth, Eigen::Index width, double alpha)
        : x_(std::move(x)), y_(std::move(labels)), w_(std::move(weights)), alpha_(alpha) {
        Eigen::Index fan_in = x_.cols();
        for (int l = 0; l < depth; ++l) {
            shapes_.push_back({width, fan_in});
            fan_in = width;
        }
        shapes_.push_back({1, fan_in});
    }

    struct Shape {
        Eigen::Index rows;
        Eigen::Index cols;
    };

    const std::vector<Shape>& shapes() const { return shapes_; }

    Eigen::Index dims() const {
        Eigen::Index total = 0;
        for (const auto& s : shapes_) total += s.rows * s.cols + s.rows;
        return total;
    }

    // Symmetric uniform init scaled by 1/sqrt(fan_in); biases start at zero.
    Vector initial(std::uint64_t seed) const {
        RngStream rng(seed);
        Vector theta = Vector::Zero(dims());
        Eigen::Index off = 0;
        for (const auto& s : shapes_) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(s.cols));
            for (Eigen::Index k = 0; k < s.rows * s.cols; ++k) theta[off + k] = rng.uniform(-bound, bound);
            off += s.rows * s.cols + s.rows;
        }
        return theta;
    }

    // Output logits for arbitrary inputs.
    static Vector forward(const std::vector<Shape>& shapes, const Vector& theta, const Matrix& x) {
        Matrix a = x;
        Eigen::Index off = 0;
        for (std::size_t l = 0; l < shapes.size(); ++l) {
            const auto& s = shapes[l];
            Eigen::Map<const Matrix> w(theta.data() + off, s.rows, s.cols);
            Eigen::Map<const Vector> b(theta.data() + off + s.rows * s.cols, s.rows);
            Matrix z = (a * w.transpose()).rowwise() + b.transpose();
            off += s.rows * s.cols + s.rows;
            a = l + 1 < shapes.size() ? Matrix(z.cwiseMax(0.0)) : z;
        }
        return a.col(0);
    }

    double value(const Vector& theta) const {
        const Vector f = forward(shapes_, theta, x_);
        double loss = 0.0;
        for (Eigen::Index i = 0; i < f.size(); ++i) loss += w_[i] * (softplus(f[i]) - y_[i] * f[i]);
        return loss / n() + 0.5 * alpha_ / n() * weight_sq_sum(theta);
    }

    Vector gradient(const Vector& theta) const {
        std::vector<Matrix> acts{x_};
        std::vector<Matrix> pre;
        Eigen::Index off = 0;
        for (std::size_t l = 0; l < shapes_.size(); ++l) {
            const auto& s = shapes_[l];
            Eigen::Map<const Matrix> w(theta.data() + off, s.rows, s.cols);
            Eigen::Map<const Vector> b(theta.data() + off + s.rows * s.cols, s.rows);
            Matrix z = (acts.back() * w.transpose()).rowwise() + b.transpose();
            off += s.rows * s.cols + s.rows;
            pre.push_back(z);
            acts.push_back(l + 1 < shapes_.size() ? Matrix(z.cwiseMax(0.0)) : z);
        }
        Matrix delta(x_.rows(), 1);
        for (Eigen::Index i = 0; i < x_.rows(); ++i) {
            delta(i, 0) = w_[i] * (sigmoid(pre.back()(i, 0)) - y_[i]) / n();
        }
        Vector g(dims());
        for (std::size_t l = shapes_.size(); l-- > 0;) {
            const auto& s = shapes_[l];
            const Eigen::Index start = offset(l);
            Eigen::Map<const Matrix> w(theta.data() + start, s.rows, s.cols);
            Eigen::Map<Matrix> gw(g.data() + start, s.rows, s.cols);
            Eigen::Map<Vector> gb(g.data() + start + s.rows * s.cols, s.rows);
            gw = delta.transpose() * acts[l] + (alpha_ / n()) * w;
            gb = delta.colwise().sum().transpose();
            if (l > 0) {
                Matrix back = delta * w;
                delta = back.array() * (pre[l - 1].array() > 0.0).cast<double>();
            }
        }
        return g;
    }

private:
    double n() const { return static_cast<double>(x_.rows()); }

    Eigen::Index offset(std::size_t layer) const {
        Eigen::Index off = 0;
        for (std::size_t l = 0; l < layer; ++l) off += shapes_[l].rows * shapes_[l].cols + shapes_[l].rows;
        return off;
    }

    double weight_sq_sum(const Vector& theta) const {
        double total = 0.0;
        Eigen::Index off = 0;
        for (const auto& s : shapes_) {
            total += theta.segment(off, s.rows * s.cols).squaredNorm();
            off += s.rows * s.cols + s.rows;
        }
        return total;
    }

    Matrix x_;
    Vector y_;
    Vector w_;
    double alpha_;
    std::vector<Shape> shapes_;
};

struct DescentResult {
    Vector theta;
    int iterations = 0;
    bool converged = false;
};

// Full-batch gradient descent; a step that increases the loss is rejected and
// the step size halved, an accepted step grows it by 10%.
template <class Objective>
DescentResult minimize_gradient_descent(const Objective& obj, Vector theta, int max_iter, double tol) {
    DescentResult res;
    double step = 1.0;
    double fval = obj.value(theta);
    Vector g = obj.gradient(theta);
    for (int it = 0; it < max_iter; ++it) {
        res.iterations = it;
        if (g.norm() <= tol) {
            res.converged = true;
            break;
        }
        bool accepted = false;
        for (int tries = 0; tries < 50; ++tries) {
            Vector cand = theta - step * g;
            const double fc = obj.value(cand);
            if (std::isfinite(fc) && fc <= fval) {
                theta = std::move(cand);
                fval = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        step *= 1.1;
        g = obj.gradient(theta);
        res.iterations = it + 1;
    }
    if (!res.converged) res.converged = g.norm() <= tol;
    res.theta = std::move(theta);
    return res;
}

} // namespace advbal::detail

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "veritas/errors.hpp"
#include "veritas/profile.hpp"

namespace veritas {

struct MfConfig {
    int k = 3;
    double lambda1 = 5.0;
    double lambda2 = 5.0;
    double beta = 0.01; // learning rate
    int max_iters = 5000;
    double tol = 1e-8;  // on |delta objective| between sweeps
    std::uint64_t seed = 0;
};

// Low-rank model Q ~ W * Theta^T. Row i of `user_factors` is w_i, row c of
// `category_factors` is theta_c.
template <class Scalar = double>
struct FactorModel {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Matrix user_factors;
    Matrix category_factors;

    Eigen::Index k() const { return user_factors.cols(); }
    Matrix predict() const { return user_factors * category_factors.transpose(); }
};

namespace detail {

template <class DQ, class DZ, class Scalar>
void check_shapes(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DZ>& mask, const FactorModel<Scalar>& m) {
    if (q.rows() != mask.rows() || q.cols() != mask.cols()) {
        throw std::invalid_argument("mf: mask shape does not match Q");
    }
    if (m.user_factors.rows() != q.rows() || m.category_factors.rows() != q.cols() ||
        m.user_factors.cols() != m.category_factors.cols()) {
        throw std::invalid_argument("mf: factor shapes do not match Q");
    }
}

} // namespace detail

// Small random start: every component uniform in [0, 0.1], seeded.
template <class Scalar = double>
FactorModel<Scalar> init_factors(Eigen::Index rows, Eigen::Index cols, const MfConfig& config) {
    if (config.k < 1) throw InputError("mf: k must be at least 1");
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<Scalar> unif(Scalar(0), Scalar(0.1));
    FactorModel<Scalar> m;
    m.user_factors.resize(rows, config.k);
    m.category_factors.resize(cols, config.k);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index t = 0; t < config.k; ++t) m.user_factors(i, t) = unif(rng);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index t = 0; t < config.k; ++t) m.category_factors(c, t) = unif(rng);
    return m;
}

// 1/2 sum z (q - w^T theta)^2 + lambda1/2 sum |w|^2 + lambda2/2 sum |theta|^2
template <class DQ, class DZ, class Scalar>
Scalar mf_objective(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DZ>& mask, const FactorModel<Scalar>& m,
                    const MfConfig& config) {
    detail::check_shapes(q, mask, m);
    const typename FactorModel<Scalar>::Matrix residual = mask.cwiseProduct(q - m.predict());
    return Scalar(0.5) * residual.squaredNorm() + Scalar(0.5 * config.lambda1) * m.user_factors.squaredNorm() +
           Scalar(0.5 * config.lambda2) * m.category_factors.squaredNorm();
}

// Exact gradient of mf_objective, returned in factor-model shape.
template <class DQ, class DZ, class Scalar>
FactorModel<Scalar> mf_gradient(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DZ>& mask,
                                const FactorModel<Scalar>& m, const MfConfig& config) {
    detail::check_shapes(q, mask, m);
    using Matrix = typename FactorModel<Scalar>::Matrix;
    const Matrix err = mask.cwiseProduct(m.predict() - q);
    FactorModel<Scalar> grad;
    grad.user_factors = err * m.category_factors + Scalar(config.lambda1) * m.user_factors;
    grad.category_factors = err.transpose() * m.user_factors + Scalar(config.lambda2) * m.category_factors;
    return grad;
}

// One full-batch sweep: both factor blocks move along the gradient taken at
// the current point.
template <class DQ, class DZ, class Scalar>
FactorModel<Scalar> gradient_step(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DZ>& mask,
                                  const FactorModel<Scalar>& m, const MfConfig& config) {
    const FactorModel<Scalar> grad = mf_gradient(q, mask, m, config);
    FactorModel<Scalar> next;
    next.user_factors = m.user_factors - Scalar(config.beta) * grad.user_factors;
    next.category_factors = m.category_factors - Scalar(config.beta) * grad.category_factors;
    return next;
}

template <class Scalar = double>
struct FitResult {
    FactorModel<Scalar> model;
    int iterations = 0;
    Scalar objective = 0;
    bool converged = false;
    std::vector<Scalar> objective_trace;
};

// Gradient descent from init_factors until |delta objective| < tol or
// max_iters. Five consecutive increases of the objective raise NumericalError.
template <class DQ, class DZ>
FitResult<typename DQ::Scalar> fit_factors(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DZ>& mask,
                                           const MfConfig& config, bool record_trace = false) {
    using Scalar = typename DQ::Scalar;
    if (!(config.beta > 0.0)) throw InputError("mf: beta must be positive");
    if (config.lambda1 < 0.0 || config.lambda2 < 0.0) throw InputError("mf: lambdas must be non-negative");
    if (config.max_iters < 1) throw InputError("mf: max_iters must be positive");

    FitResult<Scalar> fit;
    fit.model = init_factors<Scalar>(q.rows(), q.cols(), config);
    Scalar prev = mf_objective(q, mask, fit.model, config);
    if (record_trace) fit.objective_trace.push_back(prev);
    int rising = 0;
    for (int it = 1; it <= config.max_iters; ++it) {
        fit.model = gradient_step(q, mask, fit.model, config);
        const Scalar obj = mf_objective(q, mask, fit.model, config);
        if (record_trace) fit.objective_trace.push_back(obj);
        fit.iterations = it;
        if (!std::isfinite(static_cast<double>(obj))) {
            throw NumericalError("mf: objective is not finite after " + std::to_string(it) +
                                 " sweeps; use a smaller learning rate beta");
        }
        rising = obj > prev ? rising + 1 : 0;
        if (rising >= 5) {
            throw NumericalError("mf: objective grew for 5 consecutive sweeps; use a smaller learning rate beta");
        }
        const bool done = std::abs(static_cast<double>(prev - obj)) < config.tol;
        prev = obj;
        if (done) {
            fit.converged = true;
            break;
        }
    }
    fit.objective = prev;
    return fit;
}

struct Completion {
    ReliabilityProfile profile;
    FitResult<double> fit;
};

// Predicts every missing entry of Q as w_i^T theta_c clamped to
// [0, max observed q] (provenance latent). Rows or columns without any
// estimated entry get the mean of the observed entries (provenance default).
Completion fill_missing(const ReliabilityProfile& q, const MfConfig& config);

} // namespace veritas

#ifndef SYNGEN_CURVE_IPLF_HPP
#define SYNGEN_CURVE_IPLF_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "../core/error.hpp"

/**
 * @file iplf.hpp
 * @brief Inverse power law accuracy curve: fitting, prediction, inversion.
 */

namespace syngen {

/**
 * @brief Parameters of the saturating accuracy curve
 * `accuracy(n) = (1 - a) - b * n^c`.
 *
 * The boxes `a in [0,1]`, `b >= 0`, `c in [-1,0]` make the curve
 * nondecreasing in n and bounded above by its asymptote `1 - a`.
 */
struct IplfParams {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    void validate() const {
        if (!(a >= 0.0 && a <= 1.0)) {
            throw validation_error("asymptote gap a must lie in [0,1]");
        }
        if (!(b >= 0.0)) {
            throw validation_error("decay magnitude b must be non-negative");
        }
        if (!(c >= -1.0 && c <= 0.0)) {
            throw validation_error("decay exponent c must lie in [-1,0]");
        }
    }
};

/// Curve value at sample size n; the asymptote is `1 - a` as n grows.
inline double iplf_eval(const IplfParams& p, double n) {
    if (!(n > 0.0)) {
        throw validation_error("sample size must be positive");
    }
    return (1.0 - p.a) - p.b * std::pow(n, p.c);
}

/**
 * @brief A fitted accuracy curve with its uncertainty description.
 *
 * `covariance` is the weighted Gauss-Newton approximation at the solution and
 * `residual_scale` the weighted residual sum of squares over `m - 3`; both
 * are zero when the grid has exactly three points, in which case no interval
 * can be formed (`interval_available()`). `degenerate` marks fits that ended
 * on the `b = 0` or `c = 0` boundary; either way the curve is a constant in
 * the sample size and the remaining parameters are not identified.
 */
struct IplfFit {
    IplfParams params;
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
    double residual_scale = 0.0;
    std::vector<double> sizes;
    std::vector<double> accuracies;
    bool degenerate = false;

    bool interval_available() const { return sizes.size() > 3; }
};

namespace iplf_internal {

/// Weighted sum of squared residuals of the curve against the grid.
inline double objective(const IplfParams& p, const std::vector<double>& sizes,
                        const std::vector<double>& ys, const std::vector<double>& weights) {
    double s = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const double r = ys[i] - iplf_eval(p, sizes[i]);
        s += weights[i] * r * r;
    }
    return s;
}

inline IplfParams project_box(IplfParams p) {
    p.a = std::clamp(p.a, 0.0, 1.0);
    p.b = std::clamp(p.b, 0.0, 1e12);
    p.c = std::clamp(p.c, -1.0, 0.0);
    return p;
}

/// Residual Jacobian rows d(y - f)/d(a, b, c) at each grid point.
inline void jacobian(const IplfParams& p, const std::vector<double>& sizes, Eigen::MatrixXd& J) {
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const double nc = std::pow(sizes[i], p.c);
        J(static_cast<Eigen::Index>(i), 0) = 1.0;
        J(static_cast<Eigen::Index>(i), 1) = nc;
        J(static_cast<Eigen::Index>(i), 2) = p.b * nc * std::log(sizes[i]);
    }
}

/**
 * @brief Box-constrained Levenberg-Marquardt from one starting point.
 *
 * Steps solve the damped weighted normal equations and are projected back
 * into the box; a step is kept only when it lowers the objective, otherwise
 * the damping grows and the step is retried.
 */
inline IplfParams fit_from(IplfParams p, const std::vector<double>& sizes,
                           const std::vector<double>& ys, const std::vector<double>& weights) {
    const Eigen::Index m = static_cast<Eigen::Index>(sizes.size());
    Eigen::MatrixXd J(m, 3);
    Eigen::VectorXd r(m);
    const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(weights.data(), m);

    double current = objective(p, sizes, ys, weights);
    double lambda = 1e-3;
    for (int iter = 0; iter < 300; ++iter) {
        jacobian(p, sizes, J);
        for (Eigen::Index i = 0; i < m; ++i) {
            r(i) = ys[static_cast<std::size_t>(i)] - iplf_eval(p, sizes[static_cast<std::size_t>(i)]);
        }
        const Eigen::Matrix3d A = J.transpose() * w.asDiagonal() * J;
        const Eigen::Vector3d g = J.transpose() * (w.asDiagonal() * r);

        bool stepped = false;
        for (int attempt = 0; attempt < 40; ++attempt) {
            Eigen::Matrix3d damped = A;
            damped.diagonal() += lambda * (A.diagonal().array() + 1e-12).matrix();
            const Eigen::Vector3d delta = damped.ldlt().solve(-g);
            if (!delta.allFinite()) {
                lambda *= 4.0;
                continue;
            }
            const IplfParams candidate =
                project_box({p.a + delta(0), p.b + delta(1), p.c + delta(2)});
            const double proposed = objective(candidate, sizes, ys, weights);
            if (proposed < current) {
                const double gain = current - proposed;
                p = candidate;
                current = proposed;
                lambda = std::max(lambda / 3.0, 1e-12);
                stepped = true;
                if (gain <= 1e-15 * (current + 1e-15)) {
                    return p;
                }
                break;
            }
            lambda *= 4.0;
            if (lambda > 1e12) {
                return p;
            }
        }
        if (!stepped) {
            return p;
        }
    }
    return p;
}

/**
 * @brief Multi-start weighted fit with caller-supplied weights.
 *
 * Runs every combination of the deterministic starting values and keeps the
 * lowest objective; ties keep the earliest start, so the result never
 * depends on evaluation order.
 */
inline IplfFit fit_weighted(const std::vector<double>& sizes, const std::vector<double>& ys,
                            const std::vector<double>& weights) {
    const std::size_t m = sizes.size();
    if (m < 3) {
        throw validation_error("curve fitting needs at least three grid points, got " +
                               std::to_string(m));
    }
    if (ys.size() != m || weights.size() != m) {
        throw validation_error("grid sizes, accuracies, and weights must align");
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (!(sizes[i] > 0.0)) {
            throw validation_error("grid sizes must be positive");
        }
        if (i > 0 && sizes[i] <= sizes[i - 1]) {
            throw validation_error("grid sizes must be strictly increasing");
        }
        if (!(ys[i] >= 0.0 && ys[i] <= 1.0)) {
            throw validation_error("accuracies must lie in [0,1]");
        }
    }

    IplfParams best;
    double best_objective = std::numeric_limits<double>::infinity();
    for (double a0 : {0.01, 0.1}) {
        for (double b0 : {0.5, 1.0}) {
            for (double c0 : {-0.3, -0.7}) {
                const IplfParams candidate = fit_from({a0, b0, c0}, sizes, ys, weights);
                const double value = objective(candidate, sizes, ys, weights);
                if (value < best_objective) {
                    best_objective = value;
                    best = candidate;
                }
            }
        }
    }

    IplfFit fit;
    fit.params = best;
    fit.sizes = sizes;
    fit.accuracies = ys;
    fit.degenerate = best.b <= 1e-8 || best.c > -1e-8;
    if (m > 3) {
        fit.residual_scale = best_objective / (static_cast<double>(m) - 3.0);
        Eigen::MatrixXd J(static_cast<Eigen::Index>(m), 3);
        jacobian(best, sizes, J);
        const Eigen::VectorXd w =
            Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(m));
        const Eigen::Matrix3d A = J.transpose() * w.asDiagonal() * J;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(A);
        const double cutoff = 1e-12 * eig.eigenvalues().maxCoeff();
        Eigen::Vector3d inverted = Eigen::Vector3d::Zero();
        for (int i = 0; i < 3; ++i) {
            if (eig.eigenvalues()(i) > cutoff) {
                inverted(i) = 1.0 / eig.eigenvalues()(i);
            }
        }
        fit.covariance = fit.residual_scale * eig.eigenvectors() * inverted.asDiagonal() *
                         eig.eigenvectors().transpose();
    }
    return fit;
}

}

/**
 * @brief Fit the inverse power law to a grid of mean accuracies.
 *
 * Grid point i (1-based, sizes increasing) gets weight i/m, so later and
 * larger sizes count more. The box constraints are enforced throughout and
 * eight deterministic starting points guard against local minima. Flat data
 * ends with b on its zero bound and the fit marked degenerate.
 */
inline IplfFit fit_iplf(const std::vector<double>& sizes, const std::vector<double>& ys) {
    std::vector<double> weights(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        weights[i] = static_cast<double>(i + 1) / static_cast<double>(sizes.size());
    }
    return iplf_internal::fit_weighted(sizes, ys, weights);
}

/// Point prediction with an optional two-sided 95% band.
struct IplfPrediction {
    double accuracy = 0.0;
    std::optional<double> lo95;
    std::optional<double> hi95;
};

/**
 * @brief Predict accuracy at a sample size with a 95% interval.
 *
 * The band is the delta-method propagation of the parameter covariance plus
 * the residual scale: `y_hat +- t_{0.975, m-3} * sqrt(g' C g + s2)` with g
 * the parameter gradient of the curve at n. With only three grid points
 * there are no residual degrees of freedom and the prediction carries no
 * interval.
 */
inline IplfPrediction predict_with_interval(const IplfFit& fit, double n) {
    IplfPrediction out;
    out.accuracy = iplf_eval(fit.params, n);
    if (!fit.interval_available()) {
        return out;
    }
    const double nc = std::pow(n, fit.params.c);
    const Eigen::Vector3d g(-1.0, -nc, -fit.params.b * nc * std::log(n));
    const double variance = std::max(0.0, g.dot(fit.covariance * g) + fit.residual_scale);
    const double df = static_cast<double>(fit.sizes.size()) - 3.0;
    const boost::math::students_t dist(df);
    const double half = boost::math::quantile(dist, 0.975) * std::sqrt(variance);
    out.lo95 = out.accuracy - half;
    out.hi95 = out.accuracy + half;
    return out;
}

/**
 * @brief Smallest sample size whose predicted accuracy reaches the target.
 *
 * Inverts the curve: `n* = ceil(((1 - a - target) / b)^(1/c))`. The ceiling
 * together with monotonicity guarantees `iplf_eval(params, n*) >= target`.
 * Targets at or above the asymptote `1 - a`, a flat fitted curve, or a
 * projection beyond 1e18 samples are reported as unreachable.
 */
inline long long project_sample_size(const IplfParams& p, double target) {
    if (!(target > 0.0 && target < 1.0)) {
        throw validation_error("target accuracy must lie in (0,1)");
    }
    const double asymptote = 1.0 - p.a;
    if (target >= asymptote) {
        throw infeasible_error("target accuracy " + std::to_string(target) +
                               " is at or above the asymptotic accuracy " +
                               std::to_string(asymptote));
    }
    if (p.b <= 0.0 || p.c >= 0.0) {
        throw infeasible_error("fitted curve is constant; no sample size changes the accuracy");
    }
    const double n = std::pow((asymptote - target) / p.b, 1.0 / p.c);
    if (!std::isfinite(n) || n > 1e18) {
        throw infeasible_error("projected sample size exceeds 1e18; target is practically unreachable");
    }
    // Absorb rounding noise so an exactly attainable target maps to the exact size.
    return std::max(1LL, static_cast<long long>(std::ceil(n - 1e-9)));
}

}

#endif

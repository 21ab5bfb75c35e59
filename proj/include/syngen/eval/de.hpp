#ifndef SYNGEN_EVAL_DE_HPP
#define SYNGEN_EVAL_DE_HPP

#include <Eigen/Dense>

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "../core/count_matrix.hpp"
#include "../core/error.hpp"
#include "concordance.hpp"

/**
 * @file de.hpp
 * @brief Two-group differential expression with precision weights.
 */

namespace syngen {

namespace de_internal {

/**
 * @brief Piecewise-linear curve with constant extrapolation beyond the ends.
 */
struct TrendCurve {
    std::vector<double> x;
    std::vector<double> y;

    double operator()(double q) const {
        if (q <= x.front()) {
            return y.front();
        }
        if (q >= x.back()) {
            return y.back();
        }
        const auto it = std::upper_bound(x.begin(), x.end(), q);
        const std::size_t hi = static_cast<std::size_t>(it - x.begin());
        const std::size_t lo = hi - 1;
        const double t = (q - x[lo]) / (x[hi] - x[lo]);
        return y[lo] + t * (y[hi] - y[lo]);
    }
};

/**
 * @brief Locally weighted linear smoother with tricube weights.
 *
 * Each point is fitted from its `ceil(span * m)` nearest neighbours along x
 * (at least two), weighted by tricube of the scaled distance. Fitted values
 * at duplicate x positions are averaged so the returned curve has strictly
 * increasing knots. Being locally linear, it reproduces affine data exactly.
 */
inline TrendCurve lowess_fit(const std::vector<double>& xs, const std::vector<double>& ys,
                             double span) {
    const std::size_t m = xs.size();
    if (m < 2 || ys.size() != m) {
        throw validation_error("trend fit needs two or more paired points");
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> sx(m);
    std::vector<double> sy(m);
    for (std::size_t i = 0; i < m; ++i) {
        sx[i] = xs[order[i]];
        sy[i] = ys[order[i]];
    }

    const std::size_t q = std::min(m, std::max<std::size_t>(2, static_cast<std::size_t>(
                                                                   std::ceil(span * static_cast<double>(m)))));
    std::vector<double> fitted(m);
    std::size_t lo = 0;
    for (std::size_t i = 0; i < m; ++i) {
        while (lo + q < m && sx[i] - sx[lo] > sx[lo + q] - sx[i]) {
            ++lo;
        }
        const std::size_t hi = lo + q - 1;
        const double h = std::max(sx[i] - sx[lo], sx[hi] - sx[i]);

        double sw = 0.0;
        double swx = 0.0;
        double swx2 = 0.0;
        double swy = 0.0;
        double swxy = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) {
            const double dx = sx[j] - sx[i];
            double w = 1.0;
            if (h > 0.0) {
                const double u = std::abs(dx) / h;
                const double c = 1.0 - u * u * u;
                w = u < 1.0 ? c * c * c : 0.0;
            }
            sw += w;
            swx += w * dx;
            swx2 += w * dx * dx;
            swy += w * sy[j];
            swxy += w * dx * sy[j];
        }
        const double denom = sw * swx2 - swx * swx;
        if (denom > 1e-12 * sw * swx2 && denom > 0.0) {
            const double slope = (sw * swxy - swx * swy) / denom;
            fitted[i] = (swy - slope * swx) / sw;
        } else {
            fitted[i] = swy / sw;
        }
    }

    TrendCurve curve;
    for (std::size_t i = 0; i < m;) {
        std::size_t j = i;
        double acc = 0.0;
        while (j < m && sx[j] == sx[i]) {
            acc += fitted[j];
            ++j;
        }
        curve.x.push_back(sx[i]);
        curve.y.push_back(acc / static_cast<double>(j - i));
        i = j;
    }
    return curve;
}

}

/**
 * @brief Per-marker test results for a two-group comparison.
 *
 * `log2fc` is the second group level minus the first (levels in sorted
 * order). `weights` keeps the per-observation precision weights used in the
 * final fit, markers by samples.
 */
struct DeResult {
    std::vector<std::string> marker_ids;
    Eigen::VectorXd p_value;
    Eigen::VectorXd log2fc;
    Eigen::MatrixXd weights;
};

/**
 * @brief Two-group differential expression on counts with variance weights.
 *
 * Counts become `log2((c + 0.5) / (L + 1) * 1e6)` with L the sample library
 * size. A per-marker two-group mean model gives residual standard
 * deviations, whose square roots are smoothed against average log count
 * (span 0.5) to estimate the mean-variance trend. Each observation is then
 * weighted by the trend value at its fitted log count raised to the fourth
 * power, inverted, and the model is refitted by weighted least squares. The
 * group-difference coefficient gets a two-sided t-test with n - 2 degrees of
 * freedom.
 *
 * Needs raw counts and exactly two group levels with two or more samples
 * each.
 */
inline DeResult de_voom_lite(const CountMatrix& m) {
    if (m.scale != Scale::raw_counts) {
        throw state_error("differential expression needs raw counts, got " +
                          std::string(to_string(m.scale)));
    }
    const std::vector<std::string> levels = m.group_levels();
    if (levels.size() != 2) {
        throw validation_error("differential expression needs exactly two groups, got " +
                               std::to_string(levels.size()));
    }
    const std::vector<int> cols_a = m.group_columns(levels[0]);
    const std::vector<int> cols_b = m.group_columns(levels[1]);
    if (cols_a.size() < 2 || cols_b.size() < 2) {
        throw validation_error("each group needs at least two samples, got " +
                               std::to_string(cols_a.size()) + " and " + std::to_string(cols_b.size()));
    }

    const Eigen::Index G = m.markers();
    const Eigen::Index n = m.samples();
    const double df = static_cast<double>(n) - 2.0;
    const Eigen::VectorXd lib = m.library_sizes();

    Eigen::VectorXd log_lib(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        log_lib(j) = std::log2(lib(j) + 1.0);
    }
    const double log_million = std::log2(1e6);

    Eigen::MatrixXd y(G, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        y.col(j) = ((m.values.col(j).array() + 0.5).log() / std::log(2.0) - log_lib(j) + log_million)
                       .matrix();
    }

    const auto group_of = [&](Eigen::Index j) {
        return (*m.groups)[static_cast<std::size_t>(j)] == levels[0] ? 0 : 1;
    };

    Eigen::MatrixXd fitted(G, n);
    std::vector<double> sx(static_cast<std::size_t>(G));
    std::vector<double> sy(static_cast<std::size_t>(G));
    const double mean_log_lib = log_lib.mean();
    for (Eigen::Index g = 0; g < G; ++g) {
        double sum_a = 0.0;
        double sum_b = 0.0;
        for (int j : cols_a) {
            sum_a += y(g, j);
        }
        for (int j : cols_b) {
            sum_b += y(g, j);
        }
        const double mu_a = sum_a / static_cast<double>(cols_a.size());
        const double mu_b = sum_b / static_cast<double>(cols_b.size());
        double rss = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            fitted(g, j) = group_of(j) == 0 ? mu_a : mu_b;
            const double r = y(g, j) - fitted(g, j);
            rss += r * r;
        }
        sx[static_cast<std::size_t>(g)] = y.row(g).mean() + mean_log_lib - log_million;
        sy[static_cast<std::size_t>(g)] = std::pow(rss / df, 0.25);
    }

    const de_internal::TrendCurve trend = de_internal::lowess_fit(sx, sy, 0.5);

    DeResult out;
    out.marker_ids = m.marker_ids;
    out.p_value.resize(G);
    out.log2fc.resize(G);
    out.weights.resize(G, n);
    const boost::math::students_t dist(df);
    for (Eigen::Index g = 0; g < G; ++g) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double fitted_log_count = fitted(g, j) + log_lib(j) - log_million;
            const double pred = std::max(trend(fitted_log_count), 1e-4);
            out.weights(g, j) = 1.0 / (pred * pred * pred * pred);
        }

        double wa = 0.0;
        double wb = 0.0;
        double wya = 0.0;
        double wyb = 0.0;
        for (int j : cols_a) {
            wa += out.weights(g, j);
            wya += out.weights(g, j) * y(g, j);
        }
        for (int j : cols_b) {
            wb += out.weights(g, j);
            wyb += out.weights(g, j) * y(g, j);
        }
        const double mu_a = wya / wa;
        const double mu_b = wyb / wb;
        double wrss = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double r = y(g, j) - (group_of(j) == 0 ? mu_a : mu_b);
            wrss += out.weights(g, j) * r * r;
        }
        const double sigma2 = wrss / df;
        const double se = std::sqrt(sigma2 * (1.0 / wa + 1.0 / wb));
        const double diff = mu_b - mu_a;
        out.log2fc(g) = diff;
        if (se == 0.0) {
            out.p_value(g) = diff == 0.0 ? 1.0 : 0.0;
        } else {
            const double t = diff / se;
            out.p_value(g) = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
        }
    }
    return out;
}

/// Agreement between two sets of test results on the same panel.
struct DeConcordance {
    double ccc_neglog10_p = 0.0;
    double ccc_log2fc = 0.0;
};

/**
 * @brief Concordance of p-values and fold changes between two result sets.
 *
 * P-values are compared on the -log10 scale (clamped away from zero so the
 * transform stays finite); fold changes are compared directly. Marker panels
 * must match exactly.
 */
inline DeConcordance de_concordance(const DeResult& gen, const DeResult& ref) {
    if (gen.marker_ids != ref.marker_ids) {
        throw validation_error("test results cover different marker panels");
    }
    const auto neglog10 = [](const Eigen::VectorXd& p) {
        Eigen::VectorXd out(p.size());
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            out(i) = -std::log10(std::max(p(i), DBL_MIN));
        }
        return out;
    };
    DeConcordance out;
    out.ccc_neglog10_p = ccc(neglog10(gen.p_value), neglog10(ref.p_value));
    out.ccc_log2fc = ccc(gen.log2fc, ref.log2fc);
    return out;
}

}

#endif

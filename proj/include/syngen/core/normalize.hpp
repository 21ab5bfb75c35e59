#ifndef SYNGEN_CORE_NORMALIZE_HPP
#define SYNGEN_CORE_NORMALIZE_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "count_matrix.hpp"
#include "error.hpp"

/**
 * @file normalize.hpp
 * @brief Sequencing-depth normalization: total count, upper quartile, and
 * trimmed mean of M-values.
 *
 * All three methods rescale each sample so that depth differences are
 * absorbed while relative expression is preserved; the output stays on the
 * raw scale with non-negative, generally non-integer values.
 */

namespace syngen {

enum class NormalizeMethod { none, tc, uq, tmm };

inline NormalizeMethod parse_normalize_method(const std::string& s) {
    if (s == "none") return NormalizeMethod::none;
    if (s == "tc") return NormalizeMethod::tc;
    if (s == "uq") return NormalizeMethod::uq;
    if (s == "tmm") return NormalizeMethod::tmm;
    throw validation_error("unknown normalization method '" + s + "' (expected none|tc|uq|tmm)");
}

/**
 * @brief Quantile with linear interpolation between order statistics
 * (definition 7 in the usual taxonomy, the R default).
 */
inline double quantile_type7(std::vector<double> x, double p) {
    if (x.empty()) {
        throw validation_error("quantile of an empty vector");
    }
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= x.size()) {
        return x.back();
    }
    return x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

namespace normalize_internal {

inline void require_positive_libsizes(const CountMatrix& m, const Eigen::VectorXd& libsize) {
    for (Eigen::Index j = 0; j < libsize.size(); ++j) {
        if (!(libsize[j] > 0.0)) {
            throw validation_error("sample '" + m.sample_ids[static_cast<std::size_t>(j)] +
                                   "' has zero library size");
        }
    }
}

/// Average ranks (1-based, ties share their mean rank), as R's `rank()`.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

/// Pairwise trimmed-mean-of-M factor of sample j against the reference
/// column, on counts with the given library sizes.
inline double tmm_pair_factor(const Eigen::VectorXd& obs, double lib_obs,
                              const Eigen::VectorXd& ref, double lib_ref) {
    std::vector<double> M, A, w;
    for (Eigen::Index g = 0; g < obs.size(); ++g) {
        if (obs[g] > 0.0 && ref[g] > 0.0) {
            const double po = obs[g] / lib_obs;
            const double pr = ref[g] / lib_ref;
            M.push_back(std::log2(po / pr));
            A.push_back(0.5 * std::log2(po * pr));
            w.push_back((lib_obs - obs[g]) / (lib_obs * obs[g]) +
                        (lib_ref - ref[g]) / (lib_ref * ref[g]));
        }
    }
    const std::size_t n = M.size();
    if (n == 0) {
        return 1.0;
    }
    double max_abs = 0.0;
    for (double m : M) max_abs = std::max(max_abs, std::fabs(m));
    if (max_abs < 1e-6) {
        return 1.0;
    }

    // Doubly trimmed: drop the extreme 30% of log-ratios and 5% of mean
    // abundances on each side, then take the precision-weighted mean.
    const double lo_m = std::floor(static_cast<double>(n) * 0.3) + 1.0;
    const double hi_m = static_cast<double>(n) + 1.0 - lo_m;
    const double lo_a = std::floor(static_cast<double>(n) * 0.05) + 1.0;
    const double hi_a = static_cast<double>(n) + 1.0 - lo_a;
    const auto rank_m = average_ranks(M);
    const auto rank_a = average_ranks(A);

    double num = 0.0, den = 0.0;
    for (std::size_t g = 0; g < n; ++g) {
        if (rank_m[g] >= lo_m && rank_m[g] <= hi_m && rank_a[g] >= lo_a && rank_a[g] <= hi_a) {
            num += M[g] / w[g];
            den += 1.0 / w[g];
        }
    }
    if (den <= 0.0 || !std::isfinite(num / den)) {
        return 1.0;
    }
    return std::exp2(num / den);
}

}

/**
 * @brief Trimmed-mean-of-M-values scaling factors, rescaled to geometric
 * mean one.
 *
 * The reference sample is the one whose 75th depth-scaled percentile is
 * closest to the average of those percentiles across samples.
 */
inline Eigen::VectorXd tmm_factors(const CountMatrix& m) {
    if (m.scale != Scale::raw_counts) {
        throw state_error("tmm_factors expects raw counts");
    }
    const Eigen::VectorXd libsize = m.library_sizes();
    normalize_internal::require_positive_libsizes(m, libsize);
    const Eigen::Index n = m.samples();

    Eigen::VectorXd f75(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        std::vector<double> scaled(static_cast<std::size_t>(m.markers()));
        for (Eigen::Index g = 0; g < m.markers(); ++g) {
            scaled[static_cast<std::size_t>(g)] = m.values(g, j) / libsize[j];
        }
        f75[j] = quantile_type7(std::move(scaled), 0.75);
    }
    const double mean_f75 = f75.mean();
    Eigen::Index ref = 0;
    for (Eigen::Index j = 1; j < n; ++j) {
        if (std::fabs(f75[j] - mean_f75) < std::fabs(f75[ref] - mean_f75)) {
            ref = j;
        }
    }

    Eigen::VectorXd factors(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        factors[j] = normalize_internal::tmm_pair_factor(m.values.col(j), libsize[j],
                                                         m.values.col(ref), libsize[ref]);
    }
    const double log_mean = factors.array().log().mean();
    factors /= std::exp(log_mean);
    return factors;
}

/**
 * @brief Rescale samples to a common effective depth.
 *
 * With `tc` each sample is scaled by mean library size over its own; with
 * `uq` by the mean over the sample's upper quartile of nonzero counts; with
 * `tmm` counts become `count / (libsize * factor) * mean libsize` using the
 * factors from `tmm_factors`. `none` returns the input unchanged.
 */
inline CountMatrix normalize_depth(const CountMatrix& m, NormalizeMethod method) {
    if (m.scale != Scale::raw_counts) {
        throw state_error("normalize_depth expects raw counts");
    }
    if (method == NormalizeMethod::none) {
        return m;
    }
    const Eigen::VectorXd libsize = m.library_sizes();
    normalize_internal::require_positive_libsizes(m, libsize);
    const Eigen::Index n = m.samples();

    CountMatrix out = m;
    switch (method) {
        case NormalizeMethod::tc: {
            const double target = libsize.mean();
            for (Eigen::Index j = 0; j < n; ++j) {
                out.values.col(j) *= target / libsize[j];
            }
            break;
        }
        case NormalizeMethod::uq: {
            Eigen::VectorXd uq(n);
            for (Eigen::Index j = 0; j < n; ++j) {
                std::vector<double> nonzero;
                for (Eigen::Index g = 0; g < m.markers(); ++g) {
                    if (m.values(g, j) > 0.0) {
                        nonzero.push_back(m.values(g, j));
                    }
                }
                if (nonzero.empty()) {
                    throw validation_error("sample '" + m.sample_ids[static_cast<std::size_t>(j)] +
                                           "' has no nonzero counts");
                }
                uq[j] = quantile_type7(std::move(nonzero), 0.75);
            }
            const double target = uq.mean();
            for (Eigen::Index j = 0; j < n; ++j) {
                out.values.col(j) *= target / uq[j];
            }
            break;
        }
        case NormalizeMethod::tmm: {
            const Eigen::VectorXd factors = tmm_factors(m);
            const double target = libsize.mean();
            for (Eigen::Index j = 0; j < n; ++j) {
                out.values.col(j) *= target / (libsize[j] * factors[j]);
            }
            break;
        }
        case NormalizeMethod::none:
            break;
    }
    return out;
}

}

#endif

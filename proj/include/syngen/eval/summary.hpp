#ifndef SYNGEN_EVAL_SUMMARY_HPP
#define SYNGEN_EVAL_SUMMARY_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "../core/count_matrix.hpp"
#include "../core/error.hpp"
#include "../core/transform.hpp"

/**
 * @file summary.hpp
 * @brief Per-marker summary statistics and their paired comparison.
 */

namespace syngen {

/**
 * @brief Per-marker summaries: mean and standard deviation of `log2(count+1)`
 * across samples, and sparsity as the fraction of zero counts.
 *
 * All three vectors are indexed by marker, in matrix row order.
 */
struct SummaryStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
    Eigen::VectorXd sparsity;
};

/**
 * @brief Compute per-marker mean, standard deviation, and sparsity.
 *
 * Mean and standard deviation (n - 1 denominator) are taken on the log scale;
 * sparsity counts exact zeros, which coincide on both scales because a zero
 * count maps to a zero log value. Needs at least two samples for the
 * standard deviation to exist.
 */
inline SummaryStats marker_summary(const CountMatrix& m) {
    if (m.samples() < 2) {
        throw validation_error("marker summary needs at least two samples");
    }
    const CountMatrix logview = as_log2p1(m);
    const double n = static_cast<double>(m.samples());

    SummaryStats out;
    out.mean = logview.values.rowwise().mean();
    out.sd.resize(m.markers());
    out.sparsity.resize(m.markers());
    for (Eigen::Index g = 0; g < m.markers(); ++g) {
        const double ss = (logview.values.row(g).array() - out.mean(g)).square().sum();
        out.sd(g) = std::sqrt(ss / (n - 1.0));
        out.sparsity(g) = (m.values.row(g).array() == 0.0).count() / n;
    }
    return out;
}

/**
 * @brief Median absolute difference between two aligned statistic vectors.
 *
 * Vectors must be the same length and ordered by the same marker panel. For
 * an even number of markers the median is the mean of the two middle values.
 */
inline double mad_paired(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) {
        throw validation_error("paired MAD needs vectors of equal length, got " +
                               std::to_string(a.size()) + " and " + std::to_string(b.size()));
    }
    if (a.size() == 0) {
        throw validation_error("paired MAD of empty vectors");
    }
    std::vector<double> diffs(static_cast<std::size_t>(a.size()));
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        diffs[static_cast<std::size_t>(i)] = std::abs(a(i) - b(i));
    }
    std::sort(diffs.begin(), diffs.end());
    const std::size_t n = diffs.size();
    if (n % 2 == 1) {
        return diffs[n / 2];
    }
    return 0.5 * (diffs[n / 2 - 1] + diffs[n / 2]);
}

/**
 * @brief Fraction of markers with a non-zero count in at least one sample.
 *
 * The complement of the all-zero marker rate; 1.0 when every marker is seen
 * somewhere, 0.0 when the matrix is entirely zero.
 */
inline double expressed_marker_fraction(const CountMatrix& m) {
    if (m.markers() == 0) {
        throw validation_error("expressed marker fraction of an empty matrix");
    }
    Eigen::Index nonzero = 0;
    for (Eigen::Index g = 0; g < m.markers(); ++g) {
        if ((m.values.row(g).array() != 0.0).any()) {
            ++nonzero;
        }
    }
    return static_cast<double>(nonzero) / static_cast<double>(m.markers());
}

}

#endif

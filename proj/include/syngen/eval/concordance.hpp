#ifndef SYNGEN_EVAL_CONCORDANCE_HPP
#define SYNGEN_EVAL_CONCORDANCE_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "../core/count_matrix.hpp"
#include "../core/error.hpp"
#include "../core/filter.hpp"
#include "../core/transform.hpp"

/**
 * @file concordance.hpp
 * @brief Concordance correlation and within-cluster partial correlations.
 */

namespace syngen {

/**
 * @brief Lin's concordance correlation coefficient.
 *
 * Uses population (1/n) moments: `2 cov(x,y) / (var x + var y + (mean x -
 * mean y)^2)`. Measures agreement with the identity line, so it penalises
 * both scale and location shifts on top of imperfect correlation. Undefined
 * when both vectors are constant with equal means.
 */
inline double ccc(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) {
        throw validation_error("concordance needs vectors of equal length, got " +
                               std::to_string(x.size()) + " and " + std::to_string(y.size()));
    }
    if (x.size() < 2) {
        throw validation_error("concordance needs at least two values");
    }
    const double n = static_cast<double>(x.size());
    const double mx = x.mean();
    const double my = y.mean();
    const Eigen::ArrayXd dx = x.array() - mx;
    const Eigen::ArrayXd dy = y.array() - my;
    const double vx = dx.square().sum() / n;
    const double vy = dy.square().sum() / n;
    const double cxy = (dx * dy).sum() / n;
    const double denom = vx + vy + (mx - my) * (mx - my);
    if (denom == 0.0) {
        throw validation_error("concordance undefined for two identical constant vectors");
    }
    return 2.0 * cxy / denom;
}

/// Marker clusters keyed by cluster id; map order fixes the output order.
using ClusterMap = std::map<std::string, std::vector<std::string>>;

namespace concordance_internal {

inline double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const double mx = x.mean();
    const double my = y.mean();
    const Eigen::ArrayXd dx = x.array() - mx;
    const Eigen::ArrayXd dy = y.array() - my;
    return (dx * dy).sum() / std::sqrt(dx.square().sum() * dy.square().sum());
}

}

/**
 * @brief Partial correlations between markers within each cluster.
 *
 * For every cluster the member markers are intersected with the matrix
 * panel, sorted by id, and their log-scale covariance is inverted; the
 * partial correlation between members i and j is `-P_ij / sqrt(P_ii P_jj)`
 * from the precision matrix P. Two-member clusters reduce to the plain
 * Pearson correlation. A covariance whose smallest eigenvalue is not safely
 * positive is ridged with `1e-6 * trace / p` before inversion.
 *
 * Clusters that end up with fewer than two members, or that contain a
 * constant marker, are skipped with a warning. The result concatenates each
 * surviving cluster's upper triangle (i < j in sorted-id order) with
 * clusters in ascending id order, so two matrices sharing a panel and
 * cluster file produce aligned vectors.
 */
inline std::vector<double> partial_correlations(const CountMatrix& m, const ClusterMap& clusters,
                                                Warnings* warnings = nullptr) {
    if (m.samples() <= 2) {
        throw validation_error("partial correlations need more than two samples");
    }
    const CountMatrix logview = as_log2p1(m);
    const double n = static_cast<double>(m.samples());

    std::vector<double> out;
    for (const auto& [cluster_id, member_ids] : clusters) {
        std::vector<std::string> present;
        for (const auto& id : member_ids) {
            if (m.marker_index(id) >= 0) {
                present.push_back(id);
            }
        }
        std::sort(present.begin(), present.end());
        present.erase(std::unique(present.begin(), present.end()), present.end());
        if (present.size() < 2) {
            warn(warnings, "cluster '" + cluster_id + "' has fewer than two markers in the panel; skipped");
            continue;
        }

        const Eigen::Index p = static_cast<Eigen::Index>(present.size());
        Eigen::MatrixXd rows(p, m.samples());
        bool constant = false;
        for (Eigen::Index i = 0; i < p; ++i) {
            rows.row(i) = logview.values.row(m.marker_index(present[static_cast<std::size_t>(i)]));
            if (rows.row(i).minCoeff() == rows.row(i).maxCoeff()) {
                warn(warnings, "cluster '" + cluster_id + "': marker '" +
                                   present[static_cast<std::size_t>(i)] + "' is constant; cluster skipped");
                constant = true;
            }
        }
        if (constant) {
            continue;
        }

        if (p == 2) {
            out.push_back(concordance_internal::pearson(rows.row(0).transpose(), rows.row(1).transpose()));
            continue;
        }

        const Eigen::MatrixXd centered = rows.colwise() - rows.rowwise().mean();
        Eigen::MatrixXd cov = centered * centered.transpose() / (n - 1.0);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        const double max_eig = eig.eigenvalues().maxCoeff();
        if (eig.eigenvalues().minCoeff() <= 1e-12 * max_eig) {
            cov += (1e-6 * cov.trace() / static_cast<double>(p)) *
                   Eigen::MatrixXd::Identity(p, p);
            eig.compute(cov);
        }
        const Eigen::MatrixXd precision =
            eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
            eig.eigenvectors().transpose();

        for (Eigen::Index i = 0; i < p; ++i) {
            for (Eigen::Index j = i + 1; j < p; ++j) {
                out.push_back(-precision(i, j) / std::sqrt(precision(i, i) * precision(j, j)));
            }
        }
    }
    return out;
}

}

#endif

#ifndef SYNGEN_EVAL_CLUSTERING_HPP
#define SYNGEN_EVAL_CLUSTERING_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "../core/count_matrix.hpp"
#include "../core/error.hpp"
#include "../core/transform.hpp"

/**
 * @file clustering.hpp
 * @brief Ward agglomerative clustering of samples and partition agreement.
 */

namespace syngen {

/**
 * @brief Result of agglomerating samples down to k clusters.
 *
 * `labels[j]` is the cluster of sample j, numbered 0..k-1 in order of each
 * cluster's smallest sample index. `heights` holds the merge heights
 * (Euclidean-scale) in the order the merges happened; Ward heights are
 * non-decreasing, so cutting after n - k merges is a proper dendrogram cut.
 */
struct WardResult {
    std::vector<int> labels;
    std::vector<double> heights;
};

/**
 * @brief Ward minimum-variance clustering of samples on the log scale.
 *
 * Samples are points in marker space under `log2(count+1)`. Distances start
 * as squared Euclidean and are updated with the Ward variant of the
 * Lance-Williams recurrence, which keeps each pair's value equal to
 * `2 n_a n_b / (n_a + n_b)` times the squared distance between cluster
 * centroids. Ties pick the lexicographically smallest index pair, so the
 * result is deterministic.
 */
inline WardResult ward_cluster(const CountMatrix& m, int k) {
    if (k < 1) {
        throw validation_error("cluster count must be positive");
    }
    const Eigen::Index n = m.samples();
    if (n < k) {
        throw validation_error("cannot form " + std::to_string(k) + " clusters from " +
                               std::to_string(n) + " samples");
    }
    const CountMatrix logview = as_log2p1(m);

    Eigen::MatrixXd d2(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d2(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            d2(i, j) = d2(j, i) = (logview.values.col(i) - logview.values.col(j)).squaredNorm();
        }
    }

    std::vector<bool> alive(static_cast<std::size_t>(n), true);
    std::vector<double> size(static_cast<std::size_t>(n), 1.0);
    std::vector<std::vector<int>> members(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        members[static_cast<std::size_t>(j)] = {static_cast<int>(j)};
    }

    WardResult out;
    out.heights.reserve(static_cast<std::size_t>(n - k));
    for (Eigen::Index merge = 0; merge < n - k; ++merge) {
        Eigen::Index best_i = -1;
        Eigen::Index best_j = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!alive[static_cast<std::size_t>(i)]) {
                continue;
            }
            for (Eigen::Index j = i + 1; j < n; ++j) {
                if (alive[static_cast<std::size_t>(j)] && d2(i, j) < best) {
                    best = d2(i, j);
                    best_i = i;
                    best_j = j;
                }
            }
        }

        const double si = size[static_cast<std::size_t>(best_i)];
        const double sj = size[static_cast<std::size_t>(best_j)];
        for (Eigen::Index l = 0; l < n; ++l) {
            if (!alive[static_cast<std::size_t>(l)] || l == best_i || l == best_j) {
                continue;
            }
            const double sl = size[static_cast<std::size_t>(l)];
            const double merged = ((si + sl) * d2(best_i, l) + (sj + sl) * d2(best_j, l) - sl * best) /
                                  (si + sj + sl);
            d2(best_i, l) = d2(l, best_i) = merged;
        }
        size[static_cast<std::size_t>(best_i)] += sj;
        alive[static_cast<std::size_t>(best_j)] = false;
        auto& mi = members[static_cast<std::size_t>(best_i)];
        auto& mj = members[static_cast<std::size_t>(best_j)];
        mi.insert(mi.end(), mj.begin(), mj.end());
        out.heights.push_back(std::sqrt(best));
    }

    out.labels.assign(static_cast<std::size_t>(n), -1);
    int next = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!alive[static_cast<std::size_t>(i)]) {
            continue;
        }
        for (int s : members[static_cast<std::size_t>(i)]) {
            out.labels[static_cast<std::size_t>(s)] = next;
        }
        ++next;
    }
    return out;
}

/**
 * @brief Adjusted Rand index between two partitions of the same items.
 *
 * Chance-corrected pair-counting agreement from the contingency table; 1 for
 * identical partitions, around 0 for independent ones, negative when the
 * partitions agree less than chance. Identical trivial partitions (where the
 * correction term equals its maximum) count as perfect agreement.
 */
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) {
        throw validation_error("partitions label different item counts: " +
                               std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    if (a.size() < 2) {
        throw validation_error("partition agreement needs at least two items");
    }
    std::map<std::pair<int, int>, double> cells;
    std::map<int, double> row_sums;
    std::map<int, double> col_sums;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cells[{a[i], b[i]}] += 1.0;
        row_sums[a[i]] += 1.0;
        col_sums[b[i]] += 1.0;
    }
    const auto choose2 = [](double c) { return c * (c - 1.0) / 2.0; };
    double index = 0.0;
    for (const auto& [cell, count] : cells) {
        index += choose2(count);
    }
    double sum_a = 0.0;
    for (const auto& [label, count] : row_sums) {
        sum_a += choose2(count);
    }
    double sum_b = 0.0;
    for (const auto& [label, count] : col_sums) {
        sum_b += choose2(count);
    }
    const double total = choose2(static_cast<double>(a.size()));
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) {
        return 1.0;
    }
    return (index - expected) / (max_index - expected);
}

/// Partition agreement and its complement, reported together.
struct ClusterAgreement {
    double ari = 0.0;
    double cari = 0.0;
};

/**
 * @brief Cluster samples with Ward linkage and score against known labels.
 *
 * The matrix is clustered to `k` groups and the resulting partition is
 * compared to `truth` with the adjusted Rand index; `cari` is its
 * complement `1 - ari`, small when the clustering recovers the labels.
 */
inline ClusterAgreement ward_cluster_ari(const CountMatrix& combined,
                                         const std::vector<std::string>& truth, int k = 2) {
    if (truth.size() != static_cast<std::size_t>(combined.samples())) {
        throw validation_error("truth labels cover " + std::to_string(truth.size()) +
                               " samples, matrix has " + std::to_string(combined.samples()));
    }
    std::map<std::string, int> level_of;
    for (const auto& label : truth) {
        level_of.emplace(label, static_cast<int>(level_of.size()));
    }
    std::vector<int> truth_idx;
    truth_idx.reserve(truth.size());
    for (const auto& label : truth) {
        truth_idx.push_back(level_of[label]);
    }

    const WardResult tree = ward_cluster(combined, k);
    ClusterAgreement out;
    out.ari = adjusted_rand_index(tree.labels, truth_idx);
    out.cari = 1.0 - out.ari;
    return out;
}

}

#endif

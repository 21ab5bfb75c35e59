#ifndef SYNGEN_CORE_COUNT_MATRIX_HPP
#define SYNGEN_CORE_COUNT_MATRIX_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "error.hpp"

/**
 * @file count_matrix.hpp
 * @brief The expression matrix type shared by every module.
 */

namespace syngen {

/**
 * @brief Scale of the values held by a `CountMatrix`.
 *
 * `raw_counts` are non-negative integer-valued abundances; `log2p1` values
 * are `log2(count + pseudocount)` transformed. Operations state which scale
 * they expect and refuse the other one rather than silently producing
 * nonsense.
 */
enum class Scale { raw_counts, log2p1 };

inline const char* to_string(Scale s) {
    return s == Scale::raw_counts ? "raw_counts" : "log2p1";
}

/**
 * @brief Expression matrix with markers in rows and samples in columns.
 *
 * Marker and sample identifiers are unique and non-empty; entries are finite
 * and non-negative on either scale. Group labels, when present, are stored
 * aligned with `sample_ids` so the invariant "every sample is labelled" holds
 * by construction.
 */
class CountMatrix {
public:
    std::vector<std::string> marker_ids;
    std::vector<std::string> sample_ids;

    /// Values, `markers() x samples()`, on the scale given by `scale`.
    Eigen::MatrixXd values;

    Scale scale = Scale::raw_counts;

    /// Optional per-sample group labels, aligned with `sample_ids`.
    std::optional<std::vector<std::string>> groups;

    CountMatrix() = default;

    CountMatrix(std::vector<std::string> markers,
                std::vector<std::string> samples,
                Eigen::MatrixXd vals,
                Scale sc = Scale::raw_counts,
                std::optional<std::vector<std::string>> grp = std::nullopt)
        : marker_ids(std::move(markers)),
          sample_ids(std::move(samples)),
          values(std::move(vals)),
          scale(sc),
          groups(std::move(grp)) {
        validate();
    }

    Eigen::Index markers() const { return values.rows(); }
    Eigen::Index samples() const { return values.cols(); }

    /**
     * @brief Check all structural invariants, throwing `validation_error` on
     * the first violation.
     */
    void validate() const {
        if (static_cast<Eigen::Index>(marker_ids.size()) != values.rows()) {
            throw validation_error("count matrix: " + std::to_string(marker_ids.size()) +
                                   " marker ids for " + std::to_string(values.rows()) + " rows");
        }
        if (static_cast<Eigen::Index>(sample_ids.size()) != values.cols()) {
            throw validation_error("count matrix: " + std::to_string(sample_ids.size()) +
                                   " sample ids for " + std::to_string(values.cols()) + " columns");
        }
        check_unique(marker_ids, "marker");
        check_unique(sample_ids, "sample");
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            for (Eigen::Index i = 0; i < values.rows(); ++i) {
                const double v = values(i, j);
                if (!std::isfinite(v)) {
                    throw validation_error("count matrix: non-finite value for marker '" +
                                           marker_ids[static_cast<std::size_t>(i)] + "', sample '" +
                                           sample_ids[static_cast<std::size_t>(j)] + "'");
                }
                if (v < 0.0) {
                    throw validation_error("count matrix: negative value for marker '" +
                                           marker_ids[static_cast<std::size_t>(i)] + "', sample '" +
                                           sample_ids[static_cast<std::size_t>(j)] + "'");
                }
            }
        }
        if (groups) {
            if (groups->size() != sample_ids.size()) {
                throw validation_error("count matrix: " + std::to_string(groups->size()) +
                                       " group labels for " + std::to_string(sample_ids.size()) +
                                       " samples");
            }
            for (const auto& g : *groups) {
                if (g.empty()) {
                    throw validation_error("count matrix: empty group label");
                }
            }
        }
    }

    /// Column sums; the per-sample library sizes on the raw scale.
    Eigen::VectorXd library_sizes() const {
        return values.colwise().sum();
    }

    /// Distinct group labels in sorted order; empty when ungrouped.
    std::vector<std::string> group_levels() const {
        if (!groups) {
            return {};
        }
        std::set<std::string> levels(groups->begin(), groups->end());
        return {levels.begin(), levels.end()};
    }

    /// Column indices of the samples carrying the given group label.
    std::vector<int> group_columns(const std::string& level) const {
        if (!groups) {
            throw state_error("count matrix has no group labels");
        }
        std::vector<int> cols;
        for (std::size_t j = 0; j < groups->size(); ++j) {
            if ((*groups)[j] == level) {
                cols.push_back(static_cast<int>(j));
            }
        }
        return cols;
    }

    /**
     * @brief New matrix restricted to the given sample columns, in the given
     * order.
     */
    CountMatrix select_samples(const std::vector<int>& cols) const {
        CountMatrix out;
        out.marker_ids = marker_ids;
        out.scale = scale;
        out.values.resize(values.rows(), static_cast<Eigen::Index>(cols.size()));
        out.sample_ids.reserve(cols.size());
        if (groups) {
            out.groups.emplace();
            out.groups->reserve(cols.size());
        }
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const int j = cols[k];
            if (j < 0 || j >= samples()) {
                throw validation_error("sample selection index out of range: " + std::to_string(j));
            }
            out.values.col(static_cast<Eigen::Index>(k)) = values.col(j);
            out.sample_ids.push_back(sample_ids[static_cast<std::size_t>(j)]);
            if (groups) {
                out.groups->push_back((*groups)[static_cast<std::size_t>(j)]);
            }
        }
        return out;
    }

    /**
     * @brief New matrix restricted to the given marker rows, in the given
     * order.
     */
    CountMatrix select_markers(const std::vector<int>& rows) const {
        CountMatrix out;
        out.sample_ids = sample_ids;
        out.scale = scale;
        out.groups = groups;
        out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
        out.marker_ids.reserve(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const int i = rows[k];
            if (i < 0 || i >= markers()) {
                throw validation_error("marker selection index out of range: " + std::to_string(i));
            }
            out.values.row(static_cast<Eigen::Index>(k)) = values.row(i);
            out.marker_ids.push_back(marker_ids[static_cast<std::size_t>(i)]);
        }
        return out;
    }

    /// Row index of a marker id, or -1 when absent.
    int marker_index(const std::string& id) const {
        build_marker_lookup();
        auto it = marker_lookup_.find(id);
        return it == marker_lookup_.end() ? -1 : it->second;
    }

private:
    static void check_unique(const std::vector<std::string>& ids, const char* what) {
        std::unordered_set<std::string> seen;
        seen.reserve(ids.size());
        for (const auto& id : ids) {
            if (id.empty()) {
                throw validation_error(std::string("count matrix: empty ") + what + " id");
            }
            if (!seen.insert(id).second) {
                throw validation_error(std::string("count matrix: duplicate ") + what + " id '" + id + "'");
            }
        }
    }

    void build_marker_lookup() const {
        if (marker_lookup_.size() == marker_ids.size() && !marker_ids.empty()) {
            return;
        }
        marker_lookup_.clear();
        marker_lookup_.reserve(marker_ids.size());
        for (std::size_t i = 0; i < marker_ids.size(); ++i) {
            marker_lookup_.emplace(marker_ids[i], static_cast<int>(i));
        }
    }

    mutable std::unordered_map<std::string, int> marker_lookup_;
};

/**
 * @brief Column-concatenate two matrices sharing the same markers and scale.
 *
 * Sample ids are prefixed with the given tags to keep them unique; the tags
 * also become group labels when neither input carries groups of its own.
 * Used to assemble the combined matrix for joint embedding and clustering.
 */
inline CountMatrix concat_samples(const CountMatrix& a, const CountMatrix& b,
                                  const std::string& tag_a, const std::string& tag_b) {
    if (a.scale != b.scale) {
        throw state_error("cannot combine matrices on different scales");
    }
    if (a.marker_ids != b.marker_ids) {
        throw validation_error("cannot combine matrices with different marker sets");
    }
    CountMatrix out;
    out.marker_ids = a.marker_ids;
    out.scale = a.scale;
    out.values.resize(a.markers(), a.samples() + b.samples());
    out.values.leftCols(a.samples()) = a.values;
    out.values.rightCols(b.samples()) = b.values;
    out.sample_ids.reserve(static_cast<std::size_t>(out.values.cols()));
    for (const auto& s : a.sample_ids) {
        out.sample_ids.push_back(tag_a + ":" + s);
    }
    for (const auto& s : b.sample_ids) {
        out.sample_ids.push_back(tag_b + ":" + s);
    }
    return out;
}

}

#endif

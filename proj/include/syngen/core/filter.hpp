#ifndef SYNGEN_CORE_FILTER_HPP
#define SYNGEN_CORE_FILTER_HPP

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "count_matrix.hpp"
#include "error.hpp"
#include "transform.hpp"

/**
 * @file filter.hpp
 * @brief Marker filtering on log-scale abundance statistics.
 */

namespace syngen {

/// Collector for non-fatal diagnostics; callers pass null to discard them.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, const std::string& msg) {
    if (sink) {
        sink->push_back(msg);
    }
}

namespace filter_internal {

inline std::string show(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}

/**
 * @brief Drop markers whose log-scale abundance is too low or too flat.
 *
 * A marker is kept when its mean `log2(count + 1)` across samples is at least
 * `mean_threshold` and, if `sd_threshold` is given, its standard deviation
 * (n - 1 denominator) is at least `sd_threshold`. Thresholds are interpreted
 * on the log scale regardless of the scale of the input, which is returned
 * unchanged apart from the dropped rows. Filtering is idempotent: applying
 * the same thresholds to a filtered matrix removes nothing further.
 *
 * Fewer than 256 surviving markers is reported as a warning since downstream
 * models become unstable on very small panels; zero survivors is an error.
 */
inline CountMatrix filter_markers(const CountMatrix& m, double mean_threshold,
                                  std::optional<double> sd_threshold = std::nullopt,
                                  Warnings* warnings = nullptr) {
    if (sd_threshold && m.samples() < 2) {
        throw validation_error("sd filter needs at least two samples");
    }
    const CountMatrix logview = as_log2p1(m);
    const double n = static_cast<double>(m.samples());

    std::vector<int> keep;
    for (Eigen::Index g = 0; g < m.markers(); ++g) {
        const double mean = logview.values.row(g).mean();
        if (mean < mean_threshold) {
            continue;
        }
        if (sd_threshold) {
            const double ss = (logview.values.row(g).array() - mean).square().sum();
            const double sd = std::sqrt(ss / (n - 1.0));
            if (sd < *sd_threshold) {
                continue;
            }
        }
        keep.push_back(static_cast<int>(g));
    }

    if (keep.empty()) {
        throw validation_error(
            "no markers pass the filter (mean >= " + filter_internal::show(mean_threshold) +
            (sd_threshold ? ", sd >= " + filter_internal::show(*sd_threshold) : std::string()) + ")");
    }
    if (keep.size() < 256) {
        warn(warnings, "only " + std::to_string(keep.size()) +
                           " markers pass the filter; generative models may be unstable below 256");
    }
    return m.select_markers(keep);
}

}

#endif

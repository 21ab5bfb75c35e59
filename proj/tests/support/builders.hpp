#ifndef SYNGEN_TESTS_SUPPORT_BUILDERS_HPP
#define SYNGEN_TESTS_SUPPORT_BUILDERS_HPP

#include <initializer_list>
#include <string>
#include <vector>

#include "syngen/core/count_matrix.hpp"

// Small helpers for assembling matrices in tests without repeating id
// bookkeeping everywhere.

namespace tests {

inline std::vector<std::string> default_ids(const char* prefix, std::size_t n) {
    std::vector<std::string> ids;
    ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(std::string(prefix) + std::to_string(i + 1));
    }
    return ids;
}

inline syngen::CountMatrix matrix(const Eigen::MatrixXd& vals,
                                  syngen::Scale scale = syngen::Scale::raw_counts) {
    syngen::CountMatrix m;
    m.values = vals;
    m.marker_ids = default_ids("m", static_cast<std::size_t>(vals.rows()));
    m.sample_ids = default_ids("s", static_cast<std::size_t>(vals.cols()));
    m.scale = scale;
    m.validate();
    return m;
}

inline syngen::CountMatrix matrix(std::initializer_list<std::initializer_list<double>> rows,
                                  std::vector<std::string> marker_ids = {},
                                  std::vector<std::string> sample_ids = {}) {
    const std::size_t nrow = rows.size();
    const std::size_t ncol = rows.begin()->size();
    Eigen::MatrixXd vals(static_cast<Eigen::Index>(nrow), static_cast<Eigen::Index>(ncol));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) {
            vals(i, j++) = v;
        }
        ++i;
    }
    syngen::CountMatrix m;
    m.values = vals;
    m.marker_ids = marker_ids.empty() ? default_ids("m", nrow) : std::move(marker_ids);
    m.sample_ids = sample_ids.empty() ? default_ids("s", ncol) : std::move(sample_ids);
    m.validate();
    return m;
}

}

#endif

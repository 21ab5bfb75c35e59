#ifndef SYNGEN_CORE_TRANSFORM_HPP
#define SYNGEN_CORE_TRANSFORM_HPP

#include <cmath>

#include "count_matrix.hpp"
#include "error.hpp"

/**
 * @file transform.hpp
 * @brief Log-scale transform and its back-transform to integer counts.
 */

namespace syngen {

/**
 * @brief Transform raw counts to `log2(count + pseudocount)`.
 *
 * @param m Matrix on the raw scale.
 * @param pseudocount Offset added before taking logs; must be positive.
 */
inline CountMatrix log2p1(const CountMatrix& m, double pseudocount = 1.0) {
    if (m.scale != Scale::raw_counts) {
        throw state_error("log2p1 expects raw counts, got " + std::string(to_string(m.scale)));
    }
    if (!(pseudocount > 0.0)) {
        throw validation_error("pseudocount must be positive");
    }
    CountMatrix out = m;
    out.values = (m.values.array() + pseudocount).log() / std::log(2.0);
    out.scale = Scale::log2p1;
    return out;
}

/**
 * @brief Back-transform log-scale values to integer counts.
 *
 * Each entry x maps to `round(max(0, 2^x - pseudocount))`. Negative values,
 * which generative models can produce before clamping, land on zero. With the
 * default pseudocount this inverts `log2p1` exactly on integer counts.
 */
inline CountMatrix inverse_log2p1(const CountMatrix& m, double pseudocount = 1.0) {
    if (m.scale != Scale::log2p1) {
        throw state_error("inverse_log2p1 expects log2p1 values, got " + std::string(to_string(m.scale)));
    }
    if (!(pseudocount > 0.0)) {
        throw validation_error("pseudocount must be positive");
    }
    CountMatrix out = m;
    out.values = m.values.unaryExpr([pseudocount](double x) {
        const double v = std::exp2(x) - pseudocount;
        return v <= 0.0 ? 0.0 : std::round(v);
    });
    out.scale = Scale::raw_counts;
    return out;
}

/// Log-scale view of a matrix: transforms raw counts, passes log data through.
inline CountMatrix as_log2p1(const CountMatrix& m, double pseudocount = 1.0) {
    return m.scale == Scale::log2p1 ? m : log2p1(m, pseudocount);
}

}

#endif

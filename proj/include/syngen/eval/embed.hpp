#ifndef SYNGEN_EVAL_EMBED_HPP
#define SYNGEN_EVAL_EMBED_HPP

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>

#include "../core/count_matrix.hpp"
#include "../core/error.hpp"
#include "../core/transform.hpp"

/**
 * @file embed.hpp
 * @brief Two-dimensional sample embedding for plotting.
 */

namespace syngen {

/**
 * @brief Project samples onto their first two principal components.
 *
 * Samples are points in marker space on the log scale; the marker means are
 * removed and the two leading components of the singular value decomposition
 * give the coordinates (rows follow the sample order). Component signs are
 * fixed by making each component's largest-magnitude marker loading
 * positive. When the data has fewer than two directions of variation the
 * missing column is zero.
 */
inline Eigen::MatrixXd embed_2d(const CountMatrix& m) {
    if (m.samples() < 3) {
        throw validation_error("embedding needs at least three samples");
    }
    const CountMatrix logview = as_log2p1(m);
    const Eigen::MatrixXd centered = logview.values.colwise() - logview.values.rowwise().mean();

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::Index rank = std::min<Eigen::Index>(2, svd.singularValues().size());

    Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(m.samples(), 2);
    for (Eigen::Index k = 0; k < rank; ++k) {
        Eigen::Index peak = 0;
        svd.matrixU().col(k).cwiseAbs().maxCoeff(&peak);
        const double sign = svd.matrixU()(peak, k) < 0.0 ? -1.0 : 1.0;
        coords.col(k) = sign * svd.singularValues()(k) * svd.matrixV().col(k);
    }
    return coords;
}

}

#endif

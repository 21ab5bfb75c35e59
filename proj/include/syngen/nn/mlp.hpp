#ifndef SYNGEN_NN_MLP_HPP
#define SYNGEN_NN_MLP_HPP

#include <cmath>
#include <vector>

#include "../core/rng.hpp"
#include "tape.hpp"

/**
 * @file mlp.hpp
 * @brief Dense layers and plain multilayer perceptrons on the tape.
 */

namespace syngen::nn {

/// Scaled Gaussian initialization matched to rectified units: each weight is
/// drawn from N(0, 2 / fan_in).
inline Mat he_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    const double sd = std::sqrt(2.0 / static_cast<double>(cols));
    Mat w(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            w(i, j) = rng.normal(0.0, sd);
        }
    }
    return w;
}

/// Dense layer y = W x + b with weights rows = outputs, cols = inputs.
struct Linear {
    Mat W;
    Mat b;

    Linear() = default;
    Linear(Eigen::Index out, Eigen::Index in, Rng& rng) : W(he_init(out, in, rng)), b(Mat::Zero(out, 1)) {}

    Var apply(Tape& tape, Var wv, Var bv, Var x) const {
        return tape.add_colvec(tape.matmul(wv, x), bv);
    }

    /// Untracked forward pass for generation and evaluation.
    Mat forward(const Mat& x) const { return (W * x).colwise() + Eigen::VectorXd(b.col(0)); }
};

enum class Activation { relu, linear };

/**
 * @brief Feed-forward network with a fixed hidden activation and a linear
 * output layer.
 */
struct Mlp {
    std::vector<Linear> layers;

    Mlp() = default;

    Mlp(Eigen::Index in, const std::vector<Eigen::Index>& hidden, Eigen::Index out, Rng& rng) {
        Eigen::Index prev = in;
        for (Eigen::Index h : hidden) {
            layers.emplace_back(h, prev, rng);
            prev = h;
        }
        layers.emplace_back(out, prev, rng);
    }

    std::vector<Mat*> parameters() {
        std::vector<Mat*> out;
        out.reserve(layers.size() * 2);
        for (auto& l : layers) {
            out.push_back(&l.W);
            out.push_back(&l.b);
        }
        return out;
    }

    /**
     * @brief Taped forward pass; binds every weight onto the tape and returns
     * the bound parameter handles through `bound` for the optimizer step.
     */
    Var apply(Tape& tape, Var x, std::vector<Var>* bound = nullptr) const {
        Var h = x;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            Var wv = tape.param(layers[i].W);
            Var bv = tape.param(layers[i].b);
            if (bound) {
                bound->push_back(wv);
                bound->push_back(bv);
            }
            h = layers[i].apply(tape, wv, bv, h);
            if (i + 1 < layers.size()) {
                h = tape.relu(h);
            }
        }
        return h;
    }

    /// Untracked forward pass mirroring `apply`.
    Mat forward(const Mat& x) const {
        Mat h = x;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            h = layers[i].forward(h);
            if (i + 1 < layers.size()) {
                h = h.cwiseMax(0.0);
            }
        }
        return h;
    }
};

}

#endif

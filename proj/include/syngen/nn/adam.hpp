#ifndef SYNGEN_NN_ADAM_HPP
#define SYNGEN_NN_ADAM_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "tape.hpp"

/**
 * @file adam.hpp
 * @brief Adam optimizer with the conventional moment defaults.
 */

namespace syngen::nn {

class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    /**
     * @brief Apply one update. Parameter order must stay stable across calls;
     * moment buffers are sized on first use.
     */
    void step(const std::vector<Mat*>& params, const std::vector<Mat>& grads) {
        if (params.size() != grads.size()) {
            throw std::logic_error("adam: parameter/gradient count mismatch");
        }
        if (m_.empty()) {
            m_.reserve(params.size());
            v_.reserve(params.size());
            for (const Mat* p : params) {
                m_.push_back(Mat::Zero(p->rows(), p->cols()));
                v_.push_back(Mat::Zero(p->rows(), p->cols()));
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
            const Mat mhat = m_[i] / bc1;
            const Mat vhat = v_[i] / bc2;
            params[i]->array() -= lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
        }
    }

    long steps() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Mat> m_, v_;
};

}

#endif

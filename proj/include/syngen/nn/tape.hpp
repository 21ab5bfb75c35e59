#ifndef SYNGEN_NN_TAPE_HPP
#define SYNGEN_NN_TAPE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "../core/error.hpp"

/**
 * @file tape.hpp
 * @brief Reverse-mode automatic differentiation over dense matrices.
 *
 * A `Tape` records a single forward computation as a sequence of nodes, each
 * holding its value and a pullback closure. Calling `backward` on a scalar
 * node accumulates gradients into every node that was created with
 * `requires_grad`. Tapes are built fresh for every training step; parameters
 * live outside the tape and are bound with `param`.
 *
 * Matrices follow the convention used throughout the generative models:
 * features in rows, batch samples in columns.
 */

namespace syngen::nn {

using Mat = Eigen::MatrixXd;

/// Handle to a node on a `Tape`.
struct Var {
    int idx = -1;
    bool valid() const { return idx >= 0; }
};

class Tape {
public:
    /// Bind an external value; gradients are tracked only for `param`.
    Var constant(Mat v) { return push(std::move(v), false, {}); }
    Var param(const Mat& v) { return push(v, true, {}); }

    const Mat& value(Var v) const { return node(v).value; }

    /// Gradient accumulated for `v` by the last `backward` call. Zero matrix
    /// if the node never received a contribution.
    Mat grad(Var v) const {
        const Node& n = node(v);
        if (n.grad.size() == 0) {
            return Mat::Zero(n.value.rows(), n.value.cols());
        }
        return n.grad;
    }

    // Linear algebra.

    Var matmul(Var a, Var b) {
        require(value(a).cols() == value(b).rows(), "matmul shape mismatch");
        Mat v = value(a) * value(b);
        return push(std::move(v), track(a, b), [a, b](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            if (t.tracks(a)) t.accumulate(a, g * t.value(b).transpose());
            if (t.tracks(b)) t.accumulate(b, t.value(a).transpose() * g);
        });
    }

    /// C = A^T * B, without materializing the transpose as its own node.
    Var matmul_t_left(Var a, Var b) {
        require(value(a).rows() == value(b).rows(), "matmul_t_left shape mismatch");
        Mat v = value(a).transpose() * value(b);
        return push(std::move(v), track(a, b), [a, b](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            if (t.tracks(a)) t.accumulate(a, t.value(b) * g.transpose());
            if (t.tracks(b)) t.accumulate(b, t.value(a) * g);
        });
    }

    /// Scalar log|det A| for square A; throws when A is numerically singular.
    Var logdet(Var a) {
        const Mat& m = value(a);
        require(m.rows() == m.cols(), "logdet needs a square matrix");
        Eigen::PartialPivLU<Mat> lu(m);
        double log_abs = 0.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double d = std::fabs(lu.matrixLU()(i, i));
            if (d < 1e-300) {
                throw state_error("matrix is numerically singular in logdet");
            }
            log_abs += std::log(d);
        }
        Mat inv_t = lu.inverse().transpose();
        Mat v(1, 1);
        v(0, 0) = log_abs;
        return push(std::move(v), track(a), [a, inv_t](Tape& t, int self) {
            const double g = t.nodes_[self].grad(0, 0);
            if (t.tracks(a)) t.accumulate(a, g * inv_t);
        });
    }

    // Elementwise arithmetic.

    Var add(Var a, Var b) {
        require_same(a, b, "add");
        Mat v = value(a) + value(b);
        return push(std::move(v), track(a, b), [a, b](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            if (t.tracks(a)) t.accumulate(a, g);
            if (t.tracks(b)) t.accumulate(b, g);
        });
    }

    Var sub(Var a, Var b) {
        require_same(a, b, "sub");
        Mat v = value(a) - value(b);
        return push(std::move(v), track(a, b), [a, b](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            if (t.tracks(a)) t.accumulate(a, g);
            if (t.tracks(b)) t.accumulate(b, -g);
        });
    }

    Var cmul(Var a, Var b) {
        require_same(a, b, "cmul");
        Mat v = value(a).cwiseProduct(value(b));
        return push(std::move(v), track(a, b), [a, b](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            if (t.tracks(a)) t.accumulate(a, g.cwiseProduct(t.value(b)));
            if (t.tracks(b)) t.accumulate(b, g.cwiseProduct(t.value(a)));
        });
    }

    Var cmul_const(Var a, Mat c) {
        require(value(a).rows() == c.rows() && value(a).cols() == c.cols(), "cmul_const shape mismatch");
        Mat v = value(a).cwiseProduct(c);
        return push(std::move(v), track(a), [a, c](Tape& t, int self) {
            if (t.tracks(a)) t.accumulate(a, t.nodes_[self].grad.cwiseProduct(c));
        });
    }

    Var scale(Var a, double s) {
        Mat v = value(a) * s;
        return push(std::move(v), track(a), [a, s](Tape& t, int self) {
            if (t.tracks(a)) t.accumulate(a, t.nodes_[self].grad * s);
        });
    }

    Var add_const(Var a, double c) {
        Mat v = value(a).array() + c;
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (t.tracks(a)) t.accumulate(a, t.nodes_[self].grad);
        });
    }

    Var neg(Var a) { return scale(a, -1.0); }

    // Column-vector broadcasts: v has one column and as many rows as a.

    Var add_colvec(Var a, Var v) {
        require_colvec(a, v, "add_colvec");
        Mat out = value(a) + value(v).replicate(1, value(a).cols());
        return push(std::move(out), track(a, v), [a, v](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            if (t.tracks(a)) t.accumulate(a, g);
            if (t.tracks(v)) t.accumulate(v, g.rowwise().sum());
        });
    }

    Var sub_colvec(Var a, Var v) {
        require_colvec(a, v, "sub_colvec");
        Mat out = value(a) - value(v).replicate(1, value(a).cols());
        return push(std::move(out), track(a, v), [a, v](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            if (t.tracks(a)) t.accumulate(a, g);
            if (t.tracks(v)) t.accumulate(v, -g.rowwise().sum());
        });
    }

    Var mul_colvec(Var a, Var v) {
        require_colvec(a, v, "mul_colvec");
        Mat rep = value(v).replicate(1, value(a).cols());
        Mat out = value(a).cwiseProduct(rep);
        return push(std::move(out), track(a, v), [a, v, rep](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            if (t.tracks(a)) t.accumulate(a, g.cwiseProduct(rep));
            if (t.tracks(v)) t.accumulate(v, g.cwiseProduct(t.value(a)).rowwise().sum());
        });
    }

    // Elementwise nonlinearities.

    Var relu(Var a) {
        Mat v = value(a).cwiseMax(0.0);
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (!t.tracks(a)) return;
            const Mat& g = t.nodes_[self].grad;
            const Mat& x = t.value(a);
            t.accumulate(a, (x.array() > 0.0).select(g, 0.0));
        });
    }

    Var tanh_(Var a) {
        Mat v = value(a).array().tanh();
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (!t.tracks(a)) return;
            const Mat& g = t.nodes_[self].grad;
            const Mat& y = t.nodes_[self].value;
            t.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
        });
    }

    Var sigmoid(Var a) {
        Mat v = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (!t.tracks(a)) return;
            const Mat& g = t.nodes_[self].grad;
            const Mat& y = t.nodes_[self].value;
            t.accumulate(a, (g.array() * y.array() * (1.0 - y.array())).matrix());
        });
    }

    Var exp_(Var a) {
        Mat v = value(a).array().exp();
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (!t.tracks(a)) return;
            t.accumulate(a, t.nodes_[self].grad.cwiseProduct(t.nodes_[self].value));
        });
    }

    Var log_(Var a) {
        Mat v = value(a).array().log();
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (!t.tracks(a)) return;
            t.accumulate(a, t.nodes_[self].grad.cwiseQuotient(t.value(a)));
        });
    }

    Var sqrt_(Var a) {
        Mat v = value(a).array().sqrt();
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (!t.tracks(a)) return;
            const Mat& g = t.nodes_[self].grad;
            const Mat& y = t.nodes_[self].value;
            t.accumulate(a, (g.array() * 0.5 / y.array()).matrix());
        });
    }

    Var square(Var a) {
        Mat v = value(a).array().square();
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (!t.tracks(a)) return;
            t.accumulate(a, (t.nodes_[self].grad.array() * 2.0 * t.value(a).array()).matrix());
        });
    }

    Var softplus(Var a) {
        Mat v = value(a).unaryExpr([](double x) {
            return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
        });
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (!t.tracks(a)) return;
            const Mat& g = t.nodes_[self].grad;
            const Mat sig = t.value(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
            t.accumulate(a, g.cwiseProduct(sig));
        });
    }

    Var cinv(Var a) {
        Mat v = value(a).cwiseInverse();
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (!t.tracks(a)) return;
            const Mat& y = t.nodes_[self].value;
            t.accumulate(a, (-t.nodes_[self].grad.array() * y.array().square()).matrix());
        });
    }

    // Reductions.

    Var sum_all(Var a) {
        Mat v(1, 1);
        v(0, 0) = value(a).sum();
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (!t.tracks(a)) return;
            const double g = t.nodes_[self].grad(0, 0);
            t.accumulate(a, Mat::Constant(t.value(a).rows(), t.value(a).cols(), g));
        });
    }

    Var mean_all(Var a) {
        Mat v(1, 1);
        v(0, 0) = value(a).mean();
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (!t.tracks(a)) return;
            const Mat& x = t.value(a);
            const double g = t.nodes_[self].grad(0, 0) / static_cast<double>(x.size());
            t.accumulate(a, Mat::Constant(x.rows(), x.cols(), g));
        });
    }

    Var colwise_sum(Var a) {
        Mat v = value(a).colwise().sum();
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (!t.tracks(a)) return;
            const Mat& g = t.nodes_[self].grad;
            t.accumulate(a, Mat::Ones(t.value(a).rows(), 1) * g);
        });
    }

    Var rowwise_sum(Var a) {
        Mat v = value(a).rowwise().sum();
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (!t.tracks(a)) return;
            const Mat& g = t.nodes_[self].grad;
            t.accumulate(a, g * Mat::Ones(1, t.value(a).cols()));
        });
    }

    Var rowwise_mean(Var a) {
        Mat v = value(a).rowwise().mean();
        return push(std::move(v), track(a), [a](Tape& t, int self) {
            if (!t.tracks(a)) return;
            const Mat& x = t.value(a);
            const Mat& g = t.nodes_[self].grad;
            t.accumulate(a, g * Mat::Constant(1, x.cols(), 1.0 / static_cast<double>(x.cols())));
        });
    }

    // Structural ops.

    Var gather_rows(Var a, std::vector<int> rows) {
        const Mat& x = value(a);
        Mat v(static_cast<Eigen::Index>(rows.size()), x.cols());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            require(rows[k] >= 0 && rows[k] < x.rows(), "gather_rows index out of range");
            v.row(static_cast<Eigen::Index>(k)) = x.row(rows[k]);
        }
        return push(std::move(v), track(a), [a, rows](Tape& t, int self) {
            if (!t.tracks(a)) return;
            const Mat& g = t.nodes_[self].grad;
            Mat acc = Mat::Zero(t.value(a).rows(), t.value(a).cols());
            for (std::size_t k = 0; k < rows.size(); ++k) {
                acc.row(rows[k]) += g.row(static_cast<Eigen::Index>(k));
            }
            t.accumulate(a, acc);
        });
    }

    Var vcat(Var a, Var b) {
        require(value(a).cols() == value(b).cols(), "vcat column mismatch");
        Mat v(value(a).rows() + value(b).rows(), value(a).cols());
        v.topRows(value(a).rows()) = value(a);
        v.bottomRows(value(b).rows()) = value(b);
        return push(std::move(v), track(a, b), [a, b](Tape& t, int self) {
            const Mat& g = t.nodes_[self].grad;
            const Eigen::Index ra = t.value(a).rows();
            if (t.tracks(a)) t.accumulate(a, g.topRows(ra));
            if (t.tracks(b)) t.accumulate(b, g.bottomRows(g.rows() - ra));
        });
    }

    /**
     * @brief Run the backward pass from a scalar node.
     */
    void backward(Var loss) {
        const Node& l = node(loss);
        require(l.value.rows() == 1 && l.value.cols() == 1, "backward needs a scalar loss");
        for (auto& n : nodes_) {
            n.grad.resize(0, 0);
        }
        nodes_[static_cast<std::size_t>(loss.idx)].grad = Mat::Ones(1, 1);
        for (int i = loss.idx; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.backward && n.grad.size() != 0) {
                n.backward(*this, i);
            }
        }
    }

private:
    struct Node {
        Mat value;
        Mat grad;
        bool requires_grad = false;
        std::function<void(Tape&, int)> backward;
    };

    std::vector<Node> nodes_;

    friend struct TapeAccess;

    Var push(Mat value, bool requires_grad, std::function<void(Tape&, int)> back) {
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        n.backward = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    const Node& node(Var v) const {
        require(v.valid() && v.idx < static_cast<int>(nodes_.size()), "invalid tape handle");
        return nodes_[static_cast<std::size_t>(v.idx)];
    }

    bool tracks(Var v) const { return node(v).requires_grad; }
    bool track(Var a) const { return tracks(a); }
    bool track(Var a, Var b) const { return tracks(a) || tracks(b); }

    void accumulate(Var v, const Mat& g) {
        Node& n = nodes_[static_cast<std::size_t>(v.idx)];
        if (n.grad.size() == 0) {
            n.grad = g;
        } else {
            n.grad += g;
        }
    }

    void require_same(Var a, Var b, const char* op) const {
        require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
                std::string(op) + " shape mismatch");
    }

    void require_colvec(Var a, Var v, const char* op) const {
        require(value(v).cols() == 1 && value(v).rows() == value(a).rows(),
                std::string(op) + " expects a column vector matching the row count");
    }

    static void require(bool ok, const std::string& msg) {
        if (!ok) {
            throw std::logic_error("tape: " + msg);
        }
    }
};

}

#endif

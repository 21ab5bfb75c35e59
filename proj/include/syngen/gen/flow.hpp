#ifndef SYNGEN_GEN_FLOW_HPP
#define SYNGEN_GEN_FLOW_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "../nn/adam.hpp"
#include "../nn/mlp.hpp"
#include "../nn/tape.hpp"
#include "generator.hpp"
#include "json_util.hpp"
#include "policy.hpp"

/**
 * @file flow.hpp
 * @brief Normalizing flows built from invertible layers.
 *
 * All layers are parameterized in the density direction (data to latent);
 * sampling walks the stack backwards through exact inverses. Training
 * minimizes the negative log-likelihood on a train split and monitors the
 * same quantity on a held-out validation split.
 */

namespace syngen {

struct FlowConfig {
    int blocks = 5;
    Eigen::Index hidden = 256;
    double validation_ratio = 0.15;

    /// Connection drop fraction for masked autoregressive layers.
    double mask_fraction = 0.30;

    bool conditional = false;

    void validate() const {
        if (blocks <= 0) throw validation_error("flow needs at least one block");
        if (hidden <= 0) throw validation_error("hidden width must be positive");
        if (!(validation_ratio > 0.0 && validation_ratio < 1.0)) {
            throw validation_error("validation ratio must lie in (0, 1)");
        }
        if (!(mask_fraction >= 0.0 && mask_fraction < 1.0)) {
            throw validation_error("mask fraction must lie in [0, 1)");
        }
    }
};

namespace flow_internal {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.9;
constexpr double kLogTau = 1.8378770664093453;  // log(2*pi)

/// Soft clamp keeping log-scales inside (-bound, bound) with identity slope at 0.
inline nn::Var soft_clamp(nn::Tape& tape, nn::Var raw, double bound) {
    return tape.scale(tape.tanh_(tape.scale(raw, 1.0 / bound)), bound);
}

inline nn::Mat soft_clamp(const nn::Mat& raw, double bound) {
    return (bound * (raw / bound).array().tanh()).matrix();
}

/// Broadcast a 1x1 value to a 1xB row on the tape.
inline nn::Var broadcast_row(nn::Tape& tape, nn::Var scalar, Eigen::Index cols) {
    return tape.matmul(scalar, tape.constant(nn::Mat::Ones(1, cols)));
}

class FlowLayer {
public:
    virtual ~FlowLayer() = default;

    /**
     * Taped density pass. Appends this layer's per-sample log-determinant to
     * `ld` (a 1xB row) and pushes parameter handles onto `bound` in the same
     * order as parameters().
     */
    virtual nn::Var forward_tape(nn::Tape& tape, nn::Var x, const nn::Mat* cond, nn::Var& ld,
                                 bool training, std::vector<nn::Var>* bound) = 0;

    /// Untracked density pass in evaluation mode.
    virtual nn::Mat forward_eval(const nn::Mat& x, const nn::Mat* cond,
                                 Eigen::RowVectorXd& ld) const = 0;

    /// Exact inverse in evaluation mode (sampling direction).
    virtual nn::Mat inverse(const nn::Mat& z, const nn::Mat* cond) const = 0;

    virtual std::vector<nn::Mat*> parameters() { return {}; }

    /// Non-parameter state (running statistics, init flags).
    virtual nlohmann::json state_json() const { return nlohmann::json::object(); }
    virtual void load_state(const nlohmann::json&) {}
};

/**
 * Affine coupling over contiguous feature halves. One half passes through
 * unchanged and conditions a scale-and-shift of the other; `parity` selects
 * which half is transformed. The conditioner starts at the identity map.
 */
class CouplingLayer final : public FlowLayer {
public:
    CouplingLayer(Eigen::Index d, Eigen::Index hidden, int parity, Rng& rng)
        : d_(d), parity_(parity) {
        if (d < 2) throw validation_error("coupling layers need at least 2 features");
        split_ = d / 2;
        const Eigen::Index d_pass = parity_ == 0 ? split_ : d_ - split_;
        const Eigen::Index d_change = d_ - d_pass;
        net_ = nn::Mlp(d_pass, {hidden, hidden}, 2 * d_change, rng);
        net_.layers.back().W.setZero();
        net_.layers.back().b.setZero();
    }

    nn::Var forward_tape(nn::Tape& tape, nn::Var x, const nn::Mat*, nn::Var& ld, bool,
                         std::vector<nn::Var>* bound) override {
        const auto [pass_idx, change_idx] = index_split();
        nn::Var x_pass = tape.gather_rows(x, pass_idx);
        nn::Var x_change = tape.gather_rows(x, change_idx);

        nn::Var st = net_.apply(tape, x_pass, bound);
        const Eigen::Index dc = static_cast<Eigen::Index>(change_idx.size());
        nn::Var log_s = soft_clamp(tape, tape.gather_rows(st, head(dc)), 5.0);
        nn::Var t = tape.gather_rows(st, tail(dc));

        nn::Var y = tape.add(tape.cmul(x_change, tape.exp_(log_s)), t);
        ld = tape.add(ld, tape.colwise_sum(log_s));
        return parity_ == 0 ? tape.vcat(x_pass, y) : tape.vcat(y, x_pass);
    }

    nn::Mat forward_eval(const nn::Mat& x, const nn::Mat*, Eigen::RowVectorXd& ld) const override {
        const auto [x_pass, x_change] = value_split(x);
        const auto [log_s, t] = conditioner(x_pass);
        nn::Mat y = x_change.cwiseProduct(log_s.array().exp().matrix()) + t;
        ld += log_s.colwise().sum();
        return assemble(x_pass, y);
    }

    nn::Mat inverse(const nn::Mat& z, const nn::Mat*) const override {
        const auto [z_pass, z_change] = value_split(z);
        const auto [log_s, t] = conditioner(z_pass);
        nn::Mat x = (z_change - t).cwiseProduct((-log_s.array()).exp().matrix());
        return assemble(z_pass, x);
    }

    std::vector<nn::Mat*> parameters() override { return net_.parameters(); }

private:
    std::pair<std::vector<int>, std::vector<int>> index_split() const {
        std::vector<int> lo, hi;
        for (Eigen::Index i = 0; i < split_; ++i) lo.push_back(static_cast<int>(i));
        for (Eigen::Index i = split_; i < d_; ++i) hi.push_back(static_cast<int>(i));
        return parity_ == 0 ? std::pair{lo, hi} : std::pair{hi, lo};
    }

    static std::vector<int> head(Eigen::Index n) {
        std::vector<int> idx;
        for (Eigen::Index i = 0; i < n; ++i) idx.push_back(static_cast<int>(i));
        return idx;
    }

    static std::vector<int> tail(Eigen::Index n) {
        std::vector<int> idx;
        for (Eigen::Index i = n; i < 2 * n; ++i) idx.push_back(static_cast<int>(i));
        return idx;
    }

    std::pair<nn::Mat, nn::Mat> value_split(const nn::Mat& x) const {
        nn::Mat lo = x.topRows(split_);
        nn::Mat hi = x.bottomRows(d_ - split_);
        return parity_ == 0 ? std::pair{lo, hi} : std::pair{hi, lo};
    }

    nn::Mat assemble(const nn::Mat& pass, const nn::Mat& changed) const {
        nn::Mat out(d_, pass.cols());
        if (parity_ == 0) {
            out.topRows(split_) = pass;
            out.bottomRows(d_ - split_) = changed;
        } else {
            out.topRows(split_) = changed;
            out.bottomRows(d_ - split_) = pass;
        }
        return out;
    }

    std::pair<nn::Mat, nn::Mat> conditioner(const nn::Mat& x_pass) const {
        nn::Mat st = net_.forward(x_pass);
        const Eigen::Index dc = st.rows() / 2;
        nn::Mat log_s = soft_clamp(nn::Mat(st.topRows(dc)), 5.0);
        return {log_s, st.bottomRows(dc)};
    }

    Eigen::Index d_;
    int parity_;
    Eigen::Index split_ = 0;
    nn::Mlp net_;
};

/**
 * Per-feature affine with data-dependent initialization: the first training
 * batch is mapped to zero mean and unit spread, after which scale and bias
 * train freely.
 */
class ActNormLayer final : public FlowLayer {
public:
    explicit ActNormLayer(Eigen::Index d)
        : log_s_(nn::Mat::Zero(d, 1)), b_(nn::Mat::Zero(d, 1)) {}

    nn::Var forward_tape(nn::Tape& tape, nn::Var x, const nn::Mat*, nn::Var& ld, bool training,
                         std::vector<nn::Var>* bound) override {
        if (training && !initialized_) {
            data_init(tape.value(x));
        }
        nn::Var ls = tape.param(log_s_);
        nn::Var b = tape.param(b_);
        if (bound) {
            bound->push_back(ls);
            bound->push_back(b);
        }
        nn::Var z = tape.add_colvec(tape.mul_colvec(x, tape.exp_(ls)), b);
        ld = tape.add(ld, broadcast_row(tape, tape.sum_all(ls), tape.value(x).cols()));
        return z;
    }

    nn::Mat forward_eval(const nn::Mat& x, const nn::Mat*, Eigen::RowVectorXd& ld) const override {
        nn::Mat z = ((x.array().colwise() * log_s_.col(0).array().exp()).colwise() + b_.col(0).array()).matrix();
        ld.array() += log_s_.sum();
        return z;
    }

    nn::Mat inverse(const nn::Mat& z, const nn::Mat*) const override {
        return ((z.array().colwise() - b_.col(0).array()).colwise() * (-log_s_.col(0).array()).exp()).matrix();
    }

    std::vector<nn::Mat*> parameters() override { return {&log_s_, &b_}; }

    nlohmann::json state_json() const override { return {{"initialized", initialized_}}; }
    void load_state(const nlohmann::json& j) override { initialized_ = j.at("initialized").get<bool>(); }

    bool initialized() const { return initialized_; }

private:
    void data_init(const nn::Mat& batch) {
        const Eigen::Index n = batch.cols();
        for (Eigen::Index i = 0; i < batch.rows(); ++i) {
            const double mean = batch.row(i).mean();
            double var = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                const double c = batch(i, j) - mean;
                var += c * c;
            }
            var /= static_cast<double>(n);
            const double sd = std::max(std::sqrt(var), 1e-8);
            log_s_(i, 0) = -std::log(sd);
            b_(i, 0) = -mean / sd;
        }
        initialized_ = true;
    }

    nn::Mat log_s_;
    nn::Mat b_;
    bool initialized_ = false;
};

/// Dense invertible map, initialized to a random rotation with determinant +1.
class InvLinearLayer final : public FlowLayer {
public:
    InvLinearLayer(Eigen::Index d, Rng& rng) {
        nn::Mat a(d, d);
        for (Eigen::Index j = 0; j < d; ++j) {
            for (Eigen::Index i = 0; i < d; ++i) {
                a(i, j) = rng.normal();
            }
        }
        Eigen::HouseholderQR<nn::Mat> qr(a);
        nn::Mat q = qr.householderQ();
        nn::Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
        for (Eigen::Index j = 0; j < d; ++j) {
            if (r(j, j) < 0.0) q.col(j) = -q.col(j);
        }
        if (q.determinant() < 0.0) q.col(0) = -q.col(0);
        w_ = std::move(q);
    }

    nn::Var forward_tape(nn::Tape& tape, nn::Var x, const nn::Mat*, nn::Var& ld, bool,
                         std::vector<nn::Var>* bound) override {
        check_invertible();
        nn::Var w = tape.param(w_);
        if (bound) bound->push_back(w);
        nn::Var z = tape.matmul(w, x);
        ld = tape.add(ld, broadcast_row(tape, tape.logdet(w), tape.value(x).cols()));
        return z;
    }

    nn::Mat forward_eval(const nn::Mat& x, const nn::Mat*, Eigen::RowVectorXd& ld) const override {
        ld.array() += log_abs_det();
        return w_ * x;
    }

    nn::Mat inverse(const nn::Mat& z, const nn::Mat*) const override {
        return Eigen::PartialPivLU<nn::Mat>(w_).solve(z);
    }

    std::vector<nn::Mat*> parameters() override { return {&w_}; }

    const nn::Mat& weight() const { return w_; }

private:
    double log_abs_det() const {
        Eigen::PartialPivLU<nn::Mat> lu(w_);
        const nn::Mat& u = lu.matrixLU();
        double out = 0.0;
        for (Eigen::Index i = 0; i < u.rows(); ++i) {
            out += std::log(std::fabs(u(i, i)));
        }
        return out;
    }

    void check_invertible() const {
        if (log_abs_det() < std::log(1e-12)) {
            throw state_error("mixing matrix became numerically singular");
        }
    }

    nn::Mat w_;
};

/**
 * Statistics-only batch normalization. Training batches are standardized by
 * their own moments (differentiated through), while running moments serve
 * evaluation and sampling.
 */
class BatchNormLayer final : public FlowLayer {
public:
    explicit BatchNormLayer(Eigen::Index d)
        : running_mean_(Eigen::VectorXd::Zero(d)), running_var_(Eigen::VectorXd::Ones(d)) {}

    nn::Var forward_tape(nn::Tape& tape, nn::Var x, const nn::Mat*, nn::Var& ld, bool training,
                         std::vector<nn::Var>*) override {
        if (!training) {
            throw std::logic_error("taped batch normalization is a training-mode pass");
        }
        const Eigen::Index cols = tape.value(x).cols();
        nn::Var m = tape.rowwise_mean(x);
        nn::Var xc = tape.sub_colvec(x, m);
        nn::Var v = tape.rowwise_mean(tape.square(xc));
        nn::Var denom = tape.sqrt_(tape.add_const(v, kBnEps));
        nn::Var z = tape.mul_colvec(xc, tape.cinv(denom));

        nn::Var ld_scalar = tape.neg(tape.scale(tape.sum_all(tape.log_(tape.add_const(v, kBnEps))), 0.5));
        ld = tape.add(ld, broadcast_row(tape, ld_scalar, cols));

        running_mean_ = kBnMomentum * running_mean_ + (1.0 - kBnMomentum) * tape.value(m).col(0);
        running_var_ = kBnMomentum * running_var_ + (1.0 - kBnMomentum) * tape.value(v).col(0);
        return z;
    }

    nn::Mat forward_eval(const nn::Mat& x, const nn::Mat*, Eigen::RowVectorXd& ld) const override {
        const Eigen::ArrayXd denom = (running_var_.array() + kBnEps).sqrt();
        nn::Mat z = ((x.array().colwise() - running_mean_.array()).colwise() / denom).matrix();
        ld.array() += -0.5 * (running_var_.array() + kBnEps).log().sum();
        return z;
    }

    nn::Mat inverse(const nn::Mat& z, const nn::Mat*) const override {
        const Eigen::ArrayXd denom = (running_var_.array() + kBnEps).sqrt();
        return ((z.array().colwise() * denom).colwise() + running_mean_.array()).matrix();
    }

    nlohmann::json state_json() const override {
        return {{"mean", std::vector<double>(running_mean_.data(), running_mean_.data() + running_mean_.size())},
                {"var", std::vector<double>(running_var_.data(), running_var_.data() + running_var_.size())}};
    }

    void load_state(const nlohmann::json& j) override {
        const auto mean = j.at("mean").get<std::vector<double>>();
        const auto var = j.at("var").get<std::vector<double>>();
        if (mean.size() != static_cast<std::size_t>(running_mean_.size()) ||
            var.size() != static_cast<std::size_t>(running_var_.size())) {
            throw serialize_error("model file: normalization state has wrong length");
        }
        running_mean_ = Eigen::Map<const Eigen::VectorXd>(mean.data(), running_mean_.size());
        running_var_ = Eigen::Map<const Eigen::VectorXd>(var.data(), running_var_.size());
    }

    const Eigen::VectorXd& running_mean() const { return running_mean_; }
    const Eigen::VectorXd& running_var() const { return running_var_; }

private:
    Eigen::VectorXd running_mean_;
    Eigen::VectorXd running_var_;
};

/// Fixed feature-order reversal; volume preserving.
class ReverseLayer final : public FlowLayer {
public:
    explicit ReverseLayer(Eigen::Index d) {
        for (Eigen::Index i = d; i-- > 0;) idx_.push_back(static_cast<int>(i));
    }

    nn::Var forward_tape(nn::Tape& tape, nn::Var x, const nn::Mat*, nn::Var&, bool,
                         std::vector<nn::Var>*) override {
        return tape.gather_rows(x, idx_);
    }

    nn::Mat forward_eval(const nn::Mat& x, const nn::Mat*, Eigen::RowVectorXd&) const override {
        return x.colwise().reverse();
    }

    nn::Mat inverse(const nn::Mat& z, const nn::Mat*) const override {
        return z.colwise().reverse();
    }

private:
    std::vector<int> idx_;
};

/**
 * Masked autoregressive transform. A masked two-hidden-layer network maps x
 * (plus any conditioning rows, which connect everywhere) to a location and a
 * log-scale per feature while respecting the autoregressive ordering, so the
 * density pass is one network evaluation and sampling unrolls one feature at
 * a time. Hidden connectivity is thinned by `mask_fraction`.
 */
class MadeLayer final : public FlowLayer {
public:
    MadeLayer(Eigen::Index d, Eigen::Index hidden, double mask_fraction, Eigen::Index cond_dim, Rng& rng)
        : d_(d), cond_dim_(cond_dim) {
        if (d < 1) throw validation_error("autoregressive layers need at least 1 feature");
        std::vector<int> m1 = hidden_degrees(d, hidden, mask_fraction);
        std::vector<int> m2 = hidden_degrees(d, hidden, mask_fraction);

        mask1_ = nn::Mat::Zero(hidden, d + cond_dim_);
        for (Eigen::Index k = 0; k < hidden; ++k) {
            for (Eigen::Index j = 0; j < d; ++j) {
                mask1_(k, j) = m1[static_cast<std::size_t>(k)] >= static_cast<int>(j) + 1 ? 1.0 : 0.0;
            }
            for (Eigen::Index j = d; j < d + cond_dim_; ++j) {
                mask1_(k, j) = 1.0;
            }
        }
        mask2_ = nn::Mat::Zero(hidden, hidden);
        for (Eigen::Index k2 = 0; k2 < hidden; ++k2) {
            for (Eigen::Index k1 = 0; k1 < hidden; ++k1) {
                mask2_(k2, k1) = m2[static_cast<std::size_t>(k2)] >= m1[static_cast<std::size_t>(k1)] ? 1.0 : 0.0;
            }
        }
        mask_out_ = nn::Mat::Zero(2 * d, hidden);
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index k = 0; k < hidden; ++k) {
                const double bit = m2[static_cast<std::size_t>(k)] < static_cast<int>(i) + 1 ? 1.0 : 0.0;
                mask_out_(i, k) = bit;
                mask_out_(d + i, k) = bit;
            }
        }

        w1_ = nn::he_init(hidden, d + cond_dim_, rng);
        b1_ = nn::Mat::Zero(hidden, 1);
        w2_ = nn::he_init(hidden, hidden, rng);
        b2_ = nn::Mat::Zero(hidden, 1);
        w3_ = nn::Mat::Zero(2 * d, hidden);
        b3_ = nn::Mat::Zero(2 * d, 1);
    }

    nn::Var forward_tape(nn::Tape& tape, nn::Var x, const nn::Mat* cond, nn::Var& ld, bool,
                         std::vector<nn::Var>* bound) override {
        nn::Var u = x;
        if (cond_dim_ > 0) {
            if (!cond) throw std::logic_error("conditional autoregressive layer needs labels");
            u = tape.vcat(x, tape.constant(*cond));
        }
        std::vector<nn::Var> vars;
        for (nn::Mat* p : parameters()) {
            vars.push_back(tape.param(*p));
            if (bound) bound->push_back(vars.back());
        }
        nn::Var h1 = tape.relu(tape.add_colvec(tape.matmul(tape.cmul_const(vars[0], mask1_), u), vars[1]));
        nn::Var h2 = tape.relu(tape.add_colvec(tape.matmul(tape.cmul_const(vars[2], mask2_), h1), vars[3]));
        nn::Var out = tape.add_colvec(tape.matmul(tape.cmul_const(vars[4], mask_out_), h2), vars[5]);

        std::vector<int> mu_idx, al_idx;
        for (Eigen::Index i = 0; i < d_; ++i) mu_idx.push_back(static_cast<int>(i));
        for (Eigen::Index i = d_; i < 2 * d_; ++i) al_idx.push_back(static_cast<int>(i));
        nn::Var mu = tape.gather_rows(out, mu_idx);
        nn::Var alpha = soft_clamp(tape, tape.gather_rows(out, al_idx), 5.0);

        nn::Var z = tape.cmul(tape.sub(x, mu), tape.exp_(tape.neg(alpha)));
        ld = tape.add(ld, tape.colwise_sum(tape.neg(alpha)));
        return z;
    }

    nn::Mat forward_eval(const nn::Mat& x, const nn::Mat* cond, Eigen::RowVectorXd& ld) const override {
        const auto [mu, alpha] = heads(x, cond);
        ld -= alpha.colwise().sum();
        return (x - mu).cwiseProduct((-alpha.array()).exp().matrix());
    }

    nn::Mat inverse(const nn::Mat& z, const nn::Mat* cond) const override {
        nn::Mat x = nn::Mat::Zero(d_, z.cols());
        for (Eigen::Index i = 0; i < d_; ++i) {
            const auto [mu, alpha] = heads(x, cond);
            x.row(i) = z.row(i).cwiseProduct(alpha.row(i).array().exp().matrix()) + mu.row(i);
        }
        return x;
    }

    std::vector<nn::Mat*> parameters() override { return {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}; }

    const nn::Mat& input_mask() const { return mask1_; }
    const nn::Mat& hidden_mask() const { return mask2_; }
    const nn::Mat& output_mask() const { return mask_out_; }

    /// Location and log-scale heads from a plain (untracked) masked pass.
    std::pair<nn::Mat, nn::Mat> heads(const nn::Mat& x, const nn::Mat* cond) const {
        nn::Mat u;
        if (cond_dim_ > 0) {
            if (!cond) throw std::logic_error("conditional autoregressive layer needs labels");
            u.resize(d_ + cond_dim_, x.cols());
            u.topRows(d_) = x;
            u.bottomRows(cond_dim_) = *cond;
        } else {
            u = x;
        }
        nn::Mat h1 = ((w1_.cwiseProduct(mask1_) * u).colwise() + Eigen::VectorXd(b1_.col(0))).cwiseMax(0.0);
        nn::Mat h2 = ((w2_.cwiseProduct(mask2_) * h1).colwise() + Eigen::VectorXd(b2_.col(0))).cwiseMax(0.0);
        nn::Mat out = (w3_.cwiseProduct(mask_out_) * h2).colwise() + Eigen::VectorXd(b3_.col(0));
        return {out.topRows(d_), soft_clamp(nn::Mat(out.bottomRows(d_)), 5.0)};
    }

    static std::vector<int> hidden_degrees(Eigen::Index d, Eigen::Index hidden, double mask_fraction) {
        std::vector<int> degrees(static_cast<std::size_t>(hidden));
        if (d == 1) {
            return degrees;
        }
        const int hi = static_cast<int>(d) - 1;
        int lo = static_cast<int>(std::lround(static_cast<double>(d) * (1.0 - 2.0 * mask_fraction))) + 1;
        lo = std::clamp(lo, 1, hi);
        for (Eigen::Index k = 0; k < hidden; ++k) {
            degrees[static_cast<std::size_t>(k)] = lo + static_cast<int>(k % (hi - lo + 1));
        }
        return degrees;
    }

private:
    Eigen::Index d_;
    Eigen::Index cond_dim_;
    nn::Mat mask1_, mask2_, mask_out_;
    nn::Mat w1_, b1_, w2_, b2_, w3_, b3_;
};

}

class FlowGenerator final : public Generator {
public:
    FlowGenerator(Family flavor, FlowConfig cfg, std::vector<std::string> markers,
                  std::vector<std::string> levels, std::uint64_t init_seed)
        : flavor_(flavor), cfg_(std::move(cfg)), markers_(std::move(markers)), levels_(std::move(levels)) {
        if (flavor_ != Family::realnvp && flavor_ != Family::glow && flavor_ != Family::maf) {
            throw validation_error("not a flow family");
        }
        cfg_.validate();
        if (markers_.empty()) {
            throw validation_error("model needs a non-empty marker panel");
        }
        if (cfg_.conditional && flavor_ != Family::maf) {
            throw validation_error("only the autoregressive flow supports class conditioning");
        }
        if (cfg_.conditional && levels_.size() < 2) {
            throw validation_error("a conditional model needs at least two class levels");
        }
        if (!cfg_.conditional && !levels_.empty()) {
            throw validation_error("class levels supplied for an unconditional model");
        }
        build_layers(init_seed);
    }

    Family family() const override { return flavor_; }
    int feature_count() const override { return static_cast<int>(markers_.size()); }
    bool conditional() const override { return cfg_.conditional; }
    const std::vector<std::string>& marker_ids() const override { return markers_; }
    const std::vector<std::string>& class_levels() const override { return levels_; }
    const TrainingLog& training_log() const override { return log_; }
    const FlowConfig& config() const { return cfg_; }

    const std::vector<std::unique_ptr<flow_internal::FlowLayer>>& layers() const { return layers_; }

    void train(const CountMatrix& data, const TrainingPolicy& policy, const std::string& phase) override {
        policy.validate();
        if (data.marker_ids != markers_) {
            throw validation_error("training data does not match the model's marker panel");
        }
        TrainingData td = prepare_training_data(data, cfg_.conditional);
        if (cfg_.conditional && td.levels != levels_) {
            throw validation_error("training data class levels do not match the model");
        }

        const int n = static_cast<int>(td.x.cols());
        const std::uint64_t salt = gen_json::phase_salt(phase);
        const auto [train_idx, val_idx] = split_validation(n, stable_hash(policy.seed ^ salt, 0x73706c74ULL));

        nn::Mat x_train = gather_cols(td.x, train_idx);
        nn::Mat x_val = gather_cols(td.x, val_idx);
        nn::Mat c_train, c_val;
        const nn::Mat* cond_val = nullptr;
        if (cfg_.conditional) {
            c_train = gather_cols(td.cond, train_idx);
            c_val = gather_cols(td.cond, val_idx);
            cond_val = &c_val;
        }

        const double frac = policy.resolve_batch_fraction(0.2);
        nn::Adam adam(policy.learning_rate);
        EarlyStopper stopper(policy.patience);
        const int max_epochs = policy.strategy == TrainingPolicy::Strategy::fixed
                                   ? policy.resolve_epochs(1000)
                                   : policy.max_epochs;

        auto params = parameters();
        for (int epoch = 1; epoch <= max_epochs; ++epoch) {
            const std::uint64_t epoch_seed = stable_hash(policy.seed ^ salt, static_cast<std::uint64_t>(epoch));
            const auto batches = make_batches(static_cast<int>(x_train.cols()), frac, epoch_seed);

            double sum_nll = 0.0;
            double wsum = 0.0;
            for (const auto& batch : batches) {
                nn::Mat xb = gather_batch(x_train, batch);
                nn::Mat cb;
                const nn::Mat* cond_b = nullptr;
                if (cfg_.conditional) {
                    cb = gather_batch(c_train, batch);
                    cond_b = &cb;
                }

                nn::Tape tape;
                std::vector<nn::Var> bound;
                nn::Var ld = tape.constant(nn::Mat::Zero(1, xb.cols()));
                nn::Var z = tape.constant(xb);
                for (auto& layer : layers_) {
                    z = layer->forward_tape(tape, z, cond_b, ld, true, &bound);
                }
                nn::Var base = tape.neg(tape.scale(tape.colwise_sum(tape.square(z)), 0.5));
                base = tape.add_const(base, -0.5 * static_cast<double>(markers_.size()) * flow_internal::kLogTau);
                nn::Var loss = tape.neg(tape.mean_all(tape.add(base, ld)));
                tape.backward(loss);

                std::vector<nn::Mat> grads;
                grads.reserve(bound.size());
                for (nn::Var v : bound) {
                    grads.push_back(tape.grad(v));
                }
                adam.step(params, grads);

                sum_nll += tape.value(loss)(0, 0) * static_cast<double>(xb.cols());
                wsum += static_cast<double>(xb.cols());
            }

            const double val_nll = -log_prob_internal(x_val, cond_val).mean();
            log_.add(phase, epoch, {{"nll", sum_nll / wsum}, {"val_nll", val_nll}});

            if (policy.strategy == TrainingPolicy::Strategy::early_stop && stopper.update(val_nll)) {
                break;
            }
        }
    }

    /// Per-sample log density of columns of x under the trained flow.
    Eigen::RowVectorXd log_prob(const nn::Mat& x, const std::vector<std::string>* labels = nullptr) const {
        if (x.rows() != static_cast<Eigen::Index>(markers_.size())) {
            throw validation_error("log_prob input has the wrong feature count");
        }
        nn::Mat cond;
        const nn::Mat* cond_ptr = nullptr;
        if (cfg_.conditional) {
            const auto idx = generator_internal::generation_label_indices(
                static_cast<int>(x.cols()), labels, levels_, true);
            cond = indicator_rows(idx, static_cast<int>(levels_.size()));
            cond_ptr = &cond;
        } else if (labels) {
            throw validation_error("class labels supplied to an unconditional model");
        }
        return log_prob_internal(x, cond_ptr);
    }

    CountMatrix generate(int n, std::uint64_t seed,
                         const std::vector<std::string>* labels = nullptr) const override {
        const auto idx = generator_internal::generation_label_indices(n, labels, levels_, cfg_.conditional);
        Rng rng(stable_hash(seed, 0x666c6f77ULL));
        nn::Mat z(static_cast<Eigen::Index>(markers_.size()), n);
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            for (Eigen::Index i = 0; i < z.rows(); ++i) {
                z(i, j) = rng.normal();
            }
        }
        nn::Mat cond;
        const nn::Mat* cond_ptr = nullptr;
        if (cfg_.conditional) {
            cond = indicator_rows(idx, static_cast<int>(levels_.size()));
            cond_ptr = &cond;
        }
        nn::Mat x = z;
        for (std::size_t l = layers_.size(); l-- > 0;) {
            x = layers_[l]->inverse(x, cond_ptr);
        }
        return generator_internal::finish_generated(x, markers_, cfg_.conditional ? labels : nullptr);
    }

    std::vector<nn::Mat*> parameters() {
        std::vector<nn::Mat*> out;
        for (auto& layer : layers_) {
            for (nn::Mat* p : layer->parameters()) {
                out.push_back(p);
            }
        }
        return out;
    }

    nlohmann::json to_json() const {
        using nlohmann::json;
        json j;
        j["family"] = to_string(flavor_);
        j["config"] = {{"blocks", cfg_.blocks},
                       {"hidden", cfg_.hidden},
                       {"validation_ratio", cfg_.validation_ratio},
                       {"mask_fraction", cfg_.mask_fraction},
                       {"conditional", cfg_.conditional}};
        j["markers"] = markers_;
        j["levels"] = levels_;
        json weights = json::array();
        for (const auto& layer : layers_) {
            auto self = const_cast<flow_internal::FlowLayer*>(layer.get());
            for (nn::Mat* p : self->parameters()) {
                weights.push_back(gen_json::mat_to_json(*p));
            }
        }
        j["weights"] = std::move(weights);
        json state = json::array();
        for (const auto& layer : layers_) {
            state.push_back(layer->state_json());
        }
        j["layer_state"] = std::move(state);
        j["training_log"] = gen_json::log_to_json(log_);
        return j;
    }

    static std::unique_ptr<FlowGenerator> from_json(const nlohmann::json& j) {
        FlowConfig cfg;
        const auto& jc = j.at("config");
        cfg.blocks = jc.at("blocks").get<int>();
        cfg.hidden = jc.at("hidden").get<Eigen::Index>();
        cfg.validation_ratio = jc.at("validation_ratio").get<double>();
        cfg.mask_fraction = jc.at("mask_fraction").get<double>();
        cfg.conditional = jc.at("conditional").get<bool>();
        auto model = std::make_unique<FlowGenerator>(
            family_from_string(j.at("family").get<std::string>()), cfg,
            j.at("markers").get<std::vector<std::string>>(),
            j.at("levels").get<std::vector<std::string>>(), 0);

        const auto& weights = j.at("weights");
        auto params = model->parameters();
        if (weights.size() != params.size()) {
            throw serialize_error("model file: unexpected weight count");
        }
        std::size_t k = 0;
        for (nn::Mat* p : params) {
            nn::Mat w = gen_json::mat_from_json(weights.at(k++));
            if (w.rows() != p->rows() || w.cols() != p->cols()) {
                throw serialize_error("model file: weight shape mismatch");
            }
            *p = std::move(w);
        }
        const auto& state = j.at("layer_state");
        if (state.size() != model->layers_.size()) {
            throw serialize_error("model file: unexpected layer count");
        }
        for (std::size_t l = 0; l < model->layers_.size(); ++l) {
            model->layers_[l]->load_state(state.at(l));
        }
        model->log_ = gen_json::log_from_json(j.at("training_log"));
        return model;
    }

private:
    void build_layers(std::uint64_t init_seed) {
        using namespace flow_internal;
        const Eigen::Index d = static_cast<Eigen::Index>(markers_.size());
        const Eigen::Index cond_dim = cfg_.conditional ? static_cast<Eigen::Index>(levels_.size()) - 1 : 0;
        Rng rng(stable_hash(init_seed, 0x666c6977ULL));

        if (flavor_ == Family::realnvp) {
            if (d < 2) throw validation_error("coupling flows need at least 2 markers");
            for (int t = 0; t < cfg_.blocks; ++t) {
                layers_.push_back(std::make_unique<CouplingLayer>(d, cfg_.hidden, t % 2, rng));
                if (t + 1 < cfg_.blocks) {
                    layers_.push_back(std::make_unique<BatchNormLayer>(d));
                }
            }
        } else if (flavor_ == Family::glow) {
            if (d < 2) throw validation_error("coupling flows need at least 2 markers");
            for (int t = 0; t < cfg_.blocks; ++t) {
                layers_.push_back(std::make_unique<ActNormLayer>(d));
                layers_.push_back(std::make_unique<InvLinearLayer>(d, rng));
                layers_.push_back(std::make_unique<CouplingLayer>(d, cfg_.hidden, 0, rng));
            }
        } else {
            for (int t = 0; t < cfg_.blocks; ++t) {
                layers_.push_back(std::make_unique<MadeLayer>(d, cfg_.hidden, cfg_.mask_fraction, cond_dim, rng));
                if (t + 1 < cfg_.blocks) {
                    layers_.push_back(std::make_unique<ReverseLayer>(d));
                    layers_.push_back(std::make_unique<BatchNormLayer>(d));
                }
            }
        }
    }

    std::pair<std::vector<int>, std::vector<int>> split_validation(int n, std::uint64_t seed) const {
        int n_val = static_cast<int>(std::llround(cfg_.validation_ratio * n));
        n_val = std::max(n_val, 2);
        if (n - n_val < 2) {
            throw validation_error("too few samples for a train/validation split");
        }
        Rng rng(seed);
        const auto perm = rng.permutation(static_cast<std::size_t>(n));
        std::vector<int> val(perm.begin(), perm.begin() + n_val);
        std::vector<int> train(perm.begin() + n_val, perm.end());
        std::sort(val.begin(), val.end());
        std::sort(train.begin(), train.end());
        return {train, val};
    }

    static nn::Mat gather_cols(const nn::Mat& m, const std::vector<int>& idx) {
        nn::Mat out(m.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            out.col(static_cast<Eigen::Index>(k)) = m.col(idx[k]);
        }
        return out;
    }

    static nn::Mat gather_batch(const nn::Mat& m, const std::vector<int>& batch) {
        return gather_cols(m, batch);
    }

    Eigen::RowVectorXd log_prob_internal(const nn::Mat& x, const nn::Mat* cond) const {
        Eigen::RowVectorXd ld = Eigen::RowVectorXd::Zero(x.cols());
        nn::Mat z = x;
        for (const auto& layer : layers_) {
            z = layer->forward_eval(z, cond, ld);
        }
        const Eigen::RowVectorXd base =
            (-0.5 * z.array().square().colwise().sum() -
             0.5 * static_cast<double>(z.rows()) * flow_internal::kLogTau)
                .matrix();
        return base + ld;
    }

    Family flavor_;
    FlowConfig cfg_;
    std::vector<std::string> markers_;
    std::vector<std::string> levels_;
    std::vector<std::unique_ptr<flow_internal::FlowLayer>> layers_;
    TrainingLog log_;
};

}

#endif

#ifndef SYNGEN_GEN_GAN_HPP
#define SYNGEN_GEN_GAN_HPP

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "../nn/adam.hpp"
#include "../nn/mlp.hpp"
#include "../nn/tape.hpp"
#include "generator.hpp"
#include "json_util.hpp"
#include "policy.hpp"

/**
 * @file gan.hpp
 * @brief Adversarial generators: the classic cross-entropy game, weight
 * clipping, and the gradient-penalty variant.
 *
 * One generator update follows every `n_critic` critic updates; the counter
 * carries across epochs so the ratio is exact over a whole run.
 */

namespace syngen {

struct GanConfig {
    Eigen::Index noise_dim = 32;
    std::vector<Eigen::Index> gen_hidden = {128, 256};
    std::vector<Eigen::Index> critic_hidden = {256, 128};

    /// Critic updates per generator update; 1 for the classic game.
    int n_critic = 5;

    /// Weight clamp bound for the clipped variant.
    double clip = 0.01;

    /// Penalty coefficient for the gradient-penalty variant.
    double lambda_gp = 10.0;

    /// When set, every clipped critic update is verified in-loop.
    bool assert_clip = false;

    void validate() const {
        if (noise_dim <= 0) throw validation_error("noise dimension must be positive");
        if (n_critic <= 0) throw validation_error("n_critic must be positive");
        if (!(clip > 0.0)) throw validation_error("clip bound must be positive");
        if (!(lambda_gp >= 0.0)) throw validation_error("penalty weight must be non-negative");
    }
};

struct GanLosses {
    double loss_d = 0.0;
    double loss_g = 0.0;
};

/**
 * @brief Loss values of the adversarial game from critic outputs.
 *
 * For the classic variant the inputs are probabilities in (0, 1) and the
 * losses use natural logs, with the non-saturating generator objective. For
 * the clipped and gradient-penalty variants the inputs are unbounded scores:
 * the critic maximizes its real/fake separation and the generator maximizes
 * the fake score.
 */
inline GanLosses gan_losses(const Eigen::VectorXd& d_real, const Eigen::VectorXd& d_fake,
                            Family variant) {
    if (d_real.size() == 0 || d_fake.size() == 0) {
        throw validation_error("gan_losses needs non-empty score vectors");
    }
    GanLosses out;
    if (variant == Family::gan) {
        auto check = [](const Eigen::VectorXd& v) {
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                if (!(v[i] > 0.0 && v[i] < 1.0)) {
                    throw validation_error("classic adversarial losses need probabilities in (0, 1)");
                }
            }
        };
        check(d_real);
        check(d_fake);
        out.loss_d = -d_real.array().log().mean() - (1.0 - d_fake.array()).log().mean();
        out.loss_g = -d_fake.array().log().mean();
    } else if (variant == Family::wgan || variant == Family::wgangp) {
        out.loss_d = d_fake.mean() - d_real.mean();
        out.loss_g = -d_fake.mean();
    } else {
        throw validation_error("gan_losses applies to adversarial variants only");
    }
    return out;
}

/**
 * @brief Analytic gradient of a rectifier critic's output with respect to its
 * input, one column per evaluation point.
 *
 * The critic must end in a single linear output. Rectifier masks are taken at
 * the evaluated points, which gives the exact gradient everywhere off the
 * (measure-zero) kink set.
 */
inline nn::Mat critic_input_gradient(const nn::Mlp& critic, const nn::Mat& x) {
    const std::size_t depth = critic.layers.size();
    std::vector<nn::Mat> masks;
    masks.reserve(depth - 1);
    nn::Mat h = x;
    for (std::size_t l = 0; l + 1 < depth; ++l) {
        nn::Mat a = (critic.layers[l].W * h).colwise() + Eigen::VectorXd(critic.layers[l].b.col(0));
        masks.push_back((a.array() > 0.0).cast<double>());
        h = a.cwiseMax(0.0);
    }
    nn::Mat delta = nn::Mat::Ones(1, x.cols());
    for (std::size_t l = depth; l-- > 0;) {
        nn::Mat up = critic.layers[l].W.transpose() * delta;
        if (l > 0) {
            delta = up.cwiseProduct(masks[l - 1]);
        } else {
            delta = up;
        }
    }
    return delta;
}

namespace gan_internal {

/// Blend real and fake points with one uniform weight per sample.
inline nn::Mat interpolate(const nn::Mat& x_real, const nn::Mat& x_fake, Rng& rng) {
    nn::Mat out(x_real.rows(), x_real.cols());
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double e = rng.uniform();
        out.col(j) = e * x_real.col(j) + (1.0 - e) * x_fake.col(j);
    }
    return out;
}

}

/**
 * @brief Taped penalty term `lambda * mean((|grad D(x_hat)| - 1)^2)` built on
 * the critic's parameter handles, so backpropagation reaches the weights
 * through the input-gradient itself.
 *
 * `critic_vars` must hold one handle per critic parameter in W, b layer
 * order. Rectifier masks are taken at `x_hat` and held fixed, which matches
 * the exact derivative wherever no pre-activation sits on a kink.
 */
inline nn::Var taped_gradient_penalty(nn::Tape& tape, const nn::Mlp& critic,
                                      const std::vector<nn::Var>& critic_vars, const nn::Mat& x_hat,
                                      double lambda_gp) {
    if (critic_vars.size() != 2 * critic.layers.size()) {
        throw std::logic_error("taped_gradient_penalty: wrong number of parameter handles");
    }
    const std::size_t depth = critic.layers.size();
    std::vector<nn::Mat> masks;
    masks.reserve(depth - 1);
    nn::Mat h = x_hat;
    for (std::size_t l = 0; l + 1 < depth; ++l) {
        nn::Mat a = (critic.layers[l].W * h).colwise() + Eigen::VectorXd(critic.layers[l].b.col(0));
        masks.push_back((a.array() > 0.0).cast<double>());
        h = a.cwiseMax(0.0);
    }
    nn::Var delta = tape.constant(nn::Mat::Ones(1, x_hat.cols()));
    for (std::size_t l = depth; l-- > 0;) {
        nn::Var up = tape.matmul_t_left(critic_vars[2 * l], delta);
        delta = l > 0 ? tape.cmul_const(up, masks[l - 1]) : up;
    }
    nn::Var norm = tape.sqrt_(tape.add_const(tape.colwise_sum(tape.square(delta)), 1e-24));
    return tape.scale(tape.mean_all(tape.square(tape.add_const(norm, -1.0))), lambda_gp);
}

/**
 * @brief Gradient penalty `lambda * mean((|grad D(x_interp)| - 1)^2)` at
 * per-sample uniform interpolates of real and fake batches.
 */
inline double gradient_penalty(const nn::Mlp& critic, const nn::Mat& x_real, const nn::Mat& x_fake,
                               double lambda_gp, std::uint64_t seed) {
    if (x_real.rows() != x_fake.rows() || x_real.cols() != x_fake.cols()) {
        throw validation_error("gradient penalty needs matching real and fake batch shapes");
    }
    Rng rng(stable_hash(seed, 0x677064ULL));
    const nn::Mat x_hat = gan_internal::interpolate(x_real, x_fake, rng);
    const nn::Mat g = critic_input_gradient(critic, x_hat);
    const Eigen::ArrayXd norms = g.array().square().colwise().sum().sqrt();
    return lambda_gp * (norms - 1.0).square().mean();
}

class GanGenerator final : public Generator {
public:
    GanGenerator(Family variant, GanConfig cfg, std::vector<std::string> markers, std::uint64_t init_seed)
        : variant_(variant), cfg_(std::move(cfg)), markers_(std::move(markers)) {
        if (variant_ != Family::gan && variant_ != Family::wgan && variant_ != Family::wgangp) {
            throw validation_error("not an adversarial family");
        }
        cfg_.validate();
        if (markers_.empty()) {
            throw validation_error("model needs a non-empty marker panel");
        }
        if (variant_ == Family::gan) {
            cfg_.n_critic = 1;
        }
        const Eigen::Index d = static_cast<Eigen::Index>(markers_.size());
        Rng rng(stable_hash(init_seed, 0x67616eULL));
        gen_ = nn::Mlp(cfg_.noise_dim, cfg_.gen_hidden, d, rng);
        critic_ = nn::Mlp(d, cfg_.critic_hidden, 1, rng);
    }

    Family family() const override { return variant_; }
    int feature_count() const override { return static_cast<int>(markers_.size()); }
    bool conditional() const override { return false; }
    const std::vector<std::string>& marker_ids() const override { return markers_; }
    const std::vector<std::string>& class_levels() const override { return no_levels_; }
    const TrainingLog& training_log() const override { return log_; }
    const GanConfig& config() const { return cfg_; }
    const nn::Mlp& critic() const { return critic_; }

    long critic_steps() const { return critic_steps_; }
    long generator_steps() const { return generator_steps_; }

    void train(const CountMatrix& data, const TrainingPolicy& policy, const std::string& phase) override {
        policy.validate();
        if (data.marker_ids != markers_) {
            throw validation_error("training data does not match the model's marker panel");
        }
        TrainingData td = prepare_training_data(data, false);
        const int n = static_cast<int>(td.x.cols());
        const double frac = policy.resolve_batch_fraction(0.1);
        const std::uint64_t salt = gen_json::phase_salt(phase);

        nn::Adam adam_g(policy.learning_rate);
        nn::Adam adam_d(policy.learning_rate);
        EarlyStopper stopper(policy.patience);
        const int max_epochs = policy.strategy == TrainingPolicy::Strategy::fixed
                                   ? policy.resolve_epochs(1000)
                                   : policy.max_epochs;

        for (int epoch = 1; epoch <= max_epochs; ++epoch) {
            const std::uint64_t epoch_seed = stable_hash(policy.seed ^ salt, static_cast<std::uint64_t>(epoch));
            const auto batches = make_batches(n, frac, epoch_seed);
            Rng noise_rng(stable_hash(epoch_seed, 0x6e6f69ULL));

            double sum_d = 0.0, wsum_d = 0.0;
            double sum_g = 0.0;
            long gen_steps_this_epoch = 0;
            double sum_west = 0.0;

            for (const auto& batch : batches) {
                const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
                nn::Mat xb(td.x.rows(), b);
                for (Eigen::Index k = 0; k < b; ++k) {
                    xb.col(k) = td.x.col(batch[static_cast<std::size_t>(k)]);
                }

                const auto dstep = critic_step(xb, noise_rng, adam_d);
                ++critic_steps_;
                sum_d += dstep.loss * static_cast<double>(b);
                wsum_d += static_cast<double>(b);
                sum_west += std::fabs(dstep.w_estimate);

                if (critic_steps_ % cfg_.n_critic == 0) {
                    sum_g += generator_step(b, noise_rng, adam_g);
                    ++generator_steps_;
                    ++gen_steps_this_epoch;
                }
            }

            std::vector<std::pair<std::string, double>> row;
            row.emplace_back("loss_d", sum_d / wsum_d);
            if (gen_steps_this_epoch > 0) {
                row.emplace_back("loss_g", sum_g / static_cast<double>(gen_steps_this_epoch));
            }
            double monitored;
            if (variant_ == Family::gan) {
                monitored = gen_steps_this_epoch > 0 ? sum_g / static_cast<double>(gen_steps_this_epoch)
                                                     : std::numeric_limits<double>::infinity();
            } else {
                // The critic's real/fake separation estimates the transport
                // distance; shrinking toward zero is improvement.
                monitored = sum_west / static_cast<double>(batches.size());
                row.emplace_back("w_abs", monitored);
            }
            log_.add(phase, epoch, std::move(row));

            if (policy.strategy == TrainingPolicy::Strategy::early_stop && stopper.update(monitored)) {
                break;
            }
        }
    }

    CountMatrix generate(int n, std::uint64_t seed,
                         const std::vector<std::string>* labels = nullptr) const override {
        generator_internal::generation_label_indices(n, labels, no_levels_, false);
        Rng rng(stable_hash(seed, 0x67676e32ULL));
        nn::Mat z(cfg_.noise_dim, n);
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            for (Eigen::Index i = 0; i < z.rows(); ++i) {
                z(i, j) = rng.normal();
            }
        }
        return generator_internal::finish_generated(gen_.forward(z), markers_, nullptr);
    }

    nlohmann::json to_json() const {
        using nlohmann::json;
        json j;
        j["family"] = to_string(variant_);
        j["config"] = {{"noise_dim", cfg_.noise_dim},
                       {"gen_hidden", cfg_.gen_hidden},
                       {"critic_hidden", cfg_.critic_hidden},
                       {"n_critic", cfg_.n_critic},
                       {"clip", cfg_.clip},
                       {"lambda_gp", cfg_.lambda_gp}};
        j["markers"] = markers_;
        json weights = json::array();
        for (const auto& mlp : {&gen_, &critic_}) {
            for (const auto& l : mlp->layers) {
                weights.push_back(gen_json::mat_to_json(l.W));
                weights.push_back(gen_json::mat_to_json(l.b));
            }
        }
        j["weights"] = std::move(weights);
        j["training_log"] = gen_json::log_to_json(log_);
        return j;
    }

    static std::unique_ptr<GanGenerator> from_json(const nlohmann::json& j) {
        GanConfig cfg;
        const auto& jc = j.at("config");
        cfg.noise_dim = jc.at("noise_dim").get<Eigen::Index>();
        cfg.gen_hidden = jc.at("gen_hidden").get<std::vector<Eigen::Index>>();
        cfg.critic_hidden = jc.at("critic_hidden").get<std::vector<Eigen::Index>>();
        cfg.n_critic = jc.at("n_critic").get<int>();
        cfg.clip = jc.at("clip").get<double>();
        cfg.lambda_gp = jc.at("lambda_gp").get<double>();
        const Family fam = family_from_string(j.at("family").get<std::string>());
        auto model = std::make_unique<GanGenerator>(fam, cfg, j.at("markers").get<std::vector<std::string>>(), 0);
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
        model->log_ = gen_json::log_from_json(j.at("training_log"));
        return model;
    }

    std::vector<nn::Mat*> parameters() {
        std::vector<nn::Mat*> out = gen_.parameters();
        for (nn::Mat* p : critic_.parameters()) {
            out.push_back(p);
        }
        return out;
    }

private:
    struct CriticStep {
        double loss = 0.0;
        double w_estimate = 0.0;
    };

    nn::Mat draw_noise(Eigen::Index b, Rng& rng) const {
        nn::Mat z(cfg_.noise_dim, b);
        for (Eigen::Index j = 0; j < b; ++j) {
            for (Eigen::Index i = 0; i < z.rows(); ++i) {
                z(i, j) = rng.normal();
            }
        }
        return z;
    }

    /// Taped critic forward using pre-bound parameter handles.
    nn::Var critic_apply(nn::Tape& tape, const std::vector<nn::Var>& cvars, nn::Var x) const {
        nn::Var h = x;
        for (std::size_t l = 0; l < critic_.layers.size(); ++l) {
            h = tape.add_colvec(tape.matmul(cvars[2 * l], h), cvars[2 * l + 1]);
            if (l + 1 < critic_.layers.size()) {
                h = tape.relu(h);
            }
        }
        return h;
    }

    CriticStep critic_step(const nn::Mat& x_real, Rng& rng, nn::Adam& adam) {
        const Eigen::Index b = x_real.cols();
        const nn::Mat x_fake = gen_.forward(draw_noise(b, rng));

        nn::Tape tape;
        std::vector<nn::Var> cvars;
        cvars.reserve(critic_.layers.size() * 2);
        for (auto& l : critic_.layers) {
            cvars.push_back(tape.param(l.W));
            cvars.push_back(tape.param(l.b));
        }
        nn::Var out_real = critic_apply(tape, cvars, tape.constant(x_real));
        nn::Var out_fake = critic_apply(tape, cvars, tape.constant(x_fake));

        nn::Var loss{};
        double w_estimate = 0.0;
        if (variant_ == Family::gan) {
            nn::Var lr = tape.mean_all(tape.softplus(tape.neg(out_real)));
            nn::Var lf = tape.mean_all(tape.softplus(out_fake));
            loss = tape.add(lr, lf);
        } else {
            nn::Var sep = tape.sub(tape.mean_all(out_fake), tape.mean_all(out_real));
            w_estimate = -tape.value(sep)(0, 0);
            loss = sep;
            if (variant_ == Family::wgangp) {
                const nn::Mat x_hat = gan_internal::interpolate(x_real, x_fake, rng);
                loss = tape.add(loss, taped_gradient_penalty(tape, critic_, cvars, x_hat, cfg_.lambda_gp));
            }
        }
        tape.backward(loss);

        std::vector<nn::Mat> grads;
        grads.reserve(cvars.size());
        for (nn::Var v : cvars) {
            grads.push_back(tape.grad(v));
        }
        adam.step(critic_.parameters(), grads);

        if (variant_ == Family::wgan) {
            for (nn::Mat* p : critic_.parameters()) {
                *p = p->cwiseMax(-cfg_.clip).cwiseMin(cfg_.clip);
            }
            if (cfg_.assert_clip) {
                for (nn::Mat* p : critic_.parameters()) {
                    if (p->cwiseAbs().maxCoeff() > cfg_.clip) {
                        throw std::logic_error("clip invariant violated after critic update");
                    }
                }
            }
        }
        return CriticStep{tape.value(loss)(0, 0), w_estimate};
    }

    double generator_step(Eigen::Index b, Rng& rng, nn::Adam& adam) {
        const nn::Mat z = draw_noise(b, rng);

        nn::Tape tape;
        std::vector<nn::Var> gvars;
        nn::Var x_fake = gen_.apply(tape, tape.constant(z), &gvars);

        std::vector<nn::Var> cvars;
        cvars.reserve(critic_.layers.size() * 2);
        for (auto& l : critic_.layers) {
            cvars.push_back(tape.constant(l.W));
            cvars.push_back(tape.constant(l.b));
        }
        nn::Var out_fake = critic_apply(tape, cvars, x_fake);

        nn::Var loss = variant_ == Family::gan
                           ? tape.mean_all(tape.softplus(tape.neg(out_fake)))
                           : tape.neg(tape.mean_all(out_fake));
        tape.backward(loss);

        std::vector<nn::Mat> grads;
        grads.reserve(gvars.size());
        for (nn::Var v : gvars) {
            grads.push_back(tape.grad(v));
        }
        adam.step(gen_.parameters(), grads);
        return tape.value(loss)(0, 0);
    }

    Family variant_;
    GanConfig cfg_;
    std::vector<std::string> markers_;
    std::vector<std::string> no_levels_;
    nn::Mlp gen_;
    nn::Mlp critic_;
    TrainingLog log_;
    long critic_steps_ = 0;
    long generator_steps_ = 0;
};

}

#endif

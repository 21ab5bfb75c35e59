#ifndef SYNGEN_GEN_VAE_HPP
#define SYNGEN_GEN_VAE_HPP

#include <cmath>
#include <deque>
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
 * @file vae.hpp
 * @brief Variational autoencoder, optionally class-conditional.
 *
 * The encoder maps an expression vector (plus the class indicator for the
 * conditional variant) through rectified hidden layers to a Gaussian
 * posterior over the latent space; the decoder mirrors it back. Training
 * maximizes the usual evidence bound with configurable weights on the
 * reconstruction and divergence terms, drawing one latent sample per
 * datapoint per step.
 */

namespace syngen {

struct VaeConfig {
    /// Encoder hidden widths; the decoder mirrors them in reverse.
    std::vector<Eigen::Index> hidden = {256, 128, 64};

    Eigen::Index latent = 32;

    /// Weights of the reconstruction and divergence terms.
    double w_rec = 1.0;
    double w_kl = 1.0;

    bool conditional = false;

    void validate() const {
        if (hidden.empty()) {
            throw validation_error("encoder needs at least one hidden layer");
        }
        for (Eigen::Index h : hidden) {
            if (h <= 0) throw validation_error("hidden widths must be positive");
        }
        if (latent <= 0) {
            throw validation_error("latent dimension must be positive");
        }
        if (!(w_rec > 0.0) || !(w_kl > 0.0)) {
            throw validation_error("loss weights must be positive");
        }
    }
};

/**
 * @brief Divergence of a diagonal Gaussian q = N(mu, exp(log_var)) from the
 * standard normal, summed over dimensions.
 */
inline double kl_gaussian(const Eigen::VectorXd& mu, const Eigen::VectorXd& log_var) {
    if (mu.size() != log_var.size()) {
        throw validation_error("kl_gaussian: mu and log_var disagree in length");
    }
    return 0.5 * (log_var.array().exp() - 1.0 - log_var.array() + mu.array().square()).sum();
}

/// z = mu + exp(log_var / 2) * eps, elementwise over a batch.
inline nn::Mat reparameterize(const nn::Mat& mu, const nn::Mat& log_var, const nn::Mat& eps) {
    return mu.array() + (log_var.array() * 0.5).exp() * eps.array();
}

struct VaeLossParts {
    double recon = 0.0;  ///< sum of squared errors over features, mean over batch
    double kl = 0.0;     ///< divergence per sample, mean over batch
    double total = 0.0;  ///< w_rec * recon + w_kl * kl
};

/// Assemble the loss from a reconstruction and the posterior parameters.
inline VaeLossParts vae_loss(const nn::Mat& x, const nn::Mat& xhat, const nn::Mat& mu,
                             const nn::Mat& log_var, double w_rec, double w_kl) {
    VaeLossParts parts;
    const double b = static_cast<double>(x.cols());
    parts.recon = (x - xhat).array().square().colwise().sum().sum() / b;
    parts.kl = 0.5 * (log_var.array().exp() - 1.0 - log_var.array() + mu.array().square())
                         .colwise().sum().sum() / b;
    parts.total = w_rec * parts.recon + w_kl * parts.kl;
    return parts;
}

namespace vae_internal {

inline nn::Mat vstack(const nn::Mat& a, const nn::Mat& b) {
    if (b.rows() == 0) {
        return a;
    }
    nn::Mat out(a.rows() + b.rows(), a.cols());
    out.topRows(a.rows()) = a;
    out.bottomRows(b.rows()) = b;
    return out;
}

}

class VaeGenerator final : public Generator {
public:
    /**
     * @brief Build an untrained model for a marker panel.
     *
     * @param levels Sorted class levels; required non-empty iff conditional.
     */
    VaeGenerator(VaeConfig cfg, std::vector<std::string> markers, std::vector<std::string> levels,
                 std::uint64_t init_seed)
        : cfg_(std::move(cfg)), markers_(std::move(markers)), levels_(std::move(levels)) {
        cfg_.validate();
        if (markers_.empty()) {
            throw validation_error("model needs a non-empty marker panel");
        }
        if (cfg_.conditional == levels_.empty()) {
            throw validation_error(cfg_.conditional ? "conditional model needs class levels"
                                                    : "unconditional model cannot take class levels");
        }
        const Eigen::Index d = static_cast<Eigen::Index>(markers_.size());
        const Eigen::Index c = cond_rows();
        Rng rng(stable_hash(init_seed, 0x766165ULL));
        std::vector<Eigen::Index> trunk_hidden(cfg_.hidden.begin(), cfg_.hidden.end() - 1);
        trunk_ = nn::Mlp(d + c, trunk_hidden, cfg_.hidden.back(), rng);
        mu_head_ = nn::Linear(cfg_.latent, cfg_.hidden.back(), rng);
        lv_head_ = nn::Linear(cfg_.latent, cfg_.hidden.back(), rng);
        std::vector<Eigen::Index> dec_hidden(cfg_.hidden.rbegin(), cfg_.hidden.rend());
        decoder_ = nn::Mlp(cfg_.latent + c, dec_hidden, d, rng);
    }

    Family family() const override { return cfg_.conditional ? Family::cvae : Family::vae; }
    int feature_count() const override { return static_cast<int>(markers_.size()); }
    bool conditional() const override { return cfg_.conditional; }
    const std::vector<std::string>& marker_ids() const override { return markers_; }
    const std::vector<std::string>& class_levels() const override { return levels_; }
    const TrainingLog& training_log() const override { return log_; }
    const VaeConfig& config() const { return cfg_; }

    void train(const CountMatrix& data, const TrainingPolicy& policy, const std::string& phase) override {
        policy.validate();
        if (data.marker_ids != markers_) {
            throw validation_error("training data does not match the model's marker panel");
        }
        TrainingData td = prepare_training_data(data, cfg_.conditional);
        if (cfg_.conditional && td.levels != levels_) {
            throw validation_error("training data group levels do not match the model");
        }
        const int n = static_cast<int>(td.x.cols());
        const double frac = policy.resolve_batch_fraction(0.1);
        const std::uint64_t salt = gen_json::phase_salt(phase);

        nn::Adam adam(policy.learning_rate);
        EarlyStopper stopper(policy.patience);
        const int max_epochs = policy.strategy == TrainingPolicy::Strategy::fixed
                                   ? policy.resolve_epochs(1000)
                                   : policy.max_epochs;

        // Minibatch resampling and fresh reparameterization noise make the
        // per-epoch loss jitter by more than its late-training slope, so the
        // stopper watches a trailing mean rather than single-epoch values.
        constexpr int kStopWindow = 10;
        std::deque<double> recent;
        double recent_sum = 0.0;

        for (int epoch = 1; epoch <= max_epochs; ++epoch) {
            const std::uint64_t epoch_seed = stable_hash(policy.seed ^ salt, static_cast<std::uint64_t>(epoch));
            const auto batches = make_batches(n, frac, epoch_seed);
            Rng eps_rng(stable_hash(epoch_seed, 0x657073ULL));

            double sum_total = 0.0, sum_recon = 0.0, sum_kl = 0.0;
            for (const auto& batch : batches) {
                const auto parts = step(td, batch, eps_rng, adam);
                const double w = static_cast<double>(batch.size());
                sum_total += parts.total * w;
                sum_recon += parts.recon * w;
                sum_kl += parts.kl * w;
            }
            const double inv_n = 1.0 / static_cast<double>(n);
            log_.add(phase, epoch,
                     {{"total", sum_total * inv_n},
                      {"recon", sum_recon * inv_n},
                      {"kl", sum_kl * inv_n}});
            if (policy.strategy == TrainingPolicy::Strategy::early_stop) {
                recent.push_back(sum_total * inv_n);
                recent_sum += recent.back();
                if (recent.size() > kStopWindow) {
                    recent_sum -= recent.front();
                    recent.pop_front();
                }
                if (stopper.update(recent_sum / static_cast<double>(recent.size()))) {
                    break;
                }
            }
        }
    }

    CountMatrix generate(int n, std::uint64_t seed,
                         const std::vector<std::string>* labels = nullptr) const override {
        const auto idx = generator_internal::generation_label_indices(n, labels, levels_, cfg_.conditional);
        Rng rng(stable_hash(seed, 0x76676e32ULL));
        nn::Mat z(cfg_.latent, n);
        for (Eigen::Index j = 0; j < z.cols(); ++j) {
            for (Eigen::Index i = 0; i < z.rows(); ++i) {
                z(i, j) = rng.normal();
            }
        }
        nn::Mat dec_in = z;
        if (cfg_.conditional) {
            dec_in = vae_internal::vstack(z, indicator_rows(idx, static_cast<int>(levels_.size())));
        }
        nn::Mat xhat = decoder_.forward(dec_in);
        return generator_internal::finish_generated(std::move(xhat), markers_, labels);
    }

    /// Loss and analytic parameter gradients for one batch, without updating
    /// the weights. Exposed for numerical verification.
    VaeLossParts loss_and_gradients(const TrainingData& td, const std::vector<int>& batch,
                                    const nn::Mat& eps, std::vector<nn::Mat>* grads = nullptr) {
        nn::Tape tape;
        std::vector<nn::Var> bound;
        const auto loss = build_graph(tape, td, batch, eps, &bound);
        tape.backward(loss.total_var);
        if (grads) {
            grads->clear();
            grads->reserve(bound.size());
            for (nn::Var v : bound) {
                grads->push_back(tape.grad(v));
            }
        }
        return loss.parts;
    }

    std::vector<nn::Mat*> parameters() {
        std::vector<nn::Mat*> out = trunk_.parameters();
        out.push_back(&mu_head_.W);
        out.push_back(&mu_head_.b);
        out.push_back(&lv_head_.W);
        out.push_back(&lv_head_.b);
        for (nn::Mat* p : decoder_.parameters()) {
            out.push_back(p);
        }
        return out;
    }

    nlohmann::json to_json() const {
        using nlohmann::json;
        json j;
        j["family"] = to_string(family());
        j["config"] = {{"hidden", cfg_.hidden},
                       {"latent", cfg_.latent},
                       {"w_rec", cfg_.w_rec},
                       {"w_kl", cfg_.w_kl},
                       {"conditional", cfg_.conditional}};
        j["markers"] = markers_;
        j["levels"] = levels_;
        json weights = json::array();
        for (const auto& l : trunk_.layers) {
            weights.push_back(gen_json::mat_to_json(l.W));
            weights.push_back(gen_json::mat_to_json(l.b));
        }
        weights.push_back(gen_json::mat_to_json(mu_head_.W));
        weights.push_back(gen_json::mat_to_json(mu_head_.b));
        weights.push_back(gen_json::mat_to_json(lv_head_.W));
        weights.push_back(gen_json::mat_to_json(lv_head_.b));
        for (const auto& l : decoder_.layers) {
            weights.push_back(gen_json::mat_to_json(l.W));
            weights.push_back(gen_json::mat_to_json(l.b));
        }
        j["weights"] = std::move(weights);
        j["training_log"] = gen_json::log_to_json(log_);
        return j;
    }

    static std::unique_ptr<VaeGenerator> from_json(const nlohmann::json& j) {
        VaeConfig cfg;
        const auto& jc = j.at("config");
        cfg.hidden = jc.at("hidden").get<std::vector<Eigen::Index>>();
        cfg.latent = jc.at("latent").get<Eigen::Index>();
        cfg.w_rec = jc.at("w_rec").get<double>();
        cfg.w_kl = jc.at("w_kl").get<double>();
        cfg.conditional = jc.at("conditional").get<bool>();
        auto model = std::make_unique<VaeGenerator>(cfg, j.at("markers").get<std::vector<std::string>>(),
                                                    j.at("levels").get<std::vector<std::string>>(), 0);
        const auto& weights = j.at("weights");
        std::size_t k = 0;
        auto params = model->parameters();
        if (weights.size() != params.size()) {
            throw serialize_error("model file: unexpected weight count");
        }
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

private:
    struct GraphResult {
        nn::Var total_var;
        VaeLossParts parts;
    };

    Eigen::Index cond_rows() const {
        return cfg_.conditional ? static_cast<Eigen::Index>(levels_.size()) - 1 : 0;
    }

    GraphResult build_graph(nn::Tape& tape, const TrainingData& td, const std::vector<int>& batch,
                            const nn::Mat& eps, std::vector<nn::Var>* bound) {
        const Eigen::Index b = static_cast<Eigen::Index>(batch.size());
        nn::Mat xb(td.x.rows(), b);
        nn::Mat cb(cond_rows(), b);
        for (Eigen::Index k = 0; k < b; ++k) {
            xb.col(k) = td.x.col(batch[static_cast<std::size_t>(k)]);
            if (cb.rows() > 0) {
                cb.col(k) = td.cond.col(batch[static_cast<std::size_t>(k)]);
            }
        }

        nn::Var x = tape.constant(xb);
        nn::Var enc_in = tape.constant(vae_internal::vstack(xb, cb));
        nn::Var trunk_out = tape.relu(trunk_.apply(tape, enc_in, bound));

        nn::Var mu_w = tape.param(mu_head_.W), mu_b = tape.param(mu_head_.b);
        nn::Var lv_w = tape.param(lv_head_.W), lv_b = tape.param(lv_head_.b);
        if (bound) {
            bound->push_back(mu_w);
            bound->push_back(mu_b);
            bound->push_back(lv_w);
            bound->push_back(lv_b);
        }
        nn::Var mu = mu_head_.apply(tape, mu_w, mu_b, trunk_out);
        nn::Var lv = lv_head_.apply(tape, lv_w, lv_b, trunk_out);

        nn::Var z = tape.add(mu, tape.cmul(tape.exp_(tape.scale(lv, 0.5)), tape.constant(eps)));
        nn::Var dec_in = cond_rows() > 0 ? tape.vcat(z, tape.constant(cb)) : z;
        nn::Var xhat = decoder_.apply(tape, dec_in, bound);

        nn::Var recon = tape.mean_all(tape.colwise_sum(tape.square(tape.sub(xhat, x))));
        nn::Var kl_terms = tape.add(tape.sub(tape.add_const(tape.exp_(lv), -1.0), lv), tape.square(mu));
        nn::Var kl = tape.scale(tape.mean_all(tape.colwise_sum(kl_terms)), 0.5);
        nn::Var total = tape.add(tape.scale(recon, cfg_.w_rec), tape.scale(kl, cfg_.w_kl));

        GraphResult out;
        out.total_var = total;
        out.parts.recon = tape.value(recon)(0, 0);
        out.parts.kl = tape.value(kl)(0, 0);
        out.parts.total = tape.value(total)(0, 0);
        return out;
    }

    VaeLossParts step(const TrainingData& td, const std::vector<int>& batch, Rng& eps_rng,
                      nn::Adam& adam) {
        nn::Mat eps(cfg_.latent, static_cast<Eigen::Index>(batch.size()));
        for (Eigen::Index j = 0; j < eps.cols(); ++j) {
            for (Eigen::Index i = 0; i < eps.rows(); ++i) {
                eps(i, j) = eps_rng.normal();
            }
        }
        std::vector<nn::Mat> grads;
        const auto parts = loss_and_gradients(td, batch, eps, &grads);
        adam.step(parameters(), grads);
        return parts;
    }

    VaeConfig cfg_;
    std::vector<std::string> markers_;
    std::vector<std::string> levels_;
    nn::Mlp trunk_;
    nn::Linear mu_head_;
    nn::Linear lv_head_;
    nn::Mlp decoder_;
    TrainingLog log_;
};

}

#endif

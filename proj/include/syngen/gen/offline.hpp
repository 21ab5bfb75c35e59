#ifndef SYNGEN_GEN_OFFLINE_HPP
#define SYNGEN_GEN_OFFLINE_HPP

#include <cstdlib>
#include <string>
#include <vector>

#include "../core/count_matrix.hpp"
#include "../core/rng.hpp"
#include "../core/tsv.hpp"
#include "../nn/adam.hpp"
#include "../nn/mlp.hpp"
#include "../nn/tape.hpp"
#include "json_util.hpp"
#include "policy.hpp"

/**
 * @file offline.hpp
 * @brief Pilot expansion applied before generator training.
 *
 * Both heads work on the log-transformed pilot: one jitters it with Gaussian
 * noise, the other chains autoencoder reconstructions. Original samples are
 * always carried through verbatim.
 */

namespace syngen {

struct OfflineConfig {
    enum class Kind { none, gaussian, ae };

    Kind kind = Kind::none;

    /// Noisy copies per pilot sample (Gaussian head).
    int repeats = 0;

    /// Noise spread on the log scale (Gaussian head).
    double sigma = 0.1;

    /// Pool doublings (autoencoder head).
    int iterations = 0;

    /**
     * Accepts "none", "gaussian:R", "gaussian:R:sigma", and "ae:T".
     */
    static OfflineConfig parse(const std::string& text) {
        OfflineConfig cfg;
        if (text == "none") {
            return cfg;
        }
        std::vector<std::string> parts;
        std::size_t start = 0;
        while (true) {
            const std::size_t colon = text.find(':', start);
            if (colon == std::string::npos) {
                parts.push_back(text.substr(start));
                break;
            }
            parts.push_back(text.substr(start, colon - start));
            start = colon + 1;
        }
        auto parse_int = [&](const std::string& s) {
            char* end = nullptr;
            const long v = std::strtol(s.c_str(), &end, 10);
            if (end == s.c_str() || *end != '\0' || v <= 0) {
                throw validation_error("bad expansion setting '" + text + "'");
            }
            return static_cast<int>(v);
        };
        if (parts[0] == "gaussian" && (parts.size() == 2 || parts.size() == 3)) {
            cfg.kind = Kind::gaussian;
            cfg.repeats = parse_int(parts[1]);
            if (parts.size() == 3) {
                char* end = nullptr;
                cfg.sigma = std::strtod(parts[2].c_str(), &end);
                if (end == parts[2].c_str() || *end != '\0' || !(cfg.sigma > 0.0)) {
                    throw validation_error("bad expansion setting '" + text + "'");
                }
            }
            return cfg;
        }
        if (parts[0] == "ae" && parts.size() == 2) {
            cfg.kind = Kind::ae;
            cfg.iterations = parse_int(parts[1]);
            return cfg;
        }
        throw validation_error("bad expansion setting '" + text + "'");
    }

    std::string text() const {
        switch (kind) {
            case Kind::none:
                return "none";
            case Kind::gaussian:
                return "gaussian:" + std::to_string(repeats) + ":" + format_value(sigma);
            case Kind::ae:
                return "ae:" + std::to_string(iterations);
        }
        return "none";
    }
};

namespace offline_internal {

inline void require_log_scale(const CountMatrix& pilot) {
    if (pilot.scale != Scale::log2p1) {
        throw state_error("pilot expansion expects log-transformed input");
    }
}

}

/**
 * @brief Expand a pilot with `repeats` independently jittered copies of every
 * sample, noise N(0, sigma^2) per entry, clamped at zero.
 *
 * Output holds the originals first, then one full copy block per repeat, so a
 * pilot of k samples becomes k * (repeats + 1).
 */
inline CountMatrix gaussian_head(const CountMatrix& pilot, int repeats, double sigma, std::uint64_t seed) {
    offline_internal::require_log_scale(pilot);
    if (repeats < 0) {
        throw validation_error("repeat count must be non-negative");
    }
    if (!(sigma > 0.0)) {
        throw validation_error("noise spread must be positive");
    }
    const Eigen::Index k = pilot.values.cols();
    const Eigen::Index total = k * static_cast<Eigen::Index>(repeats + 1);

    CountMatrix out;
    out.scale = Scale::log2p1;
    out.marker_ids = pilot.marker_ids;
    out.values.resize(pilot.values.rows(), total);
    out.values.leftCols(k) = pilot.values;
    out.sample_ids = pilot.sample_ids;
    if (pilot.groups) {
        out.groups = pilot.groups;
    }

    Rng rng(stable_hash(seed, 0x676175ULL));
    for (int r = 1; r <= repeats; ++r) {
        for (Eigen::Index j = 0; j < k; ++j) {
            const Eigen::Index col = static_cast<Eigen::Index>(r) * k + j;
            for (Eigen::Index i = 0; i < pilot.values.rows(); ++i) {
                out.values(i, col) = std::max(0.0, pilot.values(i, j) + rng.normal(0.0, sigma));
            }
            out.sample_ids.push_back(pilot.sample_ids[static_cast<std::size_t>(j)] + "_g" + std::to_string(r));
            if (out.groups) {
                out.groups->push_back((*pilot.groups)[static_cast<std::size_t>(j)]);
            }
        }
    }
    out.validate();
    return out;
}

/**
 * @brief Plain reconstruction autoencoder used by the pool-doubling head.
 *
 * Encoder narrows through 256 and 128 to a 64-wide code; the decoder mirrors
 * it back. Hidden layers are rectified, outputs linear, and training
 * minimizes mean squared reconstruction error.
 */
class Autoencoder {
public:
    Autoencoder(Eigen::Index features, std::uint64_t init_seed) {
        Rng rng(stable_hash(init_seed, 0x6165ULL));
        encoder_ = nn::Mlp(features, {256, 128}, 64, rng);
        decoder_ = nn::Mlp(64, {128, 256}, features, rng);
    }

    void train(const nn::Mat& x, const TrainingPolicy& policy, const std::string& phase = "train") {
        policy.validate();
        const int n = static_cast<int>(x.cols());
        if (n < 2) {
            throw validation_error("autoencoder training needs at least 2 samples");
        }
        const double frac = policy.resolve_batch_fraction(0.1);
        const std::uint64_t salt = gen_json::phase_salt(phase);
        nn::Adam adam(policy.learning_rate);
        EarlyStopper stopper(policy.patience);
        const int max_epochs = policy.strategy == TrainingPolicy::Strategy::fixed
                                   ? policy.resolve_epochs(1000)
                                   : policy.max_epochs;

        auto params = parameters();
        for (int epoch = 1; epoch <= max_epochs; ++epoch) {
            const std::uint64_t epoch_seed = stable_hash(policy.seed ^ salt, static_cast<std::uint64_t>(epoch));
            const auto batches = make_batches(n, frac, epoch_seed);
            double sum = 0.0, wsum = 0.0;
            for (const auto& batch : batches) {
                nn::Mat xb(x.rows(), static_cast<Eigen::Index>(batch.size()));
                for (std::size_t c = 0; c < batch.size(); ++c) {
                    xb.col(static_cast<Eigen::Index>(c)) = x.col(batch[c]);
                }
                nn::Tape tape;
                std::vector<nn::Var> bound;
                nn::Var in = tape.constant(xb);
                nn::Var code = encoder_.apply(tape, in, &bound);
                nn::Var rec = decoder_.apply(tape, code, &bound);
                nn::Var loss = tape.mean_all(tape.square(tape.sub(rec, in)));
                tape.backward(loss);
                std::vector<nn::Mat> grads;
                grads.reserve(bound.size());
                for (nn::Var v : bound) {
                    grads.push_back(tape.grad(v));
                }
                adam.step(params, grads);
                sum += tape.value(loss)(0, 0) * static_cast<double>(batch.size());
                wsum += static_cast<double>(batch.size());
            }
            const double mse = sum / wsum;
            log_.add(phase, epoch, {{"mse", mse}});
            if (policy.strategy == TrainingPolicy::Strategy::early_stop && stopper.update(mse)) {
                break;
            }
        }
    }

    nn::Mat reconstruct(const nn::Mat& x) const { return decoder_.forward(encoder_.forward(x)); }

    std::vector<nn::Mat*> parameters() {
        auto out = encoder_.parameters();
        for (nn::Mat* p : decoder_.parameters()) {
            out.push_back(p);
        }
        return out;
    }

    const TrainingLog& training_log() const { return log_; }

private:
    nn::Mlp encoder_;
    nn::Mlp decoder_;
    TrainingLog log_;
};

/**
 * @brief Double the pool `iterations` times by appending autoencoder
 * reconstructions of every sample currently in it.
 *
 * The autoencoder is fit once on the pilot; each doubling then reconstructs
 * the whole current pool (originals and earlier reconstructions alike), so k
 * pilot samples become k * 2^iterations. Reconstructions are clamped at zero.
 */
inline CountMatrix ae_head(const CountMatrix& pilot, int iterations, const TrainingPolicy& policy) {
    offline_internal::require_log_scale(pilot);
    if (iterations < 0) {
        throw validation_error("iteration count must be non-negative");
    }
    Autoencoder ae(pilot.values.rows(), policy.seed);
    ae.train(pilot.values, policy);

    CountMatrix pool = pilot;
    for (int it = 1; it <= iterations; ++it) {
        const Eigen::Index before = pool.values.cols();
        nn::Mat rec = ae.reconstruct(pool.values).cwiseMax(0.0);
        nn::Mat merged(pool.values.rows(), 2 * before);
        merged.leftCols(before) = pool.values;
        merged.rightCols(before) = rec;
        pool.values = std::move(merged);
        for (Eigen::Index j = 0; j < before; ++j) {
            pool.sample_ids.push_back("ae" + std::to_string(it) + "_s" + std::to_string(j + 1));
            if (pool.groups) {
                pool.groups->push_back((*pool.groups)[static_cast<std::size_t>(j)]);
            }
        }
    }
    pool.validate();
    return pool;
}

/// Run the configured expansion head; "none" passes the pilot through.
inline CountMatrix apply_offline(const CountMatrix& pilot, const OfflineConfig& cfg,
                                 const TrainingPolicy& policy) {
    switch (cfg.kind) {
        case OfflineConfig::Kind::none:
            return pilot;
        case OfflineConfig::Kind::gaussian:
            return gaussian_head(pilot, cfg.repeats, cfg.sigma, policy.seed);
        case OfflineConfig::Kind::ae:
            return ae_head(pilot, cfg.iterations, policy);
    }
    return pilot;
}

}

#endif

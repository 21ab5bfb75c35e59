#ifndef SYNGEN_GEN_GENERATOR_HPP
#define SYNGEN_GEN_GENERATOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "../core/count_matrix.hpp"
#include "../core/error.hpp"
#include "../core/tsv.hpp"
#include "../nn/tape.hpp"
#include "policy.hpp"

/**
 * @file generator.hpp
 * @brief Common contract for trained generative models.
 */

namespace syngen {

enum class Family { vae, cvae, gan, wgan, wgangp, realnvp, glow, maf };

inline const char* to_string(Family f) {
    switch (f) {
        case Family::vae: return "vae";
        case Family::cvae: return "cvae";
        case Family::gan: return "gan";
        case Family::wgan: return "wgan";
        case Family::wgangp: return "wgangp";
        case Family::realnvp: return "realnvp";
        case Family::glow: return "glow";
        case Family::maf: return "maf";
    }
    return "?";
}

inline Family family_from_string(const std::string& s) {
    if (s == "vae") return Family::vae;
    if (s == "cvae") return Family::cvae;
    if (s == "gan") return Family::gan;
    if (s == "wgan") return Family::wgan;
    if (s == "wgangp") return Family::wgangp;
    if (s == "realnvp") return Family::realnvp;
    if (s == "glow") return Family::glow;
    if (s == "maf") return Family::maf;
    throw validation_error("unknown model family '" + s + "'");
}

/**
 * @brief Parsed model request, e.g. `vae:1-10`, `cvae:1-100`, `wgangp`, `maf`.
 *
 * The optional `recon-kl` suffix sets the weights of the two loss terms of
 * the variational families; other families take no parameters here.
 */
struct ModelSpec {
    Family family = Family::vae;
    double w_rec = 1.0;
    double w_kl = 1.0;

    static ModelSpec parse(const std::string& text) {
        ModelSpec spec;
        const auto colon = text.find(':');
        const std::string name = text.substr(0, colon);
        spec.family = family_from_string(name);
        if (colon == std::string::npos) {
            return spec;
        }
        const std::string rest = text.substr(colon + 1);
        if (spec.family != Family::vae && spec.family != Family::cvae) {
            throw validation_error("model '" + name + "' takes no ':" + rest + "' parameter");
        }
        const auto dash = rest.find('-');
        if (dash == std::string::npos || dash == 0 || dash + 1 >= rest.size()) {
            throw validation_error("expected '" + name + ":<recon>-<kl>', got '" + text + "'");
        }
        auto parse_weight = [&](const std::string& s) {
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0' || !std::isfinite(v)) {
                throw validation_error("bad loss weights in '" + text + "'");
            }
            return v;
        };
        spec.w_rec = parse_weight(rest.substr(0, dash));
        spec.w_kl = parse_weight(rest.substr(dash + 1));
        if (!(spec.w_rec > 0.0) || !(spec.w_kl > 0.0)) {
            throw validation_error("loss weights must be positive in '" + text + "'");
        }
        return spec;
    }

    std::string text() const {
        std::string out = to_string(family);
        if (family == Family::vae || family == Family::cvae) {
            out += ":" + format_value(w_rec) + "-" + format_value(w_kl);
        }
        return out;
    }

    bool conditional() const { return family == Family::cvae; }
    bool is_vae() const { return family == Family::vae || family == Family::cvae; }
    bool is_gan() const {
        return family == Family::gan || family == Family::wgan || family == Family::wgangp;
    }
    bool is_flow() const {
        return family == Family::realnvp || family == Family::glow || family == Family::maf;
    }
};

/**
 * @brief Training matrix plus the class-indicator block for conditional
 * models.
 *
 * Class labels are encoded as treatment-coded indicator rows: with c levels
 * the indicator has c - 1 rows, level 0 being the all-zero reference. For two
 * groups this is a single 0/1 row.
 */
struct TrainingData {
    nn::Mat x;                        ///< features x samples, log scale
    nn::Mat cond;                     ///< (levels - 1) x samples; empty when unconditional
    std::vector<std::string> levels;  ///< sorted class levels; empty when unconditional
};

inline nn::Mat indicator_rows(const std::vector<int>& level_index, int n_levels) {
    nn::Mat cond = nn::Mat::Zero(n_levels - 1, static_cast<Eigen::Index>(level_index.size()));
    for (std::size_t j = 0; j < level_index.size(); ++j) {
        if (level_index[j] > 0) {
            cond(level_index[j] - 1, static_cast<Eigen::Index>(j)) = 1.0;
        }
    }
    return cond;
}

inline TrainingData prepare_training_data(const CountMatrix& data, bool conditional) {
    if (data.scale != Scale::log2p1) {
        throw state_error("generative models train on the log scale; transform the counts first");
    }
    if (data.samples() < 2) {
        throw validation_error("training needs at least two samples");
    }
    TrainingData out;
    out.x = data.values;
    if (conditional) {
        if (!data.groups) {
            throw validation_error("conditional model requires group labels");
        }
        out.levels = data.group_levels();
        if (out.levels.size() < 2) {
            throw validation_error("conditional model requires at least two group levels");
        }
        std::vector<int> idx(static_cast<std::size_t>(data.samples()));
        for (Eigen::Index j = 0; j < data.samples(); ++j) {
            const auto& g = (*data.groups)[static_cast<std::size_t>(j)];
            const auto it = std::lower_bound(out.levels.begin(), out.levels.end(), g);
            idx[static_cast<std::size_t>(j)] = static_cast<int>(it - out.levels.begin());
        }
        out.cond = indicator_rows(idx, static_cast<int>(out.levels.size()));
    }
    return out;
}

/**
 * @brief A generative model over a fixed marker panel.
 *
 * Implementations are constructed untrained by their factories, trained with
 * one or more `train` phases, and then queried with `generate`. Generated
 * matrices are on the log scale with fresh `gen_<i>` sample ids; callers
 * back-transform when integer counts are wanted.
 */
class Generator {
public:
    virtual ~Generator() = default;

    virtual Family family() const = 0;
    virtual int feature_count() const = 0;
    virtual bool conditional() const = 0;
    virtual const std::vector<std::string>& marker_ids() const = 0;

    /// Sorted class levels for conditional models; empty otherwise.
    virtual const std::vector<std::string>& class_levels() const = 0;

    virtual const TrainingLog& training_log() const = 0;

    /**
     * @brief Run one training phase over `data`, appending to the log.
     */
    virtual void train(const CountMatrix& data, const TrainingPolicy& policy,
                       const std::string& phase) = 0;

    /**
     * @brief Draw `n` synthetic samples.
     *
     * @param labels Class label for each generated sample; required for
     * conditional models (size n) and rejected otherwise.
     */
    virtual CountMatrix generate(int n, std::uint64_t seed,
                                 const std::vector<std::string>* labels = nullptr) const = 0;
};

namespace generator_internal {

/// Resolve per-sample class indices for a generation request.
inline std::vector<int> generation_label_indices(int n, const std::vector<std::string>* labels,
                                                 const std::vector<std::string>& levels,
                                                 bool conditional) {
    if (n < 0) {
        throw validation_error("cannot generate a negative number of samples");
    }
    if (!conditional) {
        if (labels && !labels->empty()) {
            throw validation_error("this model is unconditional; labels are not accepted");
        }
        return {};
    }
    if (!labels || static_cast<int>(labels->size()) != n) {
        throw validation_error("conditional generation needs one label per sample");
    }
    std::vector<int> idx;
    idx.reserve(labels->size());
    for (const auto& l : *labels) {
        const auto it = std::lower_bound(levels.begin(), levels.end(), l);
        if (it == levels.end() || *it != l) {
            throw validation_error("unknown class label '" + l + "'");
        }
        idx.push_back(static_cast<int>(it - levels.begin()));
    }
    return idx;
}

/// Assemble the generated matrix: clamp at zero, attach ids and labels.
inline CountMatrix finish_generated(nn::Mat samples, const std::vector<std::string>& markers,
                                    const std::vector<std::string>* labels) {
    CountMatrix out;
    out.values = samples.cwiseMax(0.0);
    out.scale = Scale::log2p1;
    out.marker_ids = markers;
    const Eigen::Index n = out.values.cols();
    out.sample_ids.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        out.sample_ids.push_back("gen_" + std::to_string(j + 1));
    }
    if (labels) {
        out.groups = *labels;
    }
    return out;
}

}

}

#endif

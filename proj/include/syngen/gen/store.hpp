#ifndef SYNGEN_GEN_STORE_HPP
#define SYNGEN_GEN_STORE_HPP

#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "flow.hpp"
#include "gan.hpp"
#include "generator.hpp"
#include "vae.hpp"

/**
 * @file store.hpp
 * @brief Construction, training, and file persistence for all generator
 * families behind one dispatch point.
 */

namespace syngen {

inline constexpr int kModelFormatVersion = 1;

/**
 * @brief Build an untrained generator.
 *
 * Pass the class levels the model should condition on, or an empty vector for
 * an unconditional model. Families that cannot condition reject levels.
 */
inline std::unique_ptr<Generator> make_generator(const ModelSpec& spec,
                                                 const std::vector<std::string>& markers,
                                                 const std::vector<std::string>& levels,
                                                 std::uint64_t init_seed) {
    const bool conditional = !levels.empty();
    switch (spec.family) {
        case Family::vae:
        case Family::cvae: {
            if (spec.conditional() != conditional) {
                throw validation_error(spec.conditional()
                                           ? "conditional model needs class levels"
                                           : "class levels supplied for an unconditional model");
            }
            VaeConfig cfg;
            cfg.w_rec = spec.w_rec;
            cfg.w_kl = spec.w_kl;
            cfg.conditional = conditional;
            return std::make_unique<VaeGenerator>(cfg, markers, levels, init_seed);
        }
        case Family::gan:
        case Family::wgan:
        case Family::wgangp: {
            if (conditional) {
                throw validation_error("adversarial models do not support class conditioning");
            }
            return std::make_unique<GanGenerator>(spec.family, GanConfig{}, markers, init_seed);
        }
        case Family::realnvp:
        case Family::glow:
        case Family::maf: {
            FlowConfig cfg;
            cfg.conditional = conditional;
            return std::make_unique<FlowGenerator>(spec.family, cfg, markers, levels, init_seed);
        }
    }
    throw validation_error("unknown model family");
}

/// Class levels a model of this family should condition on for this data.
inline std::vector<std::string> conditioning_levels(const ModelSpec& spec, const CountMatrix& data) {
    if (spec.family == Family::cvae) {
        return data.group_levels();
    }
    if (spec.family == Family::maf && data.groups && data.group_levels().size() >= 2) {
        return data.group_levels();
    }
    return {};
}

/// Build and train a generator on `data` under `policy`.
inline std::unique_ptr<Generator> train_generator(const ModelSpec& spec, const CountMatrix& data,
                                                  const TrainingPolicy& policy) {
    auto model = make_generator(spec, data.marker_ids, conditioning_levels(spec, data), policy.seed);
    model->train(data, policy, "train");
    return model;
}

inline nlohmann::json generator_to_json(const Generator& g) {
    if (const auto* vae = dynamic_cast<const VaeGenerator*>(&g)) return vae->to_json();
    if (const auto* gan = dynamic_cast<const GanGenerator*>(&g)) return gan->to_json();
    if (const auto* flow = dynamic_cast<const FlowGenerator*>(&g)) return flow->to_json();
    throw serialize_error("generator type cannot be saved");
}

inline void save_generator(const Generator& g, const std::string& path) {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["kind"] = "generator-model";
    j["model"] = generator_to_json(g);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw io_error("cannot open " + path + " for writing");
    }
    out << j.dump(1, '\t') << '\n';
    if (!out) {
        throw io_error("failed while writing " + path);
    }
}

inline std::unique_ptr<Generator> generator_from_json(const nlohmann::json& j) {
    Family fam;
    try {
        fam = family_from_string(j.at("family").get<std::string>());
    } catch (const nlohmann::json::exception&) {
        throw serialize_error("model file: missing or malformed family");
    }
    try {
        switch (fam) {
            case Family::vae:
            case Family::cvae:
                return VaeGenerator::from_json(j);
            case Family::gan:
            case Family::wgan:
            case Family::wgangp:
                return GanGenerator::from_json(j);
            case Family::realnvp:
            case Family::glow:
            case Family::maf:
                return FlowGenerator::from_json(j);
        }
    } catch (const nlohmann::json::exception& e) {
        throw serialize_error(std::string("model file: ") + e.what());
    }
    throw serialize_error("model file: unknown family");
}

inline std::unique_ptr<Generator> load_generator(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error&) {
        throw serialize_error(path + ": not a valid model file");
    }
    if (!j.is_object() || !j.contains("format_version") || !j.contains("model")) {
        throw serialize_error(path + ": not a valid model file");
    }
    const int version = j.at("format_version").is_number_integer() ? j.at("format_version").get<int>() : -1;
    if (version != kModelFormatVersion) {
        throw version_error(path + ": unsupported model format version");
    }
    return generator_from_json(j.at("model"));
}

}

#endif

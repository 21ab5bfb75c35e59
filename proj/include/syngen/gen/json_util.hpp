#ifndef SYNGEN_GEN_JSON_UTIL_HPP
#define SYNGEN_GEN_JSON_UTIL_HPP

#include <json.hpp>

#include <string>
#include <vector>

#include "../core/error.hpp"
#include "../nn/tape.hpp"
#include "policy.hpp"

/**
 * @file json_util.hpp
 * @brief JSON encoding of matrices and training logs for model files.
 *
 * Doubles survive a dump/parse cycle exactly (the serializer emits shortest
 * round-trip representations), which is what makes saved models reproduce
 * their in-memory output bit for bit.
 */

namespace syngen::gen_json {

using nlohmann::json;

inline json mat_to_json(const nn::Mat& m) {
    json out;
    out["rows"] = m.rows();
    out["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            data.push_back(m(i, j));
        }
    }
    out["data"] = std::move(data);
    return out;
}

inline nn::Mat mat_from_json(const json& j) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
        throw serialize_error("model file: malformed matrix entry");
    }
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(data.size()) != rows * cols) {
        throw serialize_error("model file: matrix size mismatch");
    }
    nn::Mat m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j2 = 0; j2 < cols; ++j2) {
            m(i, j2) = data[k++];
        }
    }
    return m;
}

inline json log_to_json(const TrainingLog& log) {
    json entries = json::array();
    for (const auto& e : log.entries) {
        json values = json::array();
        for (const auto& [k, v] : e.values) {
            values.push_back(json{{"k", k}, {"v", v}});
        }
        entries.push_back(json{{"phase", e.phase}, {"epoch", e.epoch}, {"values", values}});
    }
    return entries;
}

inline TrainingLog log_from_json(const json& j) {
    TrainingLog log;
    if (!j.is_array()) {
        throw serialize_error("model file: malformed training log");
    }
    for (const auto& e : j) {
        TrainingLog::Entry entry;
        entry.phase = e.at("phase").get<std::string>();
        entry.epoch = e.at("epoch").get<int>();
        for (const auto& kv : e.at("values")) {
            entry.values.emplace_back(kv.at("k").get<std::string>(), kv.at("v").get<double>());
        }
        log.entries.push_back(std::move(entry));
    }
    return log;
}

/// Deterministic 64-bit salt from a phase tag, used to decorrelate the
/// random streams of chained training phases.
inline std::uint64_t phase_salt(const std::string& phase) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : phase) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}

#endif

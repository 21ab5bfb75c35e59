#ifndef SYNGEN_CURVE_HARNESS_HPP
#define SYNGEN_CURVE_HARNESS_HPP

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "../core/count_matrix.hpp"
#include "../core/error.hpp"
#include "../core/rng.hpp"
#include "../core/transform.hpp"
#include "../core/tsv.hpp"
#include "../gen/generator.hpp"
#include "classifier.hpp"
#include "cv.hpp"
#include "iplf.hpp"
#include "knn.hpp"

/**
 * @file harness.hpp
 * @brief Accuracy-versus-sample-size harness and the curve artifact.
 */

namespace syngen {

/**
 * @brief Settings for the accuracy harness.
 *
 * `sizes` are per class when `per_group` is set (the default), so a grid
 * entry n means n samples of every class; otherwise n is the total, spread
 * as evenly as possible over the classes. Each size is measured `repeats`
 * times with freshly derived seeds and scored by stratified
 * cross-validation.
 */
struct HarnessConfig {
    std::vector<int> sizes;
    int repeats = 30;
    int folds = 5;
    std::string classifier = "knn:20";
    bool per_group = true;

    void validate() const {
        if (sizes.empty()) {
            throw validation_error("harness needs at least one candidate size");
        }
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            if (sizes[i] <= 0) {
                throw validation_error("candidate sizes must be positive");
            }
            if (i > 0 && sizes[i] <= sizes[i - 1]) {
                throw validation_error("candidate sizes must be strictly increasing");
            }
        }
        if (repeats < 1) {
            throw validation_error("repeat count must be positive");
        }
        if (folds < 2) {
            throw validation_error("cross-validation needs at least two folds");
        }
    }
};

/**
 * @brief Measured accuracies: one row per candidate size.
 *
 * `per_repeat[i][r]` is the cross-validated accuracy of repeat r at size
 * `sizes[i]`; `mean_accuracy[i]` is its mean over repeats.
 */
struct AccuracyGrid {
    std::vector<int> sizes;
    std::vector<double> mean_accuracy;
    std::vector<std::vector<double>> per_repeat;
};

namespace harness_internal {

/// Per-repeat seed; fixed derivation keeps every (size, repeat) cell replayable.
inline std::uint64_t repeat_seed(std::uint64_t seed, std::size_t size_index, int repeat) {
    return stable_hash(seed, static_cast<std::uint64_t>(size_index),
                       static_cast<std::uint64_t>(repeat));
}

using DrawFn =
    std::function<void(std::size_t, std::uint64_t, Eigen::MatrixXd&, std::vector<std::string>&)>;

inline AccuracyGrid measure(const HarnessConfig& cfg, std::uint64_t seed, const DrawFn& draw) {
    const std::unique_ptr<Classifier> classifier = make_classifier(cfg.classifier);
    AccuracyGrid grid;
    grid.sizes = cfg.sizes;
    grid.mean_accuracy.resize(cfg.sizes.size(), 0.0);
    grid.per_repeat.assign(cfg.sizes.size(), {});

    Eigen::MatrixXd X;
    std::vector<std::string> y;
    for (std::size_t i = 0; i < cfg.sizes.size(); ++i) {
        auto& row = grid.per_repeat[i];
        row.reserve(static_cast<std::size_t>(cfg.repeats));
        for (int r = 0; r < cfg.repeats; ++r) {
            const std::uint64_t child = repeat_seed(seed, i, r);
            draw(i, child, X, y);
            const double accuracy = cross_val_accuracy(X, y, *classifier, cfg.folds,
                                                       stable_hash(child, 0x637276ULL));
            row.push_back(accuracy);
            grid.mean_accuracy[i] += accuracy;
        }
        grid.mean_accuracy[i] /= static_cast<double>(cfg.repeats);
    }
    return grid;
}

/// How many samples of each class to request for one grid entry.
inline std::vector<int> class_quota(int n, std::size_t n_classes, bool per_group) {
    std::vector<int> quota(n_classes, n);
    if (!per_group) {
        const int base = n / static_cast<int>(n_classes);
        const int extra = n % static_cast<int>(n_classes);
        for (std::size_t c = 0; c < n_classes; ++c) {
            quota[c] = base + (static_cast<int>(c) < extra ? 1 : 0);
        }
    }
    return quota;
}

}

/**
 * @brief Measure accuracy at each candidate size using generated samples.
 *
 * The trained model must be conditional with at least two classes. For each
 * (size, repeat) cell a fresh batch is generated with a seed derived from
 * (seed, size index, repeat), labelled across the class levels per the size
 * policy, and scored with stratified cross-validation on the log-scale
 * features.
 */
inline AccuracyGrid accuracy_grid_from_generator(const Generator& generator,
                                                 const HarnessConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (!generator.conditional() || generator.class_levels().size() < 2) {
        throw validation_error(
            "the accuracy harness needs a conditional model with two or more classes");
    }
    const std::vector<std::string>& levels = generator.class_levels();

    return harness_internal::measure(
        cfg, seed,
        [&](std::size_t i, std::uint64_t child, Eigen::MatrixXd& X, std::vector<std::string>& y) {
            const std::vector<int> quota =
                harness_internal::class_quota(cfg.sizes[i], levels.size(), cfg.per_group);
            y.clear();
            for (std::size_t c = 0; c < levels.size(); ++c) {
                y.insert(y.end(), static_cast<std::size_t>(quota[c]), levels[c]);
            }
            const CountMatrix batch =
                generator.generate(static_cast<int>(y.size()), child, &y);
            X = batch.values.transpose();
        });
}

/**
 * @brief Measure accuracy at each candidate size by subsampling real data.
 *
 * The dataset must carry group labels with at least two levels. Per-class
 * sizes draw without replacement within each class, so no candidate size may
 * exceed the smallest class; total sizes draw uniformly from all samples.
 * Features are the log-scale values.
 */
inline AccuracyGrid accuracy_grid_from_data(const CountMatrix& data, const HarnessConfig& cfg,
                                            std::uint64_t seed) {
    cfg.validate();
    if (!data.groups || data.group_levels().size() < 2) {
        throw validation_error("the accuracy harness needs data with two or more group levels");
    }
    const CountMatrix logview = as_log2p1(data);
    const std::vector<std::string> levels = data.group_levels();

    if (cfg.per_group) {
        for (const auto& level : levels) {
            const int available = static_cast<int>(data.group_columns(level).size());
            if (cfg.sizes.back() > available) {
                throw validation_error("candidate size " + std::to_string(cfg.sizes.back()) +
                                       " exceeds the " + std::to_string(available) +
                                       " samples of group '" + level + "'");
            }
        }
    } else if (cfg.sizes.back() > data.samples()) {
        throw validation_error("candidate size " + std::to_string(cfg.sizes.back()) +
                               " exceeds the " + std::to_string(data.samples()) + " samples");
    }

    return harness_internal::measure(
        cfg, seed,
        [&](std::size_t i, std::uint64_t child, Eigen::MatrixXd& X, std::vector<std::string>& y) {
            Rng rng(stable_hash(child, 0x737562ULL));
            std::vector<int> selected;
            if (cfg.per_group) {
                for (const auto& level : levels) {
                    const std::vector<int> pool = data.group_columns(level);
                    const std::vector<int> perm = rng.permutation(static_cast<int>(pool.size()));
                    for (int t = 0; t < cfg.sizes[i]; ++t) {
                        selected.push_back(pool[static_cast<std::size_t>(perm[static_cast<std::size_t>(t)])]);
                    }
                }
            } else {
                const std::vector<int> perm = rng.permutation(static_cast<int>(data.samples()));
                selected.assign(perm.begin(), perm.begin() + cfg.sizes[i]);
            }
            X.resize(static_cast<Eigen::Index>(selected.size()), data.markers());
            y.clear();
            y.reserve(selected.size());
            for (std::size_t t = 0; t < selected.size(); ++t) {
                X.row(static_cast<Eigen::Index>(t)) = logview.values.col(selected[t]).transpose();
                y.push_back((*data.groups)[static_cast<std::size_t>(selected[t])]);
            }
        });
}

/**
 * @brief A measured grid together with its fitted curve and provenance.
 */
struct CurveArtifact {
    AccuracyGrid grid;
    IplfFit fit;
    std::string classifier;
    std::uint64_t seed = 0;
};

namespace harness_internal {

inline CurveArtifact finish_curve(AccuracyGrid grid, const HarnessConfig& cfg,
                                  std::uint64_t seed) {
    CurveArtifact artifact;
    artifact.grid = std::move(grid);
    std::vector<double> xs(artifact.grid.sizes.begin(), artifact.grid.sizes.end());
    artifact.fit = fit_iplf(xs, artifact.grid.mean_accuracy);
    artifact.classifier = make_classifier(cfg.classifier)->name();
    artifact.seed = seed;
    return artifact;
}

}

/// Run the harness on a trained conditional model and fit the curve.
inline CurveArtifact accuracy_curve_from_generator(const Generator& generator,
                                                   const HarnessConfig& cfg, std::uint64_t seed) {
    return harness_internal::finish_curve(accuracy_grid_from_generator(generator, cfg, seed), cfg,
                                          seed);
}

/// Run the harness on labelled data by subsampling and fit the curve.
inline CurveArtifact accuracy_curve_from_data(const CountMatrix& data, const HarnessConfig& cfg,
                                              std::uint64_t seed) {
    return harness_internal::finish_curve(accuracy_grid_from_data(data, cfg, seed), cfg, seed);
}

/**
 * @brief Curve artifact as a JSON document.
 *
 * Field layout is part of the external interface: sizes, mean_accuracy,
 * per_repeat, params (a, b, c), covariance (3x3), residual_scale,
 * classifier, seed.
 */
inline nlohmann::json curve_to_json(const CurveArtifact& artifact) {
    nlohmann::json j;
    j["sizes"] = artifact.grid.sizes;
    j["mean_accuracy"] = artifact.grid.mean_accuracy;
    j["per_repeat"] = artifact.grid.per_repeat;
    j["params"] = {{"a", artifact.fit.params.a},
                   {"b", artifact.fit.params.b},
                   {"c", artifact.fit.params.c}};
    nlohmann::json cov = nlohmann::json::array();
    for (int r = 0; r < 3; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < 3; ++c) {
            row.push_back(artifact.fit.covariance(r, c));
        }
        cov.push_back(row);
    }
    j["covariance"] = cov;
    j["residual_scale"] = artifact.fit.residual_scale;
    j["classifier"] = artifact.classifier;
    j["seed"] = artifact.seed;
    return j;
}

/**
 * @brief Write the fitted curve as plot-ready TSV.
 *
 * Two hundred points spanning the measured range out to twice the largest
 * size, with the 95% band when the fit supports one ("-" otherwise).
 */
inline void write_curve_plot_tsv(const IplfFit& fit, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw io_error("cannot open '" + path.string() + "' for writing");
    }
    out << "n\taccuracy\tlo95\thi95\n";
    const double lo = fit.sizes.front();
    const double hi = 2.0 * fit.sizes.back();
    const int points = 200;
    for (int t = 0; t < points; ++t) {
        const double n = lo + (hi - lo) * static_cast<double>(t) / static_cast<double>(points - 1);
        const IplfPrediction pred = predict_with_interval(fit, n);
        out << format_value(n) << '\t' << format_value(pred.accuracy) << '\t';
        if (pred.lo95) {
            out << format_value(*pred.lo95) << '\t' << format_value(*pred.hi95) << '\n';
        } else {
            out << "-\t-\n";
        }
    }
    if (!out.good()) {
        throw io_error("failed writing '" + path.string() + "'");
    }
}

}

#endif

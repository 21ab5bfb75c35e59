#ifndef SYNGEN_GEN_POLICY_HPP
#define SYNGEN_GEN_POLICY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "../core/error.hpp"
#include "../core/rng.hpp"
#include "../core/tsv.hpp"

/**
 * @file policy.hpp
 * @brief Training schedule shared by all generative models: epoch strategy,
 * batching, early stopping, and the per-epoch log.
 */

namespace syngen {

/**
 * @brief How long and how densely to train.
 *
 * `epochs` and `batch_fraction` are optional so each model family can fill in
 * its own convention (1000 epochs and 10% batches for autoencoder-style
 * models and adversarial pairs, 200 epochs and 20% batches for flows) when
 * the caller does not care.
 */
struct TrainingPolicy {
    enum class Strategy { fixed, early_stop };

    Strategy strategy = Strategy::fixed;

    /// Epoch count for the fixed strategy; family default when unset.
    std::optional<int> epochs;

    /// Early stopping: give up after this many epochs without a new best.
    int patience = 30;

    /// Hard cap for the early-stop strategy.
    int max_epochs = 5000;

    /// Batch size as a fraction of the training set; family default when unset.
    std::optional<double> batch_fraction;

    double learning_rate = 5e-4;

    std::uint64_t seed = 0;

    void validate() const {
        if (strategy == Strategy::fixed && !epochs) {
            throw validation_error("fixed training needs an epoch count");
        }
        if (epochs && *epochs <= 0) {
            throw validation_error("epoch count must be positive");
        }
        if (patience <= 0) {
            throw validation_error("patience must be positive");
        }
        if (max_epochs <= 0) {
            throw validation_error("max_epochs must be positive");
        }
        if (batch_fraction && !(*batch_fraction > 0.0 && *batch_fraction <= 1.0)) {
            throw validation_error("batch_fraction must be in (0, 1]");
        }
        if (!(learning_rate > 0.0)) {
            throw validation_error("learning rate must be positive");
        }
    }

    int resolve_epochs(int family_default) const {
        return epochs.value_or(family_default);
    }
    double resolve_batch_fraction(double family_default) const {
        return batch_fraction.value_or(family_default);
    }
};

/**
 * @brief Online early-stopping monitor.
 *
 * Tracks the best loss seen so far (strict improvement only) and reports
 * stop once `patience` consecutive epochs fail to beat it.
 */
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {
        if (patience <= 0) {
            throw validation_error("patience must be positive");
        }
    }

    /// Feed the loss of the next epoch; true means training should stop now.
    bool update(double loss) {
        ++epoch_;
        if (loss < best_) {
            best_ = loss;
            best_epoch_ = epoch_;
        }
        return epoch_ - best_epoch_ >= patience_;
    }

    int best_epoch() const { return best_epoch_; }
    double best_loss() const { return best_; }
    int epochs_seen() const { return epoch_; }

private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

/**
 * @brief Offline form of the stopping rule on a complete loss sequence.
 *
 * @return The 1-based epoch after which training would stop, or the sequence
 * length when the rule never triggers.
 */
inline int early_stopper(const std::vector<double>& losses, int patience) {
    if (losses.empty()) {
        throw validation_error("early stopping needs at least one epoch loss");
    }
    EarlyStopper stop(patience);
    for (double l : losses) {
        if (stop.update(l)) {
            return stop.epochs_seen();
        }
    }
    return static_cast<int>(losses.size());
}

/**
 * @brief Partition sample indices 0..n-1 into shuffled batches.
 *
 * Batch size is `max(1, round(fraction * n))`; the shuffle is a seeded
 * permutation and a final short batch is kept rather than dropped, so every
 * sample appears exactly once per epoch.
 */
inline std::vector<std::vector<int>> make_batches(int n, double fraction, std::uint64_t seed) {
    if (n <= 0) {
        throw validation_error("cannot batch an empty dataset");
    }
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw validation_error("batch fraction must be in (0, 1]");
    }
    const int size = std::max(1, static_cast<int>(std::llround(fraction * static_cast<double>(n))));
    Rng rng(stable_hash(seed, 0x62617463ULL));
    const std::vector<int> perm = rng.permutation(n);

    std::vector<std::vector<int>> batches;
    for (int start = 0; start < n; start += size) {
        const int end = std::min(n, start + size);
        batches.emplace_back(perm.begin() + start, perm.begin() + end);
    }
    return batches;
}

/**
 * @brief Per-epoch record of named loss values, with an optional phase tag
 * for runs that chain a pre-training stage before the main one.
 */
struct TrainingLog {
    struct Entry {
        std::string phase;
        int epoch = 0;
        std::vector<std::pair<std::string, double>> values;
    };

    std::vector<Entry> entries;

    void add(std::string phase, int epoch, std::vector<std::pair<std::string, double>> values) {
        entries.push_back(Entry{std::move(phase), epoch, std::move(values)});
    }

    /// Values of one named column across entries; entries lacking it are skipped.
    std::vector<double> column(const std::string& key) const {
        std::vector<double> out;
        for (const auto& e : entries) {
            for (const auto& [k, v] : e.values) {
                if (k == key) {
                    out.push_back(v);
                    break;
                }
            }
        }
        return out;
    }

    bool operator==(const TrainingLog& other) const {
        if (entries.size() != other.entries.size()) {
            return false;
        }
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].phase != other.entries[i].phase ||
                entries[i].epoch != other.entries[i].epoch ||
                entries[i].values != other.entries[i].values) {
                return false;
            }
        }
        return true;
    }
};

/// Write the log as a TSV table: phase, epoch, then one column per named value.
inline void write_training_log_tsv(const TrainingLog& log, const std::filesystem::path& path) {
    std::vector<std::string> columns;
    for (const auto& e : log.entries) {
        for (const auto& [k, v] : e.values) {
            (void)v;
            if (std::find(columns.begin(), columns.end(), k) == columns.end()) {
                columns.push_back(k);
            }
        }
    }
    std::ofstream out(path);
    if (!out) {
        throw io_error("cannot write training log: " + path.string());
    }
    out << "phase\tepoch";
    for (const auto& c : columns) {
        out << '\t' << c;
    }
    out << '\n';
    for (const auto& e : log.entries) {
        out << e.phase << '\t' << e.epoch;
        for (const auto& c : columns) {
            double v = std::numeric_limits<double>::quiet_NaN();
            for (const auto& [k, val] : e.values) {
                if (k == c) {
                    v = val;
                    break;
                }
            }
            out << '\t' << (std::isnan(v) ? std::string("NA") : format_value(v));
        }
        out << '\n';
    }
}

}

#endif

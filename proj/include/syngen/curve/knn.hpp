#ifndef SYNGEN_CURVE_KNN_HPP
#define SYNGEN_CURVE_KNN_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cstdlib>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "../core/error.hpp"
#include "classifier.hpp"

/**
 * @file knn.hpp
 * @brief K-nearest-neighbour classifier, the built-in learner.
 */

namespace syngen {

/**
 * @brief Euclidean K-nearest-neighbour majority vote.
 *
 * Prediction takes the K closest training samples (ties on distance resolved
 * by training order) and returns the most common label among them. When two
 * labels tie on count, the one whose tied neighbours sit closer on average
 * wins; an exact tie falls back to the lexicographically smallest label, so
 * predictions are fully deterministic.
 */
class KnnClassifier final : public Classifier {
public:
    explicit KnnClassifier(int k = 20) : k_(k) {
        if (k_ < 1) {
            throw validation_error("neighbour count must be positive");
        }
    }

    void fit(const Eigen::MatrixXd& X, const std::vector<std::string>& y) override {
        if (X.rows() == 0) {
            throw validation_error("cannot fit on an empty training set");
        }
        if (static_cast<Eigen::Index>(y.size()) != X.rows()) {
            throw validation_error("label count " + std::to_string(y.size()) +
                                   " does not match " + std::to_string(X.rows()) + " samples");
        }
        if (k_ > X.rows()) {
            throw validation_error("K=" + std::to_string(k_) + " exceeds the training size " +
                                   std::to_string(X.rows()));
        }
        train_ = X;
        labels_ = y;
    }

    std::vector<std::string> predict(const Eigen::MatrixXd& X) const override {
        if (labels_.empty()) {
            throw state_error("classifier queried before fitting");
        }
        if (X.cols() != train_.cols()) {
            throw validation_error("feature count " + std::to_string(X.cols()) +
                                   " does not match training data with " +
                                   std::to_string(train_.cols()) + " features");
        }
        std::vector<std::string> out;
        out.reserve(static_cast<std::size_t>(X.rows()));
        std::vector<std::size_t> order(static_cast<std::size_t>(train_.rows()));
        for (Eigen::Index q = 0; q < X.rows(); ++q) {
            const Eigen::VectorXd dist =
                (train_.rowwise() - X.row(q)).rowwise().norm();
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::partial_sort(order.begin(), order.begin() + k_, order.end(),
                              [&](std::size_t a, std::size_t b) {
                                  const double da = dist(static_cast<Eigen::Index>(a));
                                  const double db = dist(static_cast<Eigen::Index>(b));
                                  return da != db ? da < db : a < b;
                              });

            std::map<std::string, std::pair<int, double>> votes;
            for (int i = 0; i < k_; ++i) {
                auto& entry = votes[labels_[order[static_cast<std::size_t>(i)]]];
                entry.first += 1;
                entry.second += dist(static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)]));
            }
            const std::string* winner = nullptr;
            int best_count = 0;
            double best_mean = 0.0;
            for (const auto& [label, tally] : votes) {
                const double mean = tally.second / tally.first;
                if (!winner || tally.first > best_count ||
                    (tally.first == best_count && mean < best_mean)) {
                    winner = &label;
                    best_count = tally.first;
                    best_mean = mean;
                }
            }
            out.push_back(*winner);
        }
        return out;
    }

    std::string name() const override { return "knn:" + std::to_string(k_); }

    int k() const { return k_; }

private:
    int k_;
    Eigen::MatrixXd train_;
    std::vector<std::string> labels_;
};

namespace knn_internal {

inline int parse_k(const std::string& args) {
    if (args.empty()) {
        return 20;
    }
    char* end = nullptr;
    const long k = std::strtol(args.c_str(), &end, 10);
    if (end != args.c_str() + args.size() || k < 1 || k > 1'000'000) {
        throw validation_error("bad neighbour count '" + args + "'");
    }
    return static_cast<int>(k);
}

inline const bool registered = [] {
    register_classifier("knn", [](const std::string& args) -> std::unique_ptr<Classifier> {
        return std::make_unique<KnnClassifier>(parse_k(args));
    });
    return true;
}();

}

}

#endif

#ifndef SYNGEN_CURVE_CV_HPP
#define SYNGEN_CURVE_CV_HPP

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

#include "../core/error.hpp"
#include "../core/rng.hpp"
#include "classifier.hpp"

/**
 * @file cv.hpp
 * @brief Stratified cross-validated accuracy.
 */

namespace syngen {

/**
 * @brief Pooled k-fold cross-validation accuracy.
 *
 * Samples are dealt into folds per class: each class's members are shuffled
 * with a seed-derived permutation and assigned round-robin, so every fold
 * sees the full class mix and the split depends only on the seed. The
 * classifier is refitted on each training split and the returned accuracy
 * pools correct predictions over all folds.
 */
inline double cross_val_accuracy(const Eigen::MatrixXd& X, const std::vector<std::string>& y,
                                 Classifier& classifier, int folds, std::uint64_t seed) {
    if (static_cast<Eigen::Index>(y.size()) != X.rows()) {
        throw validation_error("label count does not match sample count");
    }
    if (folds < 2) {
        throw validation_error("cross-validation needs at least two folds");
    }

    std::map<std::string, std::vector<int>> by_class;
    for (std::size_t i = 0; i < y.size(); ++i) {
        by_class[y[i]].push_back(static_cast<int>(i));
    }
    for (const auto& [label, members] : by_class) {
        if (static_cast<int>(members.size()) < folds) {
            throw validation_error("class '" + label + "' has " + std::to_string(members.size()) +
                                   " samples, fewer than " + std::to_string(folds) + " folds");
        }
    }

    Rng rng(stable_hash(seed, 0x666f6c6473ULL));
    std::vector<int> fold_of(y.size(), -1);
    for (const auto& [label, members] : by_class) {
        const std::vector<int> perm = rng.permutation(static_cast<int>(members.size()));
        for (std::size_t t = 0; t < members.size(); ++t) {
            fold_of[static_cast<std::size_t>(members[static_cast<std::size_t>(perm[t])])] =
                static_cast<int>(t) % folds;
        }
    }

    int correct = 0;
    for (int f = 0; f < folds; ++f) {
        std::vector<int> train_idx;
        std::vector<int> test_idx;
        for (std::size_t i = 0; i < fold_of.size(); ++i) {
            (fold_of[i] == f ? test_idx : train_idx).push_back(static_cast<int>(i));
        }

        Eigen::MatrixXd train_X(static_cast<Eigen::Index>(train_idx.size()), X.cols());
        std::vector<std::string> train_y;
        train_y.reserve(train_idx.size());
        for (std::size_t i = 0; i < train_idx.size(); ++i) {
            train_X.row(static_cast<Eigen::Index>(i)) = X.row(train_idx[i]);
            train_y.push_back(y[static_cast<std::size_t>(train_idx[i])]);
        }
        Eigen::MatrixXd test_X(static_cast<Eigen::Index>(test_idx.size()), X.cols());
        for (std::size_t i = 0; i < test_idx.size(); ++i) {
            test_X.row(static_cast<Eigen::Index>(i)) = X.row(test_idx[i]);
        }

        classifier.fit(train_X, train_y);
        const std::vector<std::string> predictions = classifier.predict(test_X);
        for (std::size_t i = 0; i < test_idx.size(); ++i) {
            if (predictions[i] == y[static_cast<std::size_t>(test_idx[i])]) {
                ++correct;
            }
        }
    }
    return static_cast<double>(correct) / static_cast<double>(y.size());
}

}

#endif

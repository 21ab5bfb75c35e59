#ifndef SYNGEN_CURVE_CLASSIFIER_HPP
#define SYNGEN_CURVE_CLASSIFIER_HPP

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "../core/error.hpp"

/**
 * @file classifier.hpp
 * @brief Classifier plug-in contract and the name-based registry.
 */

namespace syngen {

/**
 * @brief Supervised classifier over samples-by-features matrices.
 *
 * `fit` replaces any previous training state, so one instance can be reused
 * across cross-validation folds. Labels are arbitrary strings; `predict`
 * only ever returns labels seen during `fit`.
 */
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual void fit(const Eigen::MatrixXd& X, const std::vector<std::string>& y) = 0;
    virtual std::vector<std::string> predict(const Eigen::MatrixXd& X) const = 0;

    /// Spec string that recreates this classifier, e.g. "knn:20".
    virtual std::string name() const = 0;
};

using ClassifierFactory =
    std::function<std::unique_ptr<Classifier>(const std::string& args)>;

namespace classifier_internal {

inline std::map<std::string, ClassifierFactory>& registry() {
    static std::map<std::string, ClassifierFactory> factories;
    return factories;
}

}

/**
 * @brief Register a classifier under a name for use in `make_classifier`.
 *
 * The factory receives the text after the first ':' of the spec (empty when
 * absent) and is free to interpret it. Registration is not synchronized;
 * register plug-ins up front, before any concurrent use.
 */
inline void register_classifier(const std::string& name, ClassifierFactory factory) {
    classifier_internal::registry()[name] = std::move(factory);
}

/**
 * @brief Build a classifier from a spec like "knn:20" or a plug-in name.
 */
inline std::unique_ptr<Classifier> make_classifier(const std::string& spec) {
    const std::size_t colon = spec.find(':');
    const std::string name = spec.substr(0, colon);
    const std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);
    const auto& factories = classifier_internal::registry();
    const auto it = factories.find(name);
    if (it == factories.end()) {
        throw validation_error("unknown classifier '" + name + "'");
    }
    return it->second(args);
}

}

#endif

#ifndef SYNGEN_CORE_ERROR_HPP
#define SYNGEN_CORE_ERROR_HPP

#include <stdexcept>
#include <string>

/**
 * @file error.hpp
 * @brief Exception hierarchy used across the library.
 *
 * Every throw site uses one of these types so that callers (in particular the
 * command line driver) can map failures onto a small set of outcomes without
 * string matching.
 */

namespace syngen {

/**
 * @brief Base class for all library errors.
 */
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

/**
 * @brief Invalid user-supplied input: bad dimensions, negative counts,
 * duplicate identifiers, unknown labels, out-of-range options.
 */
class validation_error : public error {
public:
    explicit validation_error(const std::string& msg) : error(msg) {}
};

/**
 * @brief Malformed file content, e.g. a ragged TSV row or a non-numeric cell.
 */
class parse_error : public validation_error {
public:
    explicit parse_error(const std::string& msg) : validation_error(msg) {}
};

/**
 * @brief Operation applied to data in the wrong state, e.g. a transform that
 * expects raw counts receiving log-scale values.
 */
class state_error : public validation_error {
public:
    explicit state_error(const std::string& msg) : validation_error(msg) {}
};

/**
 * @brief Filesystem problems: missing inputs, unwritable outputs.
 */
class io_error : public validation_error {
public:
    explicit io_error(const std::string& msg) : validation_error(msg) {}
};

/**
 * @brief The request is well-formed but has no answer in the model's domain,
 * e.g. a target accuracy at or above the fitted asymptote.
 */
class infeasible_error : public error {
public:
    explicit infeasible_error(const std::string& msg) : error(msg) {}
};

/**
 * @brief A stored model file could not be restored: truncated or corrupt
 * content.
 */
class serialize_error : public error {
public:
    explicit serialize_error(const std::string& msg) : error(msg) {}
};

/**
 * @brief A stored model file declares a format version or model family this
 * build does not understand.
 */
class version_error : public serialize_error {
public:
    explicit version_error(const std::string& msg) : serialize_error(msg) {}
};

}

#endif

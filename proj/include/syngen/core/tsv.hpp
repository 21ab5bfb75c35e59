#ifndef SYNGEN_CORE_TSV_HPP
#define SYNGEN_CORE_TSV_HPP

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "count_matrix.hpp"
#include "error.hpp"

/**
 * @file tsv.hpp
 * @brief Tab-separated input and output for count matrices and group labels.
 *
 * Count files carry a header line `marker_id<TAB><sample>...` followed by one
 * row per marker. Group files carry `sample_id<TAB>group` lines with no
 * header. Writers reproduce the same layout; integer values are written
 * without a decimal point and non-integers with six significant digits, so
 * repeated writes of the same matrix are byte-identical.
 */

namespace syngen {

namespace tsv_internal {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline double parse_number(const std::string& cell, const std::string& file, std::size_t lineno) {
    if (cell.empty()) {
        throw parse_error(file + ":" + std::to_string(lineno) + ": empty numeric cell");
    }
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v)) {
        throw parse_error(file + ":" + std::to_string(lineno) + ": not a finite number: '" + cell + "'");
    }
    return v;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
}

}

/// Format one value the way the writers do: integers bare, otherwise six
/// significant digits.
inline std::string format_value(double v) {
    if (v == std::floor(v) && std::fabs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

/**
 * @brief Read a count matrix from a TSV file.
 *
 * @param path File to read.
 * @param scale Scale to stamp onto the result; the file format itself does
 * not record one.
 */
inline CountMatrix read_counts_tsv(const std::filesystem::path& path, Scale scale = Scale::raw_counts) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open counts file: " + path.string());
    }
    const std::string fname = path.filename().string();

    std::string line;
    if (!std::getline(in, line)) {
        throw parse_error(fname + ": empty file");
    }
    tsv_internal::strip_cr(line);
    auto header = tsv_internal::split_tabs(line);
    if (header.size() < 2) {
        throw parse_error(fname + ":1: header needs a marker column and at least one sample");
    }

    CountMatrix m;
    m.scale = scale;
    m.sample_ids.assign(header.begin() + 1, header.end());
    const std::size_t ncol = m.sample_ids.size();

    std::vector<double> data;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        tsv_internal::strip_cr(line);
        if (line.empty()) {
            continue;
        }
        auto cells = tsv_internal::split_tabs(line);
        if (cells.size() != ncol + 1) {
            throw parse_error(fname + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(ncol + 1) + " columns, found " + std::to_string(cells.size()));
        }
        m.marker_ids.push_back(cells[0]);
        for (std::size_t j = 1; j < cells.size(); ++j) {
            data.push_back(tsv_internal::parse_number(cells[j], fname, lineno));
        }
    }
    if (m.marker_ids.empty()) {
        throw parse_error(fname + ": no marker rows");
    }

    const Eigen::Index rows = static_cast<Eigen::Index>(m.marker_ids.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(ncol);
    m.values.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m.values(i, j) = data[static_cast<std::size_t>(i * cols + j)];
        }
    }
    m.validate();
    return m;
}

/**
 * @brief Attach group labels from a `sample_id<TAB>group` file to a matrix.
 *
 * Every sample in the matrix must be labelled; labels for unknown samples
 * are rejected so silently misaligned files cannot slip through.
 */
inline void read_groups_tsv(const std::filesystem::path& path, CountMatrix& m) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open groups file: " + path.string());
    }
    const std::string fname = path.filename().string();

    std::unordered_map<std::string, std::string> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        tsv_internal::strip_cr(line);
        if (line.empty()) {
            continue;
        }
        auto cells = tsv_internal::split_tabs(line);
        if (cells.size() != 2) {
            throw parse_error(fname + ":" + std::to_string(lineno) + ": expected 'sample<TAB>group'");
        }
        if (cells[1].empty()) {
            throw parse_error(fname + ":" + std::to_string(lineno) + ": empty group label");
        }
        if (!labels.emplace(cells[0], cells[1]).second) {
            throw validation_error(fname + ": duplicate sample '" + cells[0] + "'");
        }
    }

    std::vector<std::string> aligned;
    aligned.reserve(m.sample_ids.size());
    for (const auto& s : m.sample_ids) {
        auto it = labels.find(s);
        if (it == labels.end()) {
            throw validation_error(fname + ": no group label for sample '" + s + "'");
        }
        aligned.push_back(it->second);
        labels.erase(it);
    }
    if (!labels.empty()) {
        throw validation_error(fname + ": group label for unknown sample '" + labels.begin()->first + "'");
    }
    m.groups = std::move(aligned);
}

/// Write a count matrix in the canonical TSV layout.
inline void write_counts_tsv(const CountMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw io_error("cannot write counts file: " + path.string());
    }
    out << "marker_id";
    for (const auto& s : m.sample_ids) {
        out << '\t' << s;
    }
    out << '\n';
    for (Eigen::Index i = 0; i < m.markers(); ++i) {
        out << m.marker_ids[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < m.samples(); ++j) {
            out << '\t' << format_value(m.values(i, j));
        }
        out << '\n';
    }
    if (!out) {
        throw io_error("write failed: " + path.string());
    }
}

/// Write the matrix's group labels as `sample_id<TAB>group` lines.
inline void write_groups_tsv(const CountMatrix& m, const std::filesystem::path& path) {
    if (!m.groups) {
        throw state_error("matrix has no group labels to write");
    }
    std::ofstream out(path);
    if (!out) {
        throw io_error("cannot write groups file: " + path.string());
    }
    for (std::size_t j = 0; j < m.sample_ids.size(); ++j) {
        out << m.sample_ids[j] << '\t' << (*m.groups)[j] << '\n';
    }
    if (!out) {
        throw io_error("write failed: " + path.string());
    }
}

}

#endif

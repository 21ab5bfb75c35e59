#ifndef SYNGEN_EVAL_REPORT_HPP
#define SYNGEN_EVAL_REPORT_HPP

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "../core/count_matrix.hpp"
#include "../core/error.hpp"
#include "../core/transform.hpp"
#include "../core/tsv.hpp"
#include "clustering.hpp"
#include "concordance.hpp"
#include "de.hpp"
#include "embed.hpp"
#include "summary.hpp"

/**
 * @file report.hpp
 * @brief Assembly of the full fidelity report for a generated/reference pair.
 */

namespace syngen {

/**
 * @brief Fidelity metrics of a generated dataset against its reference.
 *
 * Median absolute differences compare the per-marker summary statistics;
 * `one_minus_pct_zero_markers` is the expressed-marker fraction of each side;
 * `ccc_pcc` scores within-cluster partial correlations (present only when a
 * cluster file was given); `ari`/`cari` score how well clustering the
 * combined samples recovers the expected partition; the last two fields
 * score differential-expression agreement and exist only in the two-group
 * setting.
 */
struct EvalReport {
    double mad_mean = 0.0;
    double mad_sd = 0.0;
    double mad_sparsity = 0.0;
    double expressed_fraction_generated = 0.0;
    double expressed_fraction_reference = 0.0;
    std::optional<double> ccc_pcc;
    double ari = 0.0;
    double cari = 0.0;
    std::optional<double> ccc_neglog10_p;
    std::optional<double> ccc_log2fc;
};

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["mad_mean"] = r.mad_mean;
    j["mad_sd"] = r.mad_sd;
    j["mad_sparsity"] = r.mad_sparsity;
    j["one_minus_pct_zero_markers"] = {{"generated", r.expressed_fraction_generated},
                                       {"reference", r.expressed_fraction_reference}};
    if (r.ccc_pcc) {
        j["ccc_pcc"] = *r.ccc_pcc;
    }
    j["ari"] = r.ari;
    j["cari"] = r.cari;
    if (r.ccc_neglog10_p) {
        j["ccc_neglog10_p"] = *r.ccc_neglog10_p;
    }
    if (r.ccc_log2fc) {
        j["ccc_log2fc"] = *r.ccc_log2fc;
    }
    return j;
}

/// One plotted sample: coordinates plus its origin and group label.
struct EmbeddingRow {
    std::string sample_id;
    double x = 0.0;
    double y = 0.0;
    std::string source;
    std::string group;
};

inline void write_embedding_tsv(const std::vector<EmbeddingRow>& rows,
                                const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw io_error("cannot open '" + path.string() + "' for writing");
    }
    out << "sample_id\tx\ty\tsource\tgroup\n";
    for (const auto& r : rows) {
        out << r.sample_id << '\t' << format_value(r.x) << '\t' << format_value(r.y) << '\t'
            << r.source << '\t' << r.group << '\n';
    }
    if (!out.good()) {
        throw io_error("failed writing '" + path.string() + "'");
    }
}

/// Full evaluation output: the metric report plus embedding plot data.
struct FidelityEvaluation {
    EvalReport report;
    std::vector<EmbeddingRow> embedding;
};

namespace report_internal {

/**
 * @brief Keep only clusters usable in both matrices so the two partial
 * correlation vectors align entry for entry.
 */
inline ClusterMap usable_clusters(const ClusterMap& clusters, const CountMatrix& a,
                                  const CountMatrix& b, Warnings* warnings) {
    const CountMatrix log_a = as_log2p1(a);
    const CountMatrix log_b = as_log2p1(b);
    ClusterMap out;
    for (const auto& [cluster_id, member_ids] : clusters) {
        std::vector<std::string> present;
        for (const auto& id : member_ids) {
            if (a.marker_index(id) >= 0) {
                present.push_back(id);
            }
        }
        std::sort(present.begin(), present.end());
        present.erase(std::unique(present.begin(), present.end()), present.end());
        if (present.size() < 2) {
            warn(warnings, "cluster '" + cluster_id + "' has fewer than two markers in the panel; skipped");
            continue;
        }
        bool constant = false;
        for (const auto& id : present) {
            for (const CountMatrix* side : {&log_a, &log_b}) {
                const auto row = side->values.row(side->marker_index(id));
                if (row.minCoeff() == row.maxCoeff()) {
                    warn(warnings, "cluster '" + cluster_id + "': marker '" + id +
                                       "' is constant; cluster skipped");
                    constant = true;
                    break;
                }
            }
            if (constant) {
                break;
            }
        }
        if (!constant) {
            out.emplace(cluster_id, std::move(present));
        }
    }
    return out;
}

}

/**
 * @brief Compute every applicable fidelity metric for a generated dataset.
 *
 * Both matrices must hold raw counts over the same marker panel. The
 * combined samples are clustered to two groups; with two-group labels on
 * both sides the clustering is scored against the labels and differential
 * expression agreement is added, otherwise the data source (reference vs
 * generated) serves as the expected partition. Partial-correlation
 * concordance is computed when a cluster map is given and at least two
 * aligned coefficients survive.
 */
inline FidelityEvaluation evaluate_fidelity(const CountMatrix& reference,
                                            const CountMatrix& generated,
                                            const ClusterMap& clusters = {},
                                            Warnings* warnings = nullptr) {
    if (reference.scale != Scale::raw_counts || generated.scale != Scale::raw_counts) {
        throw state_error("fidelity evaluation needs raw counts on both sides");
    }
    if (reference.marker_ids != generated.marker_ids) {
        throw validation_error("generated and reference matrices cover different marker panels");
    }

    FidelityEvaluation out;

    const SummaryStats ref_stats = marker_summary(reference);
    const SummaryStats gen_stats = marker_summary(generated);
    out.report.mad_mean = mad_paired(gen_stats.mean, ref_stats.mean);
    out.report.mad_sd = mad_paired(gen_stats.sd, ref_stats.sd);
    out.report.mad_sparsity = mad_paired(gen_stats.sparsity, ref_stats.sparsity);
    out.report.expressed_fraction_generated = expressed_marker_fraction(generated);
    out.report.expressed_fraction_reference = expressed_marker_fraction(reference);

    if (!clusters.empty()) {
        if (reference.samples() <= 2 || generated.samples() <= 2) {
            warn(warnings, "partial correlations need more than two samples per side; skipped");
        } else {
            const ClusterMap usable =
                report_internal::usable_clusters(clusters, reference, generated, warnings);
            const std::vector<double> pcc_ref = partial_correlations(reference, usable, warnings);
            const std::vector<double> pcc_gen = partial_correlations(generated, usable, warnings);
            if (pcc_ref.size() < 2) {
                warn(warnings, "fewer than two partial correlations survived; concordance skipped");
            } else {
                const auto as_vector = [](const std::vector<double>& v) {
                    return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                                             static_cast<Eigen::Index>(v.size()));
                };
                out.report.ccc_pcc = ccc(as_vector(pcc_gen), as_vector(pcc_ref));
            }
        }
    }

    const bool two_group = reference.groups && generated.groups &&
                           reference.group_levels().size() == 2 &&
                           reference.group_levels() == generated.group_levels();

    const CountMatrix combined =
        concat_samples(as_log2p1(reference), as_log2p1(generated), "reference", "generated");
    std::vector<std::string> truth;
    truth.reserve(static_cast<std::size_t>(combined.samples()));
    if (two_group) {
        truth.insert(truth.end(), reference.groups->begin(), reference.groups->end());
        truth.insert(truth.end(), generated.groups->begin(), generated.groups->end());
    } else {
        truth.insert(truth.end(), static_cast<std::size_t>(reference.samples()), "reference");
        truth.insert(truth.end(), static_cast<std::size_t>(generated.samples()), "generated");
    }
    const ClusterAgreement agreement = ward_cluster_ari(combined, truth, 2);
    out.report.ari = agreement.ari;
    out.report.cari = agreement.cari;

    if (two_group) {
        const DeResult de_ref = de_voom_lite(reference);
        const DeResult de_gen = de_voom_lite(generated);
        const DeConcordance conc = de_concordance(de_gen, de_ref);
        out.report.ccc_neglog10_p = conc.ccc_neglog10_p;
        out.report.ccc_log2fc = conc.ccc_log2fc;
    }

    const Eigen::MatrixXd coords = embed_2d(combined);
    out.embedding.reserve(static_cast<std::size_t>(combined.samples()));
    for (Eigen::Index j = 0; j < combined.samples(); ++j) {
        const bool from_reference = j < reference.samples();
        const CountMatrix& side = from_reference ? reference : generated;
        const Eigen::Index local = from_reference ? j : j - reference.samples();
        EmbeddingRow row;
        row.sample_id = side.sample_ids[static_cast<std::size_t>(local)];
        row.x = coords(j, 0);
        row.y = coords(j, 1);
        row.source = from_reference ? "reference" : "generated";
        row.group = side.groups ? (*side.groups)[static_cast<std::size_t>(local)] : "-";
        out.embedding.push_back(row);
    }
    return out;
}

}

#endif

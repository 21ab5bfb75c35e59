#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "syngen/syngen.hpp"

// Command line driver. Subcommands mirror the pipeline stages: preprocess a
// count matrix into a pilot, train a generator and write augmented counts,
// score generated against reference data, measure a classifier learning curve,
// and project the sample size needed for a target accuracy.
//
// Conventions shared by every subcommand:
//   - primary artifact paths go to stdout, one per line; logs and warnings to
//     stderr prefixed "warning:";
//   - each output directory receives a manifest.json recording the resolved
//     configuration, input file fingerprints, and the files written, with no
//     timestamps so reruns are byte-identical;
//   - exit codes: 0 success, 2 invalid input, 3 feasible-input-no-answer,
//     1 unexpected failure.

namespace fs = std::filesystem;
using nlohmann::json;
using namespace syngen;

namespace {

std::string fingerprint_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open " + path.string());
    }
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

json input_entry(const std::string& path) {
    return json{{"path", path}, {"fnv1a64", fingerprint_file(path)}};
}

void print_warnings(const Warnings& warnings) {
    for (const auto& w : warnings) {
        std::cerr << "warning: " << w << '\n';
    }
}

fs::path prepare_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw io_error("cannot create output directory " + dir + ": " + ec.message());
    }
    return fs::path(dir);
}

void write_manifest(const fs::path& dir, const json& manifest) {
    const fs::path path = dir / "manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw io_error("cannot open " + path.string() + " for writing");
    }
    out << manifest.dump(1, '\t') << '\n';
    if (!out) {
        throw io_error("failed while writing " + path.string());
    }
}

void announce(const fs::path& path) {
    std::cout << path.string() << '\n';
}

long long parse_int_token(const std::string& s, const std::string& what) {
    char* end = nullptr;
    const long long v = std::strtoll(s.c_str(), &end, 10);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw validation_error("bad " + what + " '" + s + "'");
    }
    return v;
}

/// Accepts "A:B:S" (A, A+S, ... up to B inclusive) or a comma list "10,20,30".
std::vector<int> parse_sizes(const std::string& text) {
    std::vector<int> sizes;
    if (text.find(':') != std::string::npos) {
        const auto c1 = text.find(':');
        const auto c2 = text.find(':', c1 + 1);
        if (c2 == std::string::npos || text.find(':', c2 + 1) != std::string::npos) {
            throw validation_error("size range must look like start:stop:step, got '" + text + "'");
        }
        const long long start = parse_int_token(text.substr(0, c1), "size range");
        const long long stop = parse_int_token(text.substr(c1 + 1, c2 - c1 - 1), "size range");
        const long long step = parse_int_token(text.substr(c2 + 1), "size range");
        if (start <= 0 || step <= 0 || stop < start) {
            throw validation_error("size range '" + text + "' is empty or non-positive");
        }
        for (long long n = start; n <= stop; n += step) {
            sizes.push_back(static_cast<int>(n));
        }
        return sizes;
    }
    std::size_t begin = 0;
    while (true) {
        const std::size_t comma = text.find(',', begin);
        const std::string tok = text.substr(begin, comma == std::string::npos ? comma : comma - begin);
        const long long n = parse_int_token(tok, "size list");
        if (n <= 0) {
            throw validation_error("sizes must be positive, got '" + tok + "'");
        }
        sizes.push_back(static_cast<int>(n));
        if (comma == std::string::npos) {
            break;
        }
        begin = comma + 1;
    }
    return sizes;
}

/// Accepts "fixed:N", "early", and "early:MAX".
void apply_epoch_setting(const std::string& text, TrainingPolicy& policy) {
    if (text == "early") {
        policy.strategy = TrainingPolicy::Strategy::early_stop;
        return;
    }
    if (text.rfind("early:", 0) == 0) {
        policy.strategy = TrainingPolicy::Strategy::early_stop;
        policy.max_epochs = static_cast<int>(parse_int_token(text.substr(6), "epoch cap"));
        return;
    }
    if (text.rfind("fixed:", 0) == 0) {
        policy.strategy = TrainingPolicy::Strategy::fixed;
        policy.epochs = static_cast<int>(parse_int_token(text.substr(6), "epoch count"));
        return;
    }
    throw validation_error("bad epoch setting '" + text + "' (expected fixed:<n> or early[:<max>])");
}

/// Cluster files list one `cluster_id<TAB>marker_id` pair per line, no header.
ClusterMap read_clusters_tsv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open clusters file: " + path.string());
    }
    ClusterMap clusters;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        tsv_internal::strip_cr(line);
        if (line.empty()) {
            continue;
        }
        const auto cells = tsv_internal::split_tabs(line);
        if (cells.size() != 2 || cells[0].empty() || cells[1].empty()) {
            throw parse_error(path.filename().string() + ":" + std::to_string(lineno) +
                              ": expected cluster_id<TAB>marker_id");
        }
        clusters[cells[0]].push_back(cells[1]);
    }
    return clusters;
}

/// Split `n` generated samples across the pilot's class levels in proportion
/// to the pilot, largest fractional remainders first.
std::vector<std::string> allocate_labels(const CountMatrix& pilot, int n) {
    const std::vector<std::string> levels = pilot.group_levels();
    const double total = static_cast<double>(pilot.samples());
    std::vector<int> quota(levels.size(), 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    int assigned = 0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const double share =
            static_cast<double>(pilot.group_columns(levels[i]).size()) / total * n;
        quota[i] = static_cast<int>(share);
        assigned += quota[i];
        remainders.emplace_back(-(share - static_cast<double>(quota[i])), i);
    }
    std::sort(remainders.begin(), remainders.end());
    for (int extra = 0; extra < n - assigned; ++extra) {
        ++quota[remainders[static_cast<std::size_t>(extra)].second];
    }
    std::vector<std::string> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < levels.size(); ++i) {
        labels.insert(labels.end(), static_cast<std::size_t>(quota[i]), levels[i]);
    }
    return labels;
}

struct TrainOptions {
    std::string model;
    std::string offline = "none";
    std::string epochs = "early";
    std::string pretrain;
    std::string pretrain_groups;
    std::string pretrain_epochs;
    double batch_frac = 0.0;
    double learning_rate = 5e-4;
    CLI::Option* batch_opt = nullptr;

    void add_flags(CLI::App& cmd, bool model_required) {
        auto* model_opt =
            cmd.add_option("--model", model,
                           "Generator family, e.g. vae:1-10, cvae:1-100, wgangp, maf");
        if (model_required) {
            model_opt->required();
        }
        cmd.add_option("--offline", offline,
                       "Pre-training expansion: none, gaussian:R[:sigma], or ae:T")
            ->capture_default_str();
        cmd.add_option("--epochs", epochs, "Training length: fixed:<n> or early[:<max>]")
            ->capture_default_str();
        batch_opt = cmd.add_option("--batch-frac", batch_frac,
                                   "Batch size as a fraction of the training set");
        cmd.add_option("--learning-rate", learning_rate, "Optimiser step size")
            ->capture_default_str();
        cmd.add_option("--pretrain", pretrain, "Auxiliary counts TSV to warm the model up on")
            ->check(CLI::ExistingFile);
        cmd.add_option("--pretrain-groups", pretrain_groups,
                       "Group labels for the auxiliary cohort")
            ->check(CLI::ExistingFile);
        cmd.add_option("--pretrain-epochs", pretrain_epochs,
                       "Training length for the warm-up phase; defaults to --epochs");
    }

    TrainingPolicy make_policy(std::uint64_t seed) const {
        TrainingPolicy policy;
        apply_epoch_setting(epochs, policy);
        if (batch_opt && batch_opt->count() > 0) {
            policy.batch_fraction = batch_frac;
        }
        policy.learning_rate = learning_rate;
        policy.seed = seed;
        policy.validate();
        return policy;
    }

    void record(json& config) const {
        config["model"] = model;
        config["offline"] = offline;
        config["epochs"] = epochs;
        config["learning_rate"] = learning_rate;
        if (batch_opt && batch_opt->count() > 0) {
            config["batch_frac"] = batch_frac;
        }
        if (!pretrain.empty()) {
            config["pretrain"] = pretrain;
            config["pretrain_epochs"] = pretrain_epochs.empty() ? epochs : pretrain_epochs;
            if (!pretrain_groups.empty()) {
                config["pretrain_groups"] = pretrain_groups;
            }
        }
    }

    void fingerprint(json& inputs) const {
        if (!pretrain.empty()) {
            inputs["pretrain"] = input_entry(pretrain);
            if (!pretrain_groups.empty()) {
                inputs["pretrain_groups"] = input_entry(pretrain_groups);
            }
        }
    }

    std::unique_ptr<Generator> train(const CountMatrix& pilot_raw, std::uint64_t seed) const {
        const ModelSpec spec = ModelSpec::parse(model);
        const OfflineConfig off = OfflineConfig::parse(offline);
        const TrainingPolicy policy = make_policy(seed);

        const CountMatrix logview = as_log2p1(pilot_raw);
        const CountMatrix expanded = apply_offline(logview, off, policy);

        if (pretrain.empty()) {
            return train_generator(spec, expanded, policy);
        }

        CountMatrix source = read_counts_tsv(pretrain);
        if (!pretrain_groups.empty()) {
            read_groups_tsv(pretrain_groups, source);
        }
        TrainingPolicy warmup = policy;
        if (!pretrain_epochs.empty()) {
            apply_epoch_setting(pretrain_epochs, warmup);
            warmup.validate();
        }
        auto model_ptr = make_generator(spec, expanded.marker_ids,
                                        conditioning_levels(spec, expanded), policy.seed);
        pretrain_finetune(*model_ptr, as_log2p1(source), expanded, warmup, policy);
        return model_ptr;
    }
};

CountMatrix load_counts(const std::string& counts, const std::string& groups) {
    CountMatrix m = read_counts_tsv(counts);
    if (!groups.empty()) {
        read_groups_tsv(groups, m);
    }
    return m;
}

int run_preprocess(const std::string& counts, const std::string& groups,
                   const std::string& normalize, double filter_mean,
                   std::optional<double> filter_sd, std::optional<int> pilot_size,
                   std::uint64_t seed, const std::string& out) {
    const CountMatrix input = load_counts(counts, groups);
    const Eigen::VectorXd libsizes = input.values.colwise().sum();

    const CountMatrix normalized = normalize_depth(input, parse_normalize_method(normalize));
    Warnings warnings;
    CountMatrix pilot = filter_markers(normalized, filter_mean, filter_sd, &warnings);
    if (pilot_size) {
        pilot = subsample_pilot(pilot, *pilot_size, seed);
    }
    print_warnings(warnings);
    std::cerr << "kept " << pilot.markers() << " of " << input.markers() << " markers, "
              << pilot.samples() << " samples\n";

    const fs::path dir = prepare_out_dir(out);
    write_counts_tsv(pilot, dir / "pilot.tsv");
    announce(dir / "pilot.tsv");
    json outputs = json::array({"pilot.tsv"});
    if (pilot.groups) {
        write_groups_tsv(pilot, dir / "groups.tsv");
        announce(dir / "groups.tsv");
        outputs.push_back("groups.tsv");
    }

    json config{{"counts", counts},   {"normalize", normalize},
                {"filter_mean", filter_mean}, {"seed", seed},
                {"out", out}};
    if (!groups.empty()) {
        config["groups"] = groups;
    }
    if (filter_sd) {
        config["filter_sd"] = *filter_sd;
    }
    if (pilot_size) {
        config["pilot_size"] = *pilot_size;
    }
    json inputs{{"counts", input_entry(counts)}};
    if (!groups.empty()) {
        inputs["groups"] = input_entry(groups);
    }
    json stats{{"markers_before", input.markers()},
               {"markers_after", pilot.markers()},
               {"samples", pilot.samples()},
               {"library_sizes", std::vector<double>(libsizes.begin(), libsizes.end())}};

    write_manifest(dir, json{{"command", "preprocess"},
                             {"config", config},
                             {"inputs", inputs},
                             {"outputs", outputs},
                             {"stats", stats}});
    return 0;
}

int run_augment(const std::string& pilot_path, const std::string& groups,
                const TrainOptions& train, int n, int replicates, std::uint64_t seed,
                const std::string& out) {
    if (n <= 0) {
        throw validation_error("--n must be positive");
    }
    if (replicates <= 0) {
        throw validation_error("--replicates must be positive");
    }
    const CountMatrix pilot = load_counts(pilot_path, groups);
    const auto model = train.train(pilot, seed);

    std::vector<std::string> labels;
    if (model->conditional()) {
        labels = allocate_labels(pilot, n);
    }

    const fs::path dir = prepare_out_dir(out);
    json outputs = json::array();
    for (int k = 1; k <= replicates; ++k) {
        const std::uint64_t draw_seed = stable_hash(seed, 0x726570ULL, static_cast<std::uint64_t>(k));
        const CountMatrix batch =
            model->generate(n, draw_seed, model->conditional() ? &labels : nullptr);
        const CountMatrix counts = inverse_log2p1(batch);
        const std::string stem = "generated_" + std::to_string(k);
        write_counts_tsv(counts, dir / (stem + ".tsv"));
        announce(dir / (stem + ".tsv"));
        outputs.push_back(stem + ".tsv");
        if (counts.groups) {
            write_groups_tsv(counts, dir / (stem + ".groups.tsv"));
            outputs.push_back(stem + ".groups.tsv");
        }
    }

    save_generator(*model, (dir / "model.json").string());
    announce(dir / "model.json");
    outputs.push_back("model.json");
    write_training_log_tsv(model->training_log(), dir / "training_log.tsv");
    outputs.push_back("training_log.tsv");

    json config{{"pilot", pilot_path}, {"n", n}, {"replicates", replicates},
                {"seed", seed},        {"out", out}};
    if (!groups.empty()) {
        config["groups"] = groups;
    }
    train.record(config);
    json inputs{{"pilot", input_entry(pilot_path)}};
    if (!groups.empty()) {
        inputs["groups"] = input_entry(groups);
    }
    train.fingerprint(inputs);

    write_manifest(dir, json{{"command", "augment"},
                             {"config", config},
                             {"inputs", inputs},
                             {"outputs", outputs}});
    return 0;
}

int run_evaluate(const std::string& reference, const std::string& generated,
                 const std::string& reference_groups, const std::string& generated_groups,
                 const std::string& clusters_path, bool two_group, const std::string& out) {
    const CountMatrix ref = load_counts(reference, reference_groups);
    const CountMatrix gen = load_counts(generated, generated_groups);

    if (two_group) {
        if (!ref.groups || !gen.groups) {
            throw validation_error("--two-group needs group labels for both matrices");
        }
        if (ref.group_levels() != gen.group_levels() || ref.group_levels().size() != 2) {
            throw validation_error(
                "--two-group needs the same two group levels on both matrices");
        }
    }

    ClusterMap clusters;
    bool clusters_loaded = false;
    if (!clusters_path.empty()) {
        if (fs::exists(clusters_path)) {
            clusters = read_clusters_tsv(clusters_path);
            clusters_loaded = true;
        } else {
            std::cerr << "warning: clusters file " << clusters_path
                      << " not found; skipping the partial-correlation comparison\n";
        }
    }

    Warnings warnings;
    const FidelityEvaluation fe = evaluate_fidelity(ref, gen, clusters, &warnings);
    print_warnings(warnings);

    const fs::path dir = prepare_out_dir(out);
    {
        std::ofstream report(dir / "report.json", std::ios::binary);
        if (!report) {
            throw io_error("cannot open " + (dir / "report.json").string() + " for writing");
        }
        report << report_to_json(fe.report).dump(1, '\t') << '\n';
        if (!report) {
            throw io_error("failed while writing " + (dir / "report.json").string());
        }
    }
    announce(dir / "report.json");
    write_embedding_tsv(fe.embedding, dir / "embedding.tsv");
    announce(dir / "embedding.tsv");

    json config{{"reference", reference},
                {"generated", generated},
                {"two_group", two_group},
                {"out", out}};
    if (!reference_groups.empty()) {
        config["reference_groups"] = reference_groups;
    }
    if (!generated_groups.empty()) {
        config["generated_groups"] = generated_groups;
    }
    if (!clusters_path.empty()) {
        config["clusters"] = clusters_path;
    }
    json inputs{{"reference", input_entry(reference)}, {"generated", input_entry(generated)}};
    if (!reference_groups.empty()) {
        inputs["reference_groups"] = input_entry(reference_groups);
    }
    if (!generated_groups.empty()) {
        inputs["generated_groups"] = input_entry(generated_groups);
    }
    if (clusters_loaded) {
        inputs["clusters"] = input_entry(clusters_path);
    }

    write_manifest(dir, json{{"command", "evaluate"},
                             {"config", config},
                             {"inputs", inputs},
                             {"outputs", json::array({"embedding.tsv", "report.json"})}});
    return 0;
}

int run_curve(const std::string& pilot_path, const std::string& groups, const TrainOptions& train,
              const std::string& sizes_text, const std::string& classifier, int repeats, int folds,
              bool total_sizes, std::uint64_t seed, const std::string& out) {
    const CountMatrix pilot = load_counts(pilot_path, groups);

    HarnessConfig cfg;
    cfg.sizes = parse_sizes(sizes_text);
    cfg.classifier = classifier;
    cfg.repeats = repeats;
    cfg.folds = folds;
    cfg.per_group = !total_sizes;

    const fs::path dir = prepare_out_dir(out);
    json outputs = json::array();
    CurveArtifact artifact;
    if (!train.model.empty()) {
        const auto model = train.train(pilot, seed);
        artifact = accuracy_curve_from_generator(*model, cfg, seed);
        save_generator(*model, (dir / "model.json").string());
        announce(dir / "model.json");
        outputs.push_back("model.json");
    } else {
        artifact = accuracy_curve_from_data(pilot, cfg, seed);
    }

    {
        std::ofstream curve(dir / "curve.json", std::ios::binary);
        if (!curve) {
            throw io_error("cannot open " + (dir / "curve.json").string() + " for writing");
        }
        curve << curve_to_json(artifact).dump(1, '\t') << '\n';
        if (!curve) {
            throw io_error("failed while writing " + (dir / "curve.json").string());
        }
    }
    announce(dir / "curve.json");
    outputs.push_back("curve.json");
    write_curve_plot_tsv(artifact.fit, dir / "curve_plot.tsv");
    announce(dir / "curve_plot.tsv");
    outputs.push_back("curve_plot.tsv");
    if (artifact.fit.degenerate) {
        std::cerr << "warning: the fitted curve is constant in the sample size; "
                     "projections from it will not be meaningful\n";
    }

    json config{{"pilot", pilot_path},
                {"sizes", sizes_text},
                {"classifier", classifier},
                {"repeats", repeats},
                {"folds", folds},
                {"per_group", !total_sizes},
                {"seed", seed},
                {"out", out}};
    if (!groups.empty()) {
        config["groups"] = groups;
    }
    if (!train.model.empty()) {
        train.record(config);
    }
    json inputs{{"pilot", input_entry(pilot_path)}};
    if (!groups.empty()) {
        inputs["groups"] = input_entry(groups);
    }
    if (!train.model.empty()) {
        train.fingerprint(inputs);
    }

    write_manifest(dir, json{{"command", "curve"},
                             {"config", config},
                             {"inputs", inputs},
                             {"outputs", outputs}});
    return 0;
}

IplfFit fit_from_curve_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open curve file: " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error&) {
        throw serialize_error(path.string() + ": not a valid curve file");
    }
    IplfFit fit;
    try {
        fit.params.a = j.at("params").at("a").get<double>();
        fit.params.b = j.at("params").at("b").get<double>();
        fit.params.c = j.at("params").at("c").get<double>();
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                fit.covariance(r, c) = j.at("covariance").at(static_cast<std::size_t>(r))
                                           .at(static_cast<std::size_t>(c))
                                           .get<double>();
            }
        }
        fit.residual_scale = j.at("residual_scale").get<double>();
        for (const auto& n : j.at("sizes")) {
            fit.sizes.push_back(n.get<double>());
        }
        for (const auto& y : j.at("mean_accuracy")) {
            fit.accuracies.push_back(y.get<double>());
        }
    } catch (const json::exception& e) {
        throw serialize_error(path.string() + ": " + e.what());
    }
    fit.params.validate();
    return fit;
}

/// Smallest sample size at which the chosen edge of the 95% band reaches the
/// target; a hint only, since the band edges need not be monotone.
std::optional<long long> band_crossing(const IplfFit& fit, double target, bool upper_edge) {
    if (!fit.interval_available()) {
        return std::nullopt;
    }
    const auto edge = [&](long long n) {
        const IplfPrediction p = predict_with_interval(fit, static_cast<double>(n));
        return upper_edge ? *p.hi95 : *p.lo95;
    };
    if (edge(1) >= target) {
        return 1;
    }
    long long lo = 1;
    long long hi = 2;
    while (edge(hi) < target) {
        lo = hi;
        if (hi > static_cast<long long>(5e17)) {
            return std::nullopt;
        }
        hi *= 2;
    }
    while (hi - lo > 1) {
        const long long mid = lo + (hi - lo) / 2;
        (edge(mid) >= target ? hi : lo) = mid;
    }
    return hi;
}

int run_project(const std::string& curve_path, double target) {
    const IplfFit fit = fit_from_curve_json(curve_path);
    const long long n_star = project_sample_size(fit.params, target);

    const auto lo_hint = band_crossing(fit, target, true);
    const auto hi_hint = band_crossing(fit, target, false);
    const auto show = [](const std::optional<long long>& v) {
        return v ? std::to_string(*v) : std::string("-");
    };
    std::cout << n_star << ' ' << show(lo_hint) << ' ' << show(hi_hint) << '\n';
    return 0;
}

}

int main(int argc, char** argv) {
    CLI::App app{"Synthetic count data augmentation and sample size planning"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value configuration file; flags take precedence");

    auto* pre = app.add_subcommand("preprocess", "Normalize, filter, and optionally subsample counts");
    std::string pre_counts, pre_groups, pre_normalize = "none", pre_out;
    double pre_filter_mean = 0.0;
    double pre_filter_sd = 0.0;
    int pre_pilot_size = 0;
    std::uint64_t pre_seed = 0;
    pre->add_option("--counts", pre_counts, "Raw counts TSV")->required()->check(CLI::ExistingFile);
    pre->add_option("--groups", pre_groups, "Group labels TSV")->check(CLI::ExistingFile);
    pre->add_option("--normalize", pre_normalize, "Depth normalization: none, tc, uq, or tmm")
        ->capture_default_str();
    pre->add_option("--filter-mean", pre_filter_mean, "Keep markers with mean log2(count+1) at least this")
        ->required();
    auto* pre_sd_opt = pre->add_option("--filter-sd", pre_filter_sd,
                                       "Also require at least this log-scale standard deviation");
    auto* pre_pilot_opt = pre->add_option("--pilot-size", pre_pilot_size,
                                          "Subsample this many samples per group (total without groups)");
    pre->add_option("--seed", pre_seed, "Seed for the pilot draw")->capture_default_str();
    pre->add_option("--out", pre_out, "Output directory")->required();

    auto* aug = app.add_subcommand("augment", "Train a generator and write synthetic counts");
    std::string aug_pilot, aug_groups, aug_out;
    TrainOptions aug_train;
    int aug_n = 0;
    int aug_replicates = 1;
    std::uint64_t aug_seed = 0;
    aug->add_option("--pilot", aug_pilot, "Pilot counts TSV")->required()->check(CLI::ExistingFile);
    aug->add_option("--groups", aug_groups, "Pilot group labels TSV")->check(CLI::ExistingFile);
    aug_train.add_flags(*aug, true);
    aug->add_option("--n", aug_n, "Samples per generated replicate")->required();
    aug->add_option("--replicates", aug_replicates, "Generated replicate count")->capture_default_str();
    aug->add_option("--seed", aug_seed, "Seed for training and generation")->capture_default_str();
    aug->add_option("--out", aug_out, "Output directory")->required();

    auto* eva = app.add_subcommand("evaluate", "Score generated counts against a reference");
    std::string eva_reference, eva_generated, eva_ref_groups, eva_gen_groups, eva_clusters, eva_out;
    bool eva_two_group = false;
    eva->add_option("--reference", eva_reference, "Reference counts TSV")
        ->required()
        ->check(CLI::ExistingFile);
    eva->add_option("--generated", eva_generated, "Generated counts TSV")
        ->required()
        ->check(CLI::ExistingFile);
    eva->add_option("--reference-groups", eva_ref_groups, "Reference group labels TSV")
        ->check(CLI::ExistingFile);
    eva->add_option("--generated-groups", eva_gen_groups, "Generated group labels TSV")
        ->check(CLI::ExistingFile);
    eva->add_option("--clusters", eva_clusters,
                    "Marker cluster TSV for the partial-correlation comparison; "
                    "a missing file is skipped with a warning");
    eva->add_flag("--two-group", eva_two_group,
                  "Require matching two-group labels and the differential-test comparison");
    eva->add_option("--out", eva_out, "Output directory")->required();

    auto* cur = app.add_subcommand("curve", "Measure a classifier learning curve and fit it");
    std::string cur_pilot, cur_groups, cur_sizes, cur_classifier = "knn:20", cur_out;
    TrainOptions cur_train;
    int cur_repeats = 30;
    int cur_folds = 5;
    bool cur_total = false;
    std::uint64_t cur_seed = 0;
    cur->add_option("--pilot", cur_pilot, "Pilot counts TSV")->required()->check(CLI::ExistingFile);
    cur->add_option("--groups", cur_groups, "Pilot group labels TSV")->check(CLI::ExistingFile);
    cur_train.add_flags(*cur, false);
    cur->add_option("--sizes", cur_sizes, "Candidate sizes: start:stop:step or a comma list")
        ->required();
    cur->add_option("--classifier", cur_classifier, "Classifier spec, e.g. knn:20")
        ->capture_default_str();
    cur->add_option("--repeats", cur_repeats, "Repeats per candidate size")->capture_default_str();
    cur->add_option("--folds", cur_folds, "Cross-validation folds")->capture_default_str();
    cur->add_flag("--total-sizes", cur_total,
                  "Treat sizes as totals instead of per-group counts");
    cur->add_option("--seed", cur_seed, "Seed for subsampling, generation, and folds")
        ->capture_default_str();
    cur->add_option("--out", cur_out, "Output directory")->required();

    auto* pro = app.add_subcommand("project", "Invert a fitted curve for a target accuracy");
    std::string pro_curve;
    double pro_target = 0.0;
    pro->add_option("--curve", pro_curve, "curve.json from the curve subcommand")
        ->required()
        ->check(CLI::ExistingFile);
    pro->add_option("--target-accuracy", pro_target, "Desired accuracy in (0,1)")->required();

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(pre)) {
            return run_preprocess(pre_counts, pre_groups, pre_normalize, pre_filter_mean,
                                  pre_sd_opt->count() ? std::optional<double>(pre_filter_sd)
                                                      : std::nullopt,
                                  pre_pilot_opt->count() ? std::optional<int>(pre_pilot_size)
                                                         : std::nullopt,
                                  pre_seed, pre_out);
        }
        if (app.got_subcommand(aug)) {
            return run_augment(aug_pilot, aug_groups, aug_train, aug_n, aug_replicates, aug_seed,
                               aug_out);
        }
        if (app.got_subcommand(eva)) {
            return run_evaluate(eva_reference, eva_generated, eva_ref_groups, eva_gen_groups,
                                eva_clusters, eva_two_group, eva_out);
        }
        if (app.got_subcommand(cur)) {
            return run_curve(cur_pilot, cur_groups, cur_train, cur_sizes, cur_classifier,
                             cur_repeats, cur_folds, cur_total, cur_seed, cur_out);
        }
        if (app.got_subcommand(pro)) {
            return run_project(pro_curve, pro_target);
        }
        return 1;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const infeasible_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << '\n';
        return 1;
    }
}

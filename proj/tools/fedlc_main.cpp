// fedlc command line: run, partition, diagnose, sweep, plot.
// Exit codes: 0 ok, 1 runtime failure, 2 configuration error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fedlc/config.hpp"
#include "fedlc/data.hpp"
#include "fedlc/diagnostics.hpp"
#include "fedlc/error.hpp"
#include "fedlc/fileio.hpp"
#include "fedlc/harness.hpp"
#include "fedlc/partition.hpp"

namespace fs = std::filesystem;
using namespace fedlc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct DatasetArgs {
    std::string csv;
    std::size_t classes = 0;
    std::string idx_images;
    std::string idx_labels;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--csv", csv, "CSV dataset (label first, then features)");
        cmd->add_option("--classes", classes, "number of classes (CSV; inferred for IDX when 0)");
        cmd->add_option("--idx-images", idx_images, "IDX image file");
        cmd->add_option("--idx-labels", idx_labels, "IDX label file");
    }

    Dataset load() const {
        if (!csv.empty()) {
            if (classes < 2) throw ConfigError("classes", "--classes >= 2 is required with --csv");
            return load_csv(csv, classes);
        }
        if (!idx_images.empty() || !idx_labels.empty()) {
            if (idx_images.empty() || idx_labels.empty()) {
                throw ConfigError("idx", "--idx-images and --idx-labels go together");
            }
            return load_idx(idx_images, idx_labels, classes);
        }
        throw ConfigError("dataset", "pass --csv or --idx-images/--idx-labels");
    }
};

void apply_overrides(ExperimentConfig& cfg, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError(o, "--set expects key=value");
        set_config_field(cfg, o.substr(0, eq), o.substr(eq + 1));
    }
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FedLC federated learning simulator"};
    app.require_subcommand(1);

    // run
    std::string run_config;
    std::vector<std::string> run_set;
    std::string run_out;
    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("config", run_config, "config file")->required();
    run->add_option("--set", run_set, "override a field, key=value (repeatable)");
    run->add_option("--output-dir", run_out, "override output_dir");

    // partition
    DatasetArgs part_data;
    std::string part_scheme = "quantity", part_out;
    std::size_t part_clients = 10, part_alpha = 2, part_min = 1;
    double part_beta = 0.5;
    std::uint64_t part_seed = 0;
    auto* part = app.add_subcommand("partition", "partition a dataset and write a manifest");
    part_data.add_to(part);
    part->add_option("--scheme", part_scheme, "quantity | dirichlet");
    part->add_option("--clients", part_clients, "number of clients");
    part->add_option("--alpha", part_alpha, "label shards per client (quantity)");
    part->add_option("--beta", part_beta, "Dirichlet concentration (dirichlet)");
    part->add_option("--min-size", part_min, "minimum examples per client (dirichlet)");
    part->add_option("--seed", part_seed, "partition seed");
    part->add_option("--out", part_out, "manifest JSON path")->required();

    // diagnose
    DatasetArgs diag_data;
    std::string diag_ckpt, diag_manifest, diag_out = "diagnose";
    std::optional<std::size_t> diag_client;
    double diag_tau = 1.0, diag_factor = kDefaultDominanceFactor, diag_ratio = kDefaultThresholdRatio;
    bool diag_probe = false;
    std::size_t probe_trials = 100;
    std::uint64_t probe_seed = 0;
    auto* diag = app.add_subcommand("diagnose", "per-class accuracy, deviation bounds and margins");
    diag->add_option("--checkpoint", diag_ckpt, "model checkpoint")->required();
    diag_data.add_to(diag);
    diag->add_option("--manifest", diag_manifest, "partition manifest; restricts to --client");
    diag->add_option("--client", diag_client, "client index within the manifest");
    diag->add_option("--tau", diag_tau, "calibration strength for the calibrated bound");
    diag->add_option("--factor", diag_factor, "dominance factor for flagging pairs");
    diag->add_option("--ratio", diag_ratio, "majority threshold as a fraction of the largest class");
    diag->add_option("--out", diag_out, "output directory");
    diag->add_flag("--probe", diag_probe, "run the minority-row sign probe");
    diag->add_option("--probe-trials", probe_trials, "probe trials");
    diag->add_option("--probe-seed", probe_seed, "probe base seed");

    // sweep
    std::string sweep_config, sweep_axis, sweep_values, sweep_methods = "fedavg,fedavg+fedlc";
    std::vector<std::string> sweep_set;
    auto* sweep = app.add_subcommand("sweep", "run a one-axis sweep over several methods");
    sweep->add_option("config", sweep_config, "base config file")->required();
    sweep->add_option("--axis", sweep_axis, "config key to vary")->required();
    sweep->add_option("--values", sweep_values, "comma-separated axis values")->required();
    sweep->add_option("--methods", sweep_methods, "comma-separated methods, e.g. fedavg,fedavg+fedlc+prox");
    sweep->add_option("--set", sweep_set, "override a base field, key=value (repeatable)");

    // plot
    std::vector<std::string> plot_inputs;
    std::string plot_out;
    auto* plot = app.add_subcommand("plot", "accuracy-vs-round SVG from metrics JSONL files");
    plot->add_option("metrics", plot_inputs, "metrics.jsonl files");
    plot->add_option("--out", plot_out, "output SVG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) {
            auto cfg = load_config(run_config);
            apply_overrides(cfg, run_set);
            if (!run_out.empty()) cfg.output_dir = run_out;
            validate_config(cfg);
            const auto art = run_experiment(cfg, &std::cerr);
            std::cout << art.summary_line(cfg.name) << '\n';
        } else if (*part) {
            const Dataset ds = part_data.load();
            if (part_clients == 0) throw ConfigError("clients", "must be at least 1");
            Partition p;
            if (part_scheme == "quantity") {
                if (part_alpha == 0) throw ConfigError("alpha", "must be at least 1");
                p = partition_quantity(ds, part_clients, part_alpha, part_seed);
            } else if (part_scheme == "dirichlet") {
                if (!(part_beta > 0.0)) throw ConfigError("beta", "must be positive");
                if (part_min == 0) throw ConfigError("min-size", "must be at least 1");
                p = partition_dirichlet(ds, part_clients, part_beta, part_min, part_seed);
            } else {
                throw ConfigError("scheme", "unknown scheme '" + part_scheme + "'");
            }
            const fs::path out = resolve_output_path(part_out);
            save_manifest(p, out);
            const auto report = skew_report(p, ds);
            auto stem = out;
            stem.replace_extension();
            write_file_atomic(stem.string() + "_skew.csv", report.histogram_csv());
            write_file_atomic(stem.string() + "_tv.csv", report.distance_csv());
            std::cout << "wrote " << out.string() << " (" << p.scheme.describe() << ", " << p.num_clients
                      << " clients)\n";
        } else if (*diag) {
            const ModelParams params = load_checkpoint(diag_ckpt);
            Dataset ds = diag_data.load();
            if (!diag_manifest.empty()) {
                if (!diag_client) throw ConfigError("client", "--client is required with --manifest");
                const auto p = load_manifest(diag_manifest);
                if (*diag_client >= p.num_clients) throw ConfigError("client", "out of range");
                check_partition(p, ds.size());
                ds = ds.subset(p.assignments[*diag_client], ds.name + "/client" + std::to_string(*diag_client));
            }
            if (ds.num_classes < params.arch().num_classes) ds.num_classes = params.arch().num_classes;
            const fs::path out = resolve_output_path(diag_out);
            const auto acc = per_class_accuracy(params, ds);
            write_file_atomic(out / "per_class.csv", acc.to_csv());

            const auto counts = class_counts(ds);
            const auto stats = class_stats(counts, diag_ratio);
            const auto plain = deviation_report(class_aggregates(params, ds), stats, diag_factor);
            write_file_atomic(out / "deviation_plain.csv", plain.to_csv());
            auto calib = make_calibration(diag_tau, counts);
            const auto calibrated =
                deviation_report(class_aggregates_calibrated(params, ds, calib), stats, diag_factor, &calib);
            write_file_atomic(out / "deviation_calibrated.csv", calibrated.to_csv());
            write_file_atomic(out / "margins.csv", margin_report(params, ds).to_csv());
            std::cout << "overall accuracy " << acc.overall << ", mean per-class accuracy " << acc.mean << '\n';

            if (diag_probe) {
                ProbeConstruction skewed;
                ProbeConstruction balanced;
                balanced.minority_count = balanced.majority_count;
                const auto ce = run_sign_probe(skewed, LossKind::standard_ce, diag_tau, probe_trials, probe_seed);
                const auto lc = run_sign_probe(skewed, LossKind::fedlc, diag_tau, probe_trials, probe_seed);
                const auto ctl = run_sign_probe(balanced, LossKind::standard_ce, diag_tau, probe_trials, probe_seed);
                nlohmann::json j{
                    {"trials", probe_trials},
                    {"count_ratio", static_cast<double>(skewed.majority_count) / skewed.minority_count},
                    {"standard_ce_minority_negative_fraction", ce.minority_negative_fraction},
                    {"fedlc_minority_negative_fraction", lc.minority_negative_fraction},
                    {"balanced_minority_negative_fraction", ctl.minority_negative_fraction},
                    {"standard_ce_majority_positive_fraction", ce.majority_positive_fraction},
                    {"tau", diag_tau}};
                write_file_atomic(out / "probe.json", j.dump(2) + "\n");
                std::cout << "probe: ce " << ce.minority_negative_fraction << ", fedlc "
                          << lc.minority_negative_fraction << ", balanced " << ctl.minority_negative_fraction
                          << '\n';
            }
        } else if (*sweep) {
            auto cfg = load_config(sweep_config);
            apply_overrides(cfg, sweep_set);
            validate_config(cfg);
            SweepSpec spec{sweep_axis, split_list(sweep_values), split_list(sweep_methods)};
            const auto res = run_sweep(cfg, spec, &std::cerr);
            std::cout << "wrote " << res.table_csv.string() << " (" << res.runs_executed << " run, "
                      << res.runs_skipped << " skipped)\n";
        } else if (*plot) {
            std::vector<fs::path> inputs(plot_inputs.begin(), plot_inputs.end());
            const fs::path svg = resolve_output_path(plot_out);
            emit_plot(inputs, svg);
            std::cout << "wrote " << svg.string() << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

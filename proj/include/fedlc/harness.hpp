#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fedlc/config.hpp"
#include "fedlc/data.hpp"
#include "fedlc/diagnostics.hpp"
#include "fedlc/fedcore.hpp"
#include "fedlc/model.hpp"
#include "fedlc/partition.hpp"

namespace fedlc {

inline constexpr const char* kOutputRootEnv = "FEDLC_OUTPUT_ROOT";

// Relative paths are placed under $FEDLC_OUTPUT_ROOT when it is set.
std::filesystem::path resolve_output_path(const std::filesystem::path& path);

struct PreparedData {
    std::vector<Dataset> clients;
    Dataset test;
    std::size_t num_classes = 0;
    std::size_t dim = 0;
    std::optional<Partition> partition;  // absent for the native synthetic split
};

// Loads a labelled dataset from files named in the config (idx or csv).
Dataset load_dataset(const DatasetConfig& config, bool train);

// Synthetic: each client's data is split 80/20 (test_fraction) and the held-out
// parts are pooled into the test set. With a quantity or dirichlet partition the
// pooled training parts are re-partitioned. File datasets are partitioned with
// the configured scheme and keep their separate test file.
PreparedData prepare_data(const ExperimentConfig& config, std::uint64_t seed);

std::size_t effective_min_size(const ExperimentConfig& config, std::size_t train_size);

std::vector<std::size_t> sample_clients(std::size_t num_clients, double fraction, std::uint64_t seed,
                                        std::size_t round);

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<RoundReport> rounds;
    ModelParams final_params;
    ClassAccuracy final_accuracy;
};

// Called after every round; may be empty.
using RoundObserver = std::function<void(std::uint64_t seed, const RoundReport&)>;

// client_threads: clients trained concurrently inside each round.
SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed, std::size_t client_threads = 1,
                    const RoundObserver& observer = {});

struct SummaryStat {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation, 0 for a single seed
    std::vector<double> values;
};

SummaryStat summarize(std::vector<double> values);

struct RunArtifact {
    std::filesystem::path directory;
    std::filesystem::path config_snapshot;
    std::vector<std::filesystem::path> metrics;  // one JSONL per seed
    std::filesystem::path per_class_csv;
    std::filesystem::path summary_json;
    std::optional<std::filesystem::path> plot_svg;
    SummaryStat final_accuracy;
    SummaryStat final_mean_per_class;

    std::string summary_line(const std::string& name) const;
};

RunArtifact run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

// Reads summary.json written by run_experiment.
RunArtifact load_artifact(const std::filesystem::path& directory);

// A sweep column: "<strategy>[+<loss>][+prox]", e.g. "fedavg+fedlc+prox",
// "scaffold+fedlc", "fedrs". Missing parts default to fedavg and ce.
struct MethodSpec {
    std::string label;
    Strategy strategy = Strategy::fedavg;
    LossKind loss = LossKind::standard_ce;
    bool prox = false;
};

MethodSpec parse_method(const std::string& text);

inline constexpr double kDefaultProxMu = 0.01;

// Applies a method to a config; prox uses loss.prox_mu when positive.
ExperimentConfig apply_method(ExperimentConfig config, const MethodSpec& method);

struct SweepSpec {
    std::string axis;  // any config key, e.g. "local_epochs" or "partition.beta"
    std::vector<std::string> values;
    std::vector<std::string> methods;
};

struct SweepResult {
    std::filesystem::path table_csv;
    std::filesystem::path std_csv;
    std::size_t runs_executed = 0;
    std::size_t runs_skipped = 0;
};

// Cells live in <output_dir>/<axis>=<value>/<method>; a cell whose summary.json
// exists is not rerun.
SweepResult run_sweep(const ExperimentConfig& base, const SweepSpec& sweep, std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// Plots
// ---------------------------------------------------------------------------

struct PlotSeries {
    std::string label;
    std::vector<double> rounds;
    std::vector<double> accuracy;
};

std::string render_accuracy_svg(const std::vector<PlotSeries>& series);

// Reads round / test_acc from each JSONL file. Throws ConfigError on an empty list.
PlotSeries read_metrics_series(const std::filesystem::path& jsonl, const std::string& label);
void emit_plot(const std::vector<std::filesystem::path>& metrics, const std::filesystem::path& out_svg);

}  // namespace fedlc

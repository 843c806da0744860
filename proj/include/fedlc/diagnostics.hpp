#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedlc/data.hpp"
#include "fedlc/loss.hpp"
#include "fedlc/model.hpp"
#include "fedlc/partition.hpp"

namespace fedlc {

// Per-class means of penultimate features h(x) and of probability vectors
// over the samples whose true label is c. Classes with no samples are absent.
// When `calibrated` is set the probability rows hold
//   p~_y(x) = e^{f_y} / sum_i e^{f_i - tau n_i^-1/4},
// which do not sum to one.
struct ClassAggregates {
    std::vector<std::vector<double>> mean_feature;
    std::vector<std::vector<double>> mean_probs;
    std::vector<std::size_t> counts;
    bool calibrated = false;

    std::size_t num_classes() const noexcept { return counts.size(); }
    bool present(std::size_t c) const { return counts.at(c) > 0; }
};

ClassAggregates class_aggregates(const ModelParams& params, const Dataset& dataset);
ClassAggregates class_aggregates_calibrated(const ModelParams& params, const Dataset& dataset,
                                            const CalibrationSpec& spec);

// D_jr = (1 - pbar_r^(r)) ||hbar^(r)||^2 / (pbar_r^(j) hbar^(r) . hbar^(j)).
// nullopt when either class is absent or the denominator vanishes.
std::optional<double> deviation_bound(const ClassAggregates& agg, std::size_t majority, std::size_t minority);

// D_jr = sum_{y != r} Delta_(r,y) p~bar_y^(r) ||hbar^(r)||^2 / (p~bar_r^(j) hbar^(r) . hbar^(j)),
// evaluated on calibrated aggregates.
std::optional<double> deviation_bound_calibrated(const ClassAggregates& agg_tilde, const CalibrationSpec& spec,
                                                 std::size_t majority, std::size_t minority);

struct DeviationEntry {
    std::size_t majority = 0;
    std::size_t minority = 0;
    std::optional<double> bound;
    double count_ratio = 0.0;  // n_j / n_r
    bool flagged = false;      // n_j / n_r > factor * D_jr with D_jr > 0
};

struct DeviationReport {
    std::vector<DeviationEntry> entries;
    bool calibrated = false;
    double factor = 0.0;

    std::string to_csv() const;
};

inline constexpr double kDefaultDominanceFactor = 10.0;

// One entry per (majority j, minority r) pair from `stats`. Pass `calibration`
// (with agg computed by class_aggregates_calibrated) for the calibrated bound.
DeviationReport deviation_report(const ClassAggregates& agg, const ClassStats& stats, double factor,
                                 const CalibrationSpec* calibration = nullptr);

struct ClassAccuracy {
    std::vector<double> accuracy;  // 0 for absent classes
    std::vector<std::size_t> counts;
    double mean = 0.0;             // over present classes
    double overall = 0.0;          // correct / total

    bool present(std::size_t c) const { return counts.at(c) > 0; }
    std::string to_csv() const;
};

ClassAccuracy per_class_accuracy(const ModelParams& params, const Dataset& test);

struct MarginPair {
    std::size_t a = 0;
    std::size_t b = 0;
    std::optional<double> bound;  // nullopt when either mean margin is not positive
};

struct MarginReport {
    std::vector<double> margins;                     // per example d_y
    std::vector<std::optional<double>> class_mean;   // per class
    std::vector<std::size_t> counts;
    std::vector<MarginPair> pairs;

    std::string to_csv() const;
};

// d_y = f_y(x) - max_{i != y} f_i(x); pair bound 1/(dbar_a sqrt n_a) + 1/(dbar_b sqrt n_b).
double example_margin(std::span<const double> logits, std::size_t y);
double margin_error_bound(double mean_margin_a, double count_a, double mean_margin_b, double count_b);
MarginReport margin_report(const ModelParams& params, const Dataset& dataset);

// ---------------------------------------------------------------------------
// Sign probe for the update direction of the minority-class row.
// ---------------------------------------------------------------------------

struct SignProbeResult {
    double minority_dot = 0.0;  // (w_r' - w_r) . hbar^(r)
    double majority_dot = 0.0;  // (w_j' - w_j) . hbar^(r)
};

// Runs `steps` full-batch gradient steps from `params` on the client data and
// measures the last-layer row updates against the minority feature mean
// (taken under the starting params).
SignProbeResult minority_sign_probe(const ModelParams& params, const Dataset& client, std::size_t majority,
                                    std::size_t minority, const LossSpec& loss, double lr, std::size_t steps);

// Two-class client: class 0 (majority) and class 1 (minority). Features are
// offset + spread * N(0,1) class means plus N(0, noise^2) per sample.
struct ProbeConstruction {
    std::size_t majority_count = 500;
    std::size_t minority_count = 10;
    std::size_t dim = 10;
    double offset = 1.5;
    double spread = 0.2;
    double noise = 1.0;
    double lr = 0.5;
    std::size_t steps = 5;
};

Dataset make_probe_client(const ProbeConstruction& construction, std::uint64_t seed);

struct ProbeSummary {
    std::size_t trials = 0;
    double minority_negative_fraction = 0.0;
    double majority_positive_fraction = 0.0;
    std::vector<SignProbeResult> results;
};

// Trial t uses the same client and initial logistic params for every loss,
// so summaries for different losses are paired.
ProbeSummary run_sign_probe(const ProbeConstruction& construction, LossKind kind, double tau,
                            std::size_t trials, std::uint64_t base_seed);

}  // namespace fedlc

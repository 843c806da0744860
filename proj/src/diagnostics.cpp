#include "fedlc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fedlc/error.hpp"
#include "fedlc/rng.hpp"

namespace fedlc {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

ClassAggregates aggregate(const ModelParams& params, const Dataset& dataset, const CalibrationSpec* spec) {
    const std::size_t k = params.arch().num_classes;
    const std::size_t f = params.arch().feature_dim();
    if (dataset.num_classes != k) throw DimensionError("dataset and model disagree on class count");

    ClassAggregates agg;
    agg.calibrated = spec != nullptr;
    agg.counts.assign(k, 0);
    agg.mean_feature.assign(k, std::vector<double>(f, 0.0));
    agg.mean_probs.assign(k, std::vector<double>(k, 0.0));

    std::vector<double> offsets;
    if (spec) {
        if (spec->num_classes() != k) throw DimensionError("calibration counts must match class count");
        offsets = calibration_offsets(*spec);
    }
    std::vector<double> shifted(k), probs(k);
    ForwardTrace trace;
    for (const auto& ex : dataset.examples) {
        forward(params, ex.features, trace);
        const std::size_t c = ex.label;
        ++agg.counts[c];
        for (std::size_t i = 0; i < f; ++i) agg.mean_feature[c][i] += trace.features[i];
        if (spec) {
            for (std::size_t i = 0; i < k; ++i) shifted[i] = trace.logits[i] - offsets[i];
            const double top = *std::max_element(shifted.begin(), shifted.end());
            double denom = 0.0;
            for (std::size_t i = 0; i < k; ++i) denom += std::exp(shifted[i] - top);
            for (std::size_t i = 0; i < k; ++i) probs[i] = std::exp(trace.logits[i] - top) / denom;
        } else {
            probs = trace.probs;
        }
        for (std::size_t i = 0; i < k; ++i) agg.mean_probs[c][i] += probs[i];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (agg.counts[c] == 0) continue;
        const double n = static_cast<double>(agg.counts[c]);
        for (auto& v : agg.mean_feature[c]) v /= n;
        for (auto& v : agg.mean_probs[c]) v /= n;
    }
    return agg;
}

// p-bar_r^(j) * hbar^(r) . hbar^(j), or nullopt when it is (numerically) zero.
std::optional<double> bound_denominator(const ClassAggregates& agg, std::size_t j, std::size_t r) {
    if (j >= agg.num_classes() || r >= agg.num_classes()) throw DimensionError("class index out of range");
    if (!agg.present(j) || !agg.present(r)) return std::nullopt;
    const auto& hr = agg.mean_feature[r];
    const auto& hj = agg.mean_feature[j];
    const double scale = std::sqrt(dot(hr, hr) * dot(hj, hj));
    const double cross = dot(hr, hj);
    const double p = agg.mean_probs[j][r];
    if (!(scale > 0.0) || std::abs(cross) <= 1e-12 * scale || !(std::abs(p) > 1e-300)) return std::nullopt;
    return p * cross;
}

}  // namespace

ClassAggregates class_aggregates(const ModelParams& params, const Dataset& dataset) {
    return aggregate(params, dataset, nullptr);
}

ClassAggregates class_aggregates_calibrated(const ModelParams& params, const Dataset& dataset,
                                            const CalibrationSpec& spec) {
    return aggregate(params, dataset, &spec);
}

std::optional<double> deviation_bound(const ClassAggregates& agg, std::size_t j, std::size_t r) {
    const auto denom = bound_denominator(agg, j, r);
    if (!denom) return std::nullopt;
    const auto& pr = agg.mean_probs[r];
    double others = 0.0;
    for (std::size_t y = 0; y < pr.size(); ++y) {
        if (y != r) others += pr[y];
    }
    const double complement = 1.0 - pr[r];
    if (!agg.calibrated && std::abs(complement - others) > 1e-9) {
        throw std::logic_error("class probability means do not sum to one");
    }
    const auto& hr = agg.mean_feature[r];
    return complement * dot(hr, hr) / *denom;
}

std::optional<double> deviation_bound_calibrated(const ClassAggregates& agg_tilde, const CalibrationSpec& spec,
                                                 std::size_t j, std::size_t r) {
    if (spec.num_classes() != agg_tilde.num_classes()) {
        throw DimensionError("calibration counts must match class count");
    }
    const auto denom = bound_denominator(agg_tilde, j, r);
    if (!denom) return std::nullopt;
    const auto& pr = agg_tilde.mean_probs[r];
    double weighted = 0.0;
    for (std::size_t y = 0; y < pr.size(); ++y) {
        if (y != r) weighted += pairwise_margin(spec, r, y) * pr[y];
    }
    const auto& hr = agg_tilde.mean_feature[r];
    return weighted * dot(hr, hr) / *denom;
}

DeviationReport deviation_report(const ClassAggregates& agg, const ClassStats& stats, double factor,
                                 const CalibrationSpec* calibration) {
    DeviationReport report;
    report.calibrated = calibration != nullptr;
    report.factor = factor;
    for (auto j : stats.majority) {
        for (auto r : stats.minority) {
            DeviationEntry e;
            e.majority = j;
            e.minority = r;
            e.bound = calibration ? deviation_bound_calibrated(agg, *calibration, j, r) : deviation_bound(agg, j, r);
            e.count_ratio = static_cast<double>(stats.counts.at(j)) / static_cast<double>(stats.counts.at(r));
            e.flagged = e.bound && *e.bound > 0.0 && e.count_ratio > factor * *e.bound;
            report.entries.push_back(e);
        }
    }
    return report;
}

std::string DeviationReport::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "majority,minority,calibrated,count_ratio,deviation_bound,defined,flagged\n";
    for (const auto& e : entries) {
        out << e.majority << ',' << e.minority << ',' << (calibrated ? 1 : 0) << ',' << e.count_ratio << ',';
        if (e.bound) {
            out << *e.bound << ",1,";
        } else {
            out << ",0,";
        }
        out << (e.flagged ? 1 : 0) << '\n';
    }
    return out.str();
}

ClassAccuracy per_class_accuracy(const ModelParams& params, const Dataset& test) {
    const std::size_t k = params.arch().num_classes;
    if (test.num_classes != k) throw DimensionError("dataset and model disagree on class count");
    ClassAccuracy out;
    out.counts.assign(k, 0);
    std::vector<std::size_t> correct(k, 0);
    std::vector<double> logits(k), hidden(params.arch().hidden);
    for (const auto& ex : test.examples) {
        logits_into(params, ex.features, logits, hidden);
        ++out.counts[ex.label];
        if (argmax(logits) == ex.label) ++correct[ex.label];
    }
    out.accuracy.assign(k, 0.0);
    std::size_t present = 0;
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        if (out.counts[c] == 0) continue;
        out.accuracy[c] = static_cast<double>(correct[c]) / static_cast<double>(out.counts[c]);
        sum += out.accuracy[c];
        ++present;
    }
    out.mean = present ? sum / static_cast<double>(present) : 0.0;
    const std::size_t total_correct = std::accumulate(correct.begin(), correct.end(), std::size_t{0});
    out.overall = test.empty() ? 0.0 : static_cast<double>(total_correct) / static_cast<double>(test.size());
    return out;
}

std::string ClassAccuracy::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "class,count,accuracy,present\n";
    for (std::size_t c = 0; c < counts.size(); ++c) {
        out << c << ',' << counts[c] << ',';
        if (counts[c] > 0) out << accuracy[c];
        out << ',' << (counts[c] > 0 ? 1 : 0) << '\n';
    }
    out << "mean,,"<< mean << ",\n";
    return out.str();
}

double example_margin(std::span<const double> logits, std::size_t y) {
    double best_other = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (i != y) best_other = std::max(best_other, logits[i]);
    }
    return logits[y] - best_other;
}

double margin_error_bound(double mean_margin_a, double count_a, double mean_margin_b, double count_b) {
    return 1.0 / (mean_margin_a * std::sqrt(count_a)) + 1.0 / (mean_margin_b * std::sqrt(count_b));
}

MarginReport margin_report(const ModelParams& params, const Dataset& dataset) {
    const std::size_t k = params.arch().num_classes;
    if (dataset.num_classes != k) throw DimensionError("dataset and model disagree on class count");
    MarginReport report;
    report.counts.assign(k, 0);
    std::vector<double> sums(k, 0.0);
    std::vector<double> logits(k), hidden(params.arch().hidden);
    report.margins.reserve(dataset.size());
    for (const auto& ex : dataset.examples) {
        logits_into(params, ex.features, logits, hidden);
        const double d = example_margin(logits, ex.label);
        report.margins.push_back(d);
        sums[ex.label] += d;
        ++report.counts[ex.label];
    }
    report.class_mean.assign(k, std::nullopt);
    for (std::size_t c = 0; c < k; ++c) {
        if (report.counts[c] > 0) report.class_mean[c] = sums[c] / static_cast<double>(report.counts[c]);
    }
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            MarginPair pair{a, b, std::nullopt};
            const auto& ma = report.class_mean[a];
            const auto& mb = report.class_mean[b];
            if (ma && mb && *ma > 0.0 && *mb > 0.0) {
                pair.bound = margin_error_bound(*ma, static_cast<double>(report.counts[a]), *mb,
                                                static_cast<double>(report.counts[b]));
            }
            report.pairs.push_back(pair);
        }
    }
    return report;
}

std::string MarginReport::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "class_a,class_b,mean_margin_a,mean_margin_b,count_a,count_b,error_bound,defined\n";
    for (const auto& p : pairs) {
        out << p.a << ',' << p.b << ',';
        if (class_mean[p.a]) out << *class_mean[p.a];
        out << ',';
        if (class_mean[p.b]) out << *class_mean[p.b];
        out << ',' << counts[p.a] << ',' << counts[p.b] << ',';
        if (p.bound) out << *p.bound;
        out << ',' << (p.bound ? 1 : 0) << '\n';
    }
    return out.str();
}

SignProbeResult minority_sign_probe(const ModelParams& params, const Dataset& client, std::size_t majority,
                                    std::size_t minority, const LossSpec& loss, double lr, std::size_t steps) {
    if (client.empty()) throw DimensionError("probe client has no data");
    const auto start = class_aggregates(params, client);
    if (!start.present(minority) || !start.present(majority)) {
        throw DimensionError("probe client must contain both the majority and the minority class");
    }
    const auto& h_minority = start.mean_feature[minority];

    ModelParams current = params;
    ModelParams grad(params.arch());
    const std::size_t k = params.arch().num_classes;
    LogitLoss objective(loss, k);
    std::vector<double> dlogits(k);
    ForwardTrace trace;
    const double scale = 1.0 / static_cast<double>(client.size());
    for (std::size_t s = 0; s < steps; ++s) {
        grad.set_zero();
        for (const auto& ex : client.examples) {
            forward(current, ex.features, trace);
            objective.evaluate(trace.logits, ex.label, dlogits);
            accumulate_gradient(current, ex.features, trace, dlogits, scale, grad);
        }
        if (loss.prox_mu > 0.0) grad += proximal_term(loss.prox_mu, current, *loss.anchor).grad;
        current.axpy(-lr, grad);
    }

    auto row_delta_dot = [&](std::size_t y) {
        const auto before = params.class_row(y);
        const auto after = current.class_row(y);
        double s = 0.0;
        for (std::size_t i = 0; i < before.size(); ++i) s += (after[i] - before[i]) * h_minority[i];
        return s;
    };
    return {row_delta_dot(minority), row_delta_dot(majority)};
}

Dataset make_probe_client(const ProbeConstruction& c, std::uint64_t seed) {
    Rng rng = make_rng(seed, Stream::probe_trial, {0});
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset out{"probe_client", 2, c.dim, {}};
    std::vector<std::vector<double>> means(2, std::vector<double>(c.dim));
    for (auto& m : means) {
        for (auto& v : m) v = c.offset + c.spread * normal(rng);
    }
    const std::size_t counts[2] = {c.majority_count, c.minority_count};
    for (std::size_t label = 0; label < 2; ++label) {
        for (std::size_t s = 0; s < counts[label]; ++s) {
            Example ex;
            ex.label = label;
            ex.features.resize(c.dim);
            for (std::size_t i = 0; i < c.dim; ++i) ex.features[i] = means[label][i] + c.noise * normal(rng);
            out.examples.push_back(std::move(ex));
        }
    }
    return out;
}

ProbeSummary run_sign_probe(const ProbeConstruction& construction, LossKind kind, double tau, std::size_t trials,
                            std::uint64_t base_seed) {
    ProbeSummary summary;
    summary.trials = trials;
    std::size_t negative = 0, positive = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        const std::uint64_t trial_seed = derive_seed(base_seed, Stream::probe_trial, {t});
        const Dataset client = make_probe_client(construction, trial_seed);
        const ModelParams init = init_params(Arch::logistic(construction.dim, 2), trial_seed);
        LossSpec loss;
        loss.kind = kind;
        const auto counts = class_counts(client);
        if (kind == LossKind::fedlc) loss.calibration = make_calibration(tau, counts);
        if (kind == LossKind::fedrs) {
            loss.observed.assign(counts.size(), false);
            for (std::size_t i = 0; i < counts.size(); ++i) loss.observed[i] = counts[i] > 0;
        }
        const auto r = minority_sign_probe(init, client, 0, 1, loss, construction.lr, construction.steps);
        summary.results.push_back(r);
        if (r.minority_dot < 0.0) ++negative;
        if (r.majority_dot > 0.0) ++positive;
    }
    if (trials > 0) {
        summary.minority_negative_fraction = static_cast<double>(negative) / static_cast<double>(trials);
        summary.majority_positive_fraction = static_cast<double>(positive) / static_cast<double>(trials);
    }
    return summary;
}

}  // namespace fedlc

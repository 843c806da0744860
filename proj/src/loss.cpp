#include "fedlc/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedlc/error.hpp"

namespace fedlc {

void CalibrationSpec::validate() const {
    if (!(tau >= 0.0)) throw ConfigError("tau", "must be non-negative");
    if (!(count_floor > 0.0)) throw ConfigError("count_floor", "must be positive");
    for (double c : counts) {
        if (!(c >= 0.0)) throw ConfigError("counts", "must be non-negative");
    }
}

CalibrationSpec make_calibration(double tau, std::span<const std::size_t> counts, double count_floor) {
    CalibrationSpec spec;
    spec.tau = tau;
    spec.count_floor = count_floor;
    spec.counts.assign(counts.begin(), counts.end());
    return spec;
}

namespace {

double clamped(const CalibrationSpec& spec, std::size_t k) { return std::max(spec.counts.at(k), spec.count_floor); }

double power_offset(const CalibrationSpec& spec, std::size_t k) {
    return spec.tau * std::pow(clamped(spec, k), -0.25);
}

bool expelled(const CalibrationSpec& spec, std::size_t k) { return spec.expel_missing && spec.counts[k] == 0.0; }

// -log softmax(g)_y and softmax(g) - onehot(y), via log-sum-exp.
double softmax_cross_entropy(std::span<const double> g, std::size_t y, std::span<double> probs,
                             std::span<double> dlogits) {
    const double top = *std::max_element(g.begin(), g.end());
    double total = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        probs[i] = std::exp(g[i] - top);
        total += probs[i];
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        probs[i] /= total;
        dlogits[i] = probs[i];
    }
    dlogits[y] -= 1.0;
    return std::log(total) - (g[y] - top);
}

}  // namespace

double pairwise_margin(const CalibrationSpec& spec, std::size_t y, std::size_t i) {
    if (y >= spec.num_classes() || i >= spec.num_classes()) throw DimensionError("class index out of range");
    return spec.tau * (std::pow(clamped(spec, y), -0.25) - std::pow(clamped(spec, i), -0.25));
}

std::vector<double> calibration_offsets(const CalibrationSpec& spec) {
    const std::size_t k = spec.num_classes();
    std::vector<double> offsets(k);
    if (spec.mode == MarginMode::power) {
        for (std::size_t i = 0; i < k; ++i) offsets[i] = power_offset(spec, i);
        return offsets;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) total += clamped(spec, i);
    for (std::size_t i = 0; i < k; ++i) offsets[i] = std::log(clamped(spec, i) / total);
    return offsets;
}

void calibrate_logits_into(const CalibrationSpec& spec, std::span<const double> offsets,
                           std::span<const double> logits, std::span<double> out) {
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = expelled(spec, i) ? kExpelledLogit : logits[i] - offsets[i];
    }
}

std::vector<double> calibrate_logits(const CalibrationSpec& spec, std::span<const double> logits) {
    if (logits.size() != spec.num_classes()) {
        throw DimensionError("logits length " + std::to_string(logits.size()) + " vs " +
                             std::to_string(spec.num_classes()) + " calibration counts");
    }
    const auto offsets = calibration_offsets(spec);
    std::vector<double> out(logits.size());
    calibrate_logits_into(spec, offsets, logits, out);
    return out;
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::standard_ce: return "standard_ce";
        case LossKind::fedlc: return "fedlc";
        case LossKind::fedrs: return "fedrs";
    }
    return "unknown";
}

LossKind parse_loss_kind(const std::string& name) {
    if (name == "standard_ce") return LossKind::standard_ce;
    if (name == "fedlc") return LossKind::fedlc;
    if (name == "fedrs") return LossKind::fedrs;
    throw ConfigError("kind", "unknown loss kind '" + name + "'");
}

std::string to_string(CalibrationVariant variant) {
    return variant == CalibrationVariant::inclusive ? "inclusive" : "exclusive";
}

CalibrationVariant parse_variant(const std::string& name) {
    if (name == "inclusive") return CalibrationVariant::inclusive;
    if (name == "exclusive") return CalibrationVariant::exclusive;
    throw ConfigError("variant", "unknown variant '" + name + "'");
}

void LossSpec::validate(std::size_t num_classes) const {
    if (!(prox_mu >= 0.0)) throw ConfigError("prox_mu", "must be non-negative");
    if (prox_mu > 0.0 && !anchor) throw ConfigError("prox_mu", "proximal term needs an anchor model");
    if (kind == LossKind::fedlc) {
        calibration.validate();
        if (calibration.num_classes() != num_classes) {
            throw ConfigError("counts", "calibration counts must have one entry per class");
        }
        if (calibration.variant == CalibrationVariant::exclusive && num_classes < 2) {
            throw ConfigError("variant", "exclusive variant needs at least two classes");
        }
    }
    if (kind == LossKind::fedrs) {
        if (!(alpha_rs > 0.0 && alpha_rs <= 1.0)) throw ConfigError("alpha_rs", "must lie in (0, 1]");
        if (!observed.empty() && observed.size() != num_classes) {
            throw ConfigError("observed", "must have one entry per class");
        }
    }
}

LogitLoss::LogitLoss(const LossSpec& spec, std::size_t num_classes)
    : kind_(spec.kind), work_(num_classes), probs_(num_classes) {
    spec.validate(num_classes);
    if (kind_ == LossKind::fedlc) {
        calibration_ = spec.calibration;
        // Only offset differences matter to either variant; anchoring the smallest at
        // zero keeps uniform counts (and tau = 0) exactly equal to plain cross-entropy.
        // The expelled sentinel is absolute, so offsets stay literal in that mode.
        offsets_ = calibration_offsets(calibration_);
        if (!calibration_.expel_missing) {
            const double low = *std::min_element(offsets_.begin(), offsets_.end());
            for (auto& o : offsets_) o -= low;
        }
    } else if (kind_ == LossKind::fedrs) {
        log_scale_.assign(num_classes, 0.0);
        for (std::size_t i = 0; i < num_classes && i < spec.observed.size(); ++i) {
            if (!spec.observed[i]) log_scale_[i] = std::log(spec.alpha_rs);
        }
    }
}

double LogitLoss::evaluate(std::span<const double> logits, std::size_t y, std::span<double> dlogits) {
    const std::size_t k = logits.size();
    if (y >= k) throw DimensionError("label out of range");
    if (dlogits.size() != k || work_.size() != k) throw DimensionError("logit length mismatch");

    switch (kind_) {
        case LossKind::standard_ce: return softmax_cross_entropy(logits, y, probs_, dlogits);

        case LossKind::fedrs:
            for (std::size_t i = 0; i < k; ++i) work_[i] = logits[i] + log_scale_[i];
            return softmax_cross_entropy(work_, y, probs_, dlogits);

        case LossKind::fedlc: {
            calibrate_logits_into(calibration_, offsets_, logits, work_);
            double value = 0.0;
            if (calibration_.variant == CalibrationVariant::inclusive) {
                value = softmax_cross_entropy(work_, y, probs_, dlogits);
            } else {
                double top = -std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < k; ++i) {
                    if (i != y) top = std::max(top, work_[i]);
                }
                double total = 0.0;
                for (std::size_t i = 0; i < k; ++i) {
                    probs_[i] = i == y ? 0.0 : std::exp(work_[i] - top);
                    total += probs_[i];
                }
                for (std::size_t i = 0; i < k; ++i) dlogits[i] = probs_[i] / total;
                dlogits[y] = -1.0;
                value = top - work_[y] + std::log(total);
            }
            // pinned logits carry no gradient back to f
            for (std::size_t i = 0; i < k; ++i) {
                if (expelled(calibration_, i)) dlogits[i] = 0.0;
            }
            return value;
        }
    }
    return 0.0;
}

ProxTerm proximal_term(double mu, const ModelParams& params, const ModelParams& anchor) {
    ProxTerm out{0.0, params};
    out.grad -= anchor;
    double sq = 0.0;
    for (double d : out.grad.flat()) sq += d * d;
    out.value = 0.5 * mu * sq;
    out.grad *= mu;
    return out;
}

LossResult loss_and_grad(const LossSpec& spec, const ForwardTrace& trace, std::size_t y,
                         const ModelParams& params) {
    const std::size_t k = trace.logits.size();
    LogitLoss loss(spec, k);
    LossResult out;
    out.dlogits.resize(k);
    out.value = loss.evaluate(trace.logits, y, out.dlogits);
    if (spec.prox_mu > 0.0) {
        auto prox = proximal_term(spec.prox_mu, params, *spec.anchor);
        out.value += prox.value;
        out.prox_grad = std::move(prox.grad);
    }
    return out;
}

}  // namespace fedlc

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedlc/model.hpp"

namespace fedlc {

// Denominator convention of the calibrated loss.
//   inclusive: -log softmax(g)_y, summing over all classes.
//   exclusive: log sum_{i != y} exp(g_i - g_y), the pairwise-margin form.
enum class CalibrationVariant { inclusive, exclusive };

// How per-class logit offsets are derived from counts.
//   power:     s_i = tau * max(n_i, floor)^(-1/4)
//   log_prior: s_i = log(gamma_i), gamma_i = max(n_i, floor) / sum_k max(n_k, floor)
enum class MarginMode { power, log_prior };

// Sentinel calibrated logit for missing classes when expel_missing is set.
inline constexpr double kExpelledLogit = -30.0;

struct CalibrationSpec {
    double tau = 1.0;
    std::vector<double> counts;  // local per-class n_y
    double count_floor = 1.0;
    CalibrationVariant variant = CalibrationVariant::inclusive;
    bool expel_missing = false;
    MarginMode mode = MarginMode::power;

    std::size_t num_classes() const noexcept { return counts.size(); }
    void validate() const;
};

CalibrationSpec make_calibration(double tau, std::span<const std::size_t> counts, double count_floor = 1.0);

// Delta_(y,i) = tau * (n_y^-1/4 - n_i^-1/4) with counts clamped at count_floor.
double pairwise_margin(const CalibrationSpec& spec, std::size_t y, std::size_t i);

// Per-class offsets s_i so that g_i = f_i - s_i.
std::vector<double> calibration_offsets(const CalibrationSpec& spec);

// g_i = f_i - s_i; missing classes pinned at kExpelledLogit when expel_missing.
std::vector<double> calibrate_logits(const CalibrationSpec& spec, std::span<const double> logits);
void calibrate_logits_into(const CalibrationSpec& spec, std::span<const double> offsets,
                           std::span<const double> logits, std::span<double> out);

enum class LossKind { standard_ce, fedlc, fedrs };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);
std::string to_string(CalibrationVariant variant);
CalibrationVariant parse_variant(const std::string& name);

struct LossSpec {
    LossKind kind = LossKind::standard_ce;
    CalibrationSpec calibration;          // fedlc
    double alpha_rs = 0.5;                // fedrs scaling for missing classes
    std::vector<bool> observed;           // fedrs: classes present locally
    double prox_mu = 0.0;                 // 0 disables the proximal term
    std::shared_ptr<const ModelParams> anchor;  // required when prox_mu > 0

    void validate(std::size_t num_classes) const;
};

// Per-example loss and dL/dlogits, precomputing what depends only on the LossSpec.
class LogitLoss {
public:
    LogitLoss(const LossSpec& spec, std::size_t num_classes);

    // Returns the loss; writes dL/dlogits into `dlogits`.
    double evaluate(std::span<const double> logits, std::size_t y, std::span<double> dlogits);

private:
    LossKind kind_;
    CalibrationSpec calibration_;
    std::vector<double> offsets_;    // fedlc
    std::vector<double> log_scale_;  // fedrs: log a_i
    std::vector<double> work_;
    std::vector<double> probs_;
};

struct ProxTerm {
    double value = 0.0;
    ModelParams grad;
};

// (mu/2) * ||params - anchor||^2 and its gradient mu * (params - anchor).
ProxTerm proximal_term(double mu, const ModelParams& params, const ModelParams& anchor);

struct LossResult {
    double value = 0.0;
    std::vector<double> dlogits;
    std::optional<ModelParams> prox_grad;
};

LossResult loss_and_grad(const LossSpec& spec, const ForwardTrace& trace, std::size_t y,
                         const ModelParams& params);

}  // namespace fedlc

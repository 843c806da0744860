#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fedlc {

enum class ArchKind { logistic, mlp };

// logistic{d, K} or mlp{d, H, K}; `hidden` is ignored for logistic.
struct Arch {
    ArchKind kind = ArchKind::logistic;
    std::size_t input_dim = 0;
    std::size_t hidden = 0;
    std::size_t num_classes = 0;

    static Arch logistic(std::size_t d, std::size_t k) { return {ArchKind::logistic, d, 0, k}; }
    static Arch mlp(std::size_t d, std::size_t h, std::size_t k) { return {ArchKind::mlp, d, h, k}; }

    std::size_t param_count() const noexcept;
    // Width of the penultimate features h: d for logistic, H for mlp.
    std::size_t feature_dim() const noexcept { return kind == ArchKind::logistic ? input_dim : hidden; }
    std::string describe() const;

    bool operator==(const Arch&) const = default;
};

// A weight matrix (rows x cols, row-major) followed by its bias inside the flat vector.
struct LayerView {
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
};

// Flat parameter vector. Layout:
//   logistic: [W_out (K x d) | b_out (K)]
//   mlp:      [W_1 (H x d) | b_1 (H) | W_out (K x H) | b_out (K)]
class ModelParams {
public:
    ModelParams() = default;
    explicit ModelParams(Arch arch);
    ModelParams(Arch arch, std::vector<double> flat);

    const Arch& arch() const noexcept { return arch_; }
    std::span<double> flat() noexcept { return flat_; }
    std::span<const double> flat() const noexcept { return flat_; }
    std::size_t size() const noexcept { return flat_.size(); }
    const std::vector<double>& values() const noexcept { return flat_; }

    LayerView output_layer() const noexcept;
    LayerView hidden_layer() const;  // mlp only

    // Last-layer row w_y and bias b_y.
    std::span<double> class_row(std::size_t y);
    std::span<const double> class_row(std::size_t y) const;
    std::span<double> output_bias();
    std::span<const double> output_bias() const;

    void set_zero() noexcept;
    ModelParams& operator+=(const ModelParams& other);
    ModelParams& operator-=(const ModelParams& other);
    ModelParams& operator*=(double scale) noexcept;
    void axpy(double a, const ModelParams& x);  // this += a * x

    bool operator==(const ModelParams&) const = default;

private:
    Arch arch_;
    std::vector<double> flat_;
};

struct ForwardTrace {
    std::vector<double> logits;
    std::vector<double> features;  // penultimate activations h (h = x for logistic)
    std::vector<double> probs;
};

// Numerically stable softmax (max subtraction).
std::vector<double> softmax(std::span<const double> logits);
void softmax_into(std::span<const double> logits, std::span<double> out);
std::size_t argmax(std::span<const double> values);

ForwardTrace forward(const ModelParams& params, std::span<const double> x);
// Reuses the trace's buffers.
void forward(const ModelParams& params, std::span<const double> x, ForwardTrace& trace);
// Logits only, no probabilities.
void logits_into(const ModelParams& params, std::span<const double> x, std::span<double> logits,
                 std::span<double> hidden_scratch);

ModelParams backward(const ModelParams& params, std::span<const double> x,
                     std::span<const double> dlogits);
// grad += scale * d(loss)/d(params) given the trace for x.
void accumulate_gradient(const ModelParams& params, std::span<const double> x, const ForwardTrace& trace,
                         std::span<const double> dlogits, double scale, ModelParams& grad);

// Returns a * x + y.
ModelParams axpy_params(double a, const ModelParams& x, const ModelParams& y);

// Weights ~ U(-s, s), s = sqrt(6 / (fan_in + fan_out)); biases zero.
ModelParams init_params(const Arch& arch, std::uint64_t seed);

// Little-endian checkpoint: "FLCK", u32 version, u32 arch kind, u64 d, u64 H,
// u64 K, u64 count, then count float64 values.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);
std::string encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(const std::string& bytes);

}  // namespace fedlc

#include "fedlc/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>

#include "fedlc/error.hpp"
#include "fedlc/fileio.hpp"
#include "fedlc/rng.hpp"

namespace fedlc {

std::size_t Arch::param_count() const noexcept {
    if (kind == ArchKind::logistic) return input_dim * num_classes + num_classes;
    return input_dim * hidden + hidden + hidden * num_classes + num_classes;
}

std::string Arch::describe() const {
    if (kind == ArchKind::logistic) {
        return "logistic{" + std::to_string(input_dim) + "," + std::to_string(num_classes) + "}";
    }
    return "mlp{" + std::to_string(input_dim) + "," + std::to_string(hidden) + "," +
           std::to_string(num_classes) + "}";
}

ModelParams::ModelParams(Arch arch) : arch_(arch), flat_(arch.param_count(), 0.0) {}

ModelParams::ModelParams(Arch arch, std::vector<double> flat) : arch_(arch), flat_(std::move(flat)) {
    if (flat_.size() != arch_.param_count()) {
        throw DimensionError("flat vector has " + std::to_string(flat_.size()) + " entries, " +
                             arch_.describe() + " needs " + std::to_string(arch_.param_count()));
    }
}

LayerView ModelParams::output_layer() const noexcept {
    const std::size_t in = arch_.feature_dim();
    const std::size_t k = arch_.num_classes;
    const std::size_t start =
        arch_.kind == ArchKind::logistic ? 0 : arch_.input_dim * arch_.hidden + arch_.hidden;
    return {start, start + k * in, k, in};
}

LayerView ModelParams::hidden_layer() const {
    if (arch_.kind != ArchKind::mlp) throw DimensionError("logistic model has no hidden layer");
    return {0, arch_.input_dim * arch_.hidden, arch_.hidden, arch_.input_dim};
}

std::span<double> ModelParams::class_row(std::size_t y) {
    const auto v = output_layer();
    if (y >= v.rows) throw DimensionError("class index out of range");
    return std::span<double>(flat_).subspan(v.weight_offset + y * v.cols, v.cols);
}

std::span<const double> ModelParams::class_row(std::size_t y) const {
    const auto v = output_layer();
    if (y >= v.rows) throw DimensionError("class index out of range");
    return std::span<const double>(flat_).subspan(v.weight_offset + y * v.cols, v.cols);
}

std::span<double> ModelParams::output_bias() {
    const auto v = output_layer();
    return std::span<double>(flat_).subspan(v.bias_offset, v.rows);
}

std::span<const double> ModelParams::output_bias() const {
    const auto v = output_layer();
    return std::span<const double>(flat_).subspan(v.bias_offset, v.rows);
}

void ModelParams::set_zero() noexcept { std::fill(flat_.begin(), flat_.end(), 0.0); }

ModelParams& ModelParams::operator+=(const ModelParams& other) {
    axpy(1.0, other);
    return *this;
}

ModelParams& ModelParams::operator-=(const ModelParams& other) {
    axpy(-1.0, other);
    return *this;
}

ModelParams& ModelParams::operator*=(double scale) noexcept {
    for (auto& v : flat_) v *= scale;
    return *this;
}

void ModelParams::axpy(double a, const ModelParams& x) {
    if (!(x.arch_ == arch_)) {
        throw DimensionError("arch mismatch: " + x.arch_.describe() + " vs " + arch_.describe());
    }
    for (std::size_t i = 0; i < flat_.size(); ++i) flat_[i] += a * x.flat_[i];
}

void softmax_into(std::span<const double> logits, std::span<double> out) {
    const double top = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        total += out[i];
    }
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= total;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    softmax_into(logits, out);
    return out;
}

std::size_t argmax(std::span<const double> values) {
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

namespace {

// out = W * in + b for a layer view
void affine(std::span<const double> flat, const LayerView& v, std::span<const double> in,
            std::span<double> out) {
    const double* w = flat.data() + v.weight_offset;
    const double* b = flat.data() + v.bias_offset;
    for (std::size_t r = 0; r < v.rows; ++r) {
        const double* row = w + r * v.cols;
        double acc = b[r];
        for (std::size_t c = 0; c < v.cols; ++c) acc += row[c] * in[c];
        out[r] = acc;
    }
}

void check_input(const ModelParams& params, std::span<const double> x) {
    if (x.size() != params.arch().input_dim) {
        throw DimensionError("input has " + std::to_string(x.size()) + " features, model expects " +
                             std::to_string(params.arch().input_dim));
    }
}

}  // namespace

void logits_into(const ModelParams& params, std::span<const double> x, std::span<double> logits,
                 std::span<double> hidden_scratch) {
    check_input(params, x);
    const auto flat = params.flat();
    if (params.arch().kind == ArchKind::logistic) {
        affine(flat, params.output_layer(), x, logits);
        return;
    }
    affine(flat, params.hidden_layer(), x, hidden_scratch);
    for (auto& h : hidden_scratch) h = std::max(h, 0.0);
    affine(flat, params.output_layer(), hidden_scratch, logits);
}

void forward(const ModelParams& params, std::span<const double> x, ForwardTrace& trace) {
    check_input(params, x);
    const auto& arch = params.arch();
    trace.logits.resize(arch.num_classes);
    trace.probs.resize(arch.num_classes);
    if (arch.kind == ArchKind::logistic) {
        trace.features.assign(x.begin(), x.end());
    } else {
        trace.features.resize(arch.hidden);
    }
    logits_into(params, x, trace.logits, trace.features);
    softmax_into(trace.logits, trace.probs);
}

ForwardTrace forward(const ModelParams& params, std::span<const double> x) {
    ForwardTrace trace;
    forward(params, x, trace);
    return trace;
}

void accumulate_gradient(const ModelParams& params, std::span<const double> x, const ForwardTrace& trace,
                         std::span<const double> dlogits, double scale, ModelParams& grad) {
    check_input(params, x);
    const auto& arch = params.arch();
    if (dlogits.size() != arch.num_classes) {
        throw DimensionError("dL/dlogits has " + std::to_string(dlogits.size()) + " entries, expected " +
                             std::to_string(arch.num_classes));
    }
    if (!(grad.arch() == arch)) throw DimensionError("gradient arch mismatch");

    const auto out = params.output_layer();
    auto g = grad.flat();
    const auto& h = trace.features;
    for (std::size_t y = 0; y < out.rows; ++y) {
        const double d = scale * dlogits[y];
        if (d == 0.0) continue;
        double* row = g.data() + out.weight_offset + y * out.cols;
        for (std::size_t c = 0; c < out.cols; ++c) row[c] += d * h[c];
        g[out.bias_offset + y] += d;
    }
    if (arch.kind == ArchKind::logistic) return;

    // back through relu into the hidden layer
    const auto hid = params.hidden_layer();
    const auto p = params.flat();
    for (std::size_t u = 0; u < hid.rows; ++u) {
        if (!(h[u] > 0.0)) continue;
        double dh = 0.0;
        for (std::size_t y = 0; y < out.rows; ++y) dh += p[out.weight_offset + y * out.cols + u] * dlogits[y];
        dh *= scale;
        if (dh == 0.0) continue;
        double* row = g.data() + hid.weight_offset + u * hid.cols;
        for (std::size_t c = 0; c < hid.cols; ++c) row[c] += dh * x[c];
        g[hid.bias_offset + u] += dh;
    }
}

ModelParams backward(const ModelParams& params, std::span<const double> x,
                     std::span<const double> dlogits) {
    ModelParams grad(params.arch());
    const ForwardTrace trace = forward(params, x);
    accumulate_gradient(params, x, trace, dlogits, 1.0, grad);
    return grad;
}

ModelParams axpy_params(double a, const ModelParams& x, const ModelParams& y) {
    ModelParams out = y;
    out.axpy(a, x);
    return out;
}

ModelParams init_params(const Arch& arch, std::uint64_t seed) {
    ModelParams params(arch);
    Rng rng = make_rng(seed, Stream::model_init);
    auto fill = [&](const LayerView& v) {
        const double s = std::sqrt(6.0 / static_cast<double>(v.cols + v.rows));
        std::uniform_real_distribution<double> dist(-s, s);
        auto flat = params.flat();
        for (std::size_t i = 0; i < v.rows * v.cols; ++i) flat[v.weight_offset + i] = dist(rng);
    };
    if (arch.kind == ArchKind::mlp) fill(params.hidden_layer());
    fill(params.output_layer());
    return params;
}

namespace {

constexpr char kCheckpointMagic[4] = {'F', 'L', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put_le(std::string& out, T value) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::string& in, std::size_t& pos, const char* field) {
    if (in.size() < pos + sizeof(T)) throw IngestionError(field, "truncated checkpoint");
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    }
    pos += sizeof(T);
    return value;
}

}  // namespace

std::string encode_checkpoint(const ModelParams& params) {
    std::string out(kCheckpointMagic, 4);
    const auto& a = params.arch();
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint32_t>(out, a.kind == ArchKind::logistic ? 0u : 1u);
    put_le<std::uint64_t>(out, a.input_dim);
    put_le<std::uint64_t>(out, a.hidden);
    put_le<std::uint64_t>(out, a.num_classes);
    put_le<std::uint64_t>(out, params.size());
    for (double v : params.flat()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

ModelParams decode_checkpoint(const std::string& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
        throw IngestionError("magic", "not a checkpoint file");
    }
    std::size_t pos = 4;
    if (get_le<std::uint32_t>(bytes, pos, "version") != kCheckpointVersion) {
        throw IngestionError("version", "unsupported checkpoint version");
    }
    const auto kind = get_le<std::uint32_t>(bytes, pos, "arch");
    if (kind > 1) throw IngestionError("arch", "unknown architecture id");
    Arch arch;
    arch.kind = kind == 0 ? ArchKind::logistic : ArchKind::mlp;
    arch.input_dim = get_le<std::uint64_t>(bytes, pos, "input_dim");
    arch.hidden = get_le<std::uint64_t>(bytes, pos, "hidden");
    arch.num_classes = get_le<std::uint64_t>(bytes, pos, "num_classes");
    const auto count = get_le<std::uint64_t>(bytes, pos, "count");
    if (count != arch.param_count()) throw IngestionError("count", "does not match the architecture");
    std::vector<double> flat(count);
    for (auto& v : flat) v = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos, "values"));
    return ModelParams(arch, std::move(flat));
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    write_file_atomic(path, encode_checkpoint(params));
}

ModelParams load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace fedlc

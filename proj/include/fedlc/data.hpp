#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fedlc {

struct Example {
    std::vector<double> features;
    std::size_t label = 0;
};

// Labeled examples sharing one feature dimension. Classes may have zero
// examples; every label is below num_classes.
struct Dataset {
    std::string name;
    std::size_t num_classes = 0;
    std::size_t dim = 0;
    std::vector<Example> examples;

    std::size_t size() const noexcept { return examples.size(); }
    bool empty() const noexcept { return examples.empty(); }

    // Appends after checking dim and label range.
    void add(Example example);

    // Throws DimensionError if any example breaks the invariants.
    void validate() const;

    Dataset subset(std::span<const std::size_t> indices, std::string subset_name) const;
};

std::vector<std::size_t> class_counts(const Dataset& dataset);

// Concatenates datasets with identical dim and num_classes.
Dataset concatenate(std::span<const Dataset> parts, std::string name);

// ---------------------------------------------------------------------------
// Synthetic(lambda, mu): per-client multinomial-logistic labelers.
//
// For client i: u_i ~ N(0, lambda), W_i, b_i entries ~ N(u_i, 1),
// B_i ~ N(0, mu), v_i entries ~ N(B_i, 1), x ~ N(v_i, diag(j^-1.2)),
// y = argmax(W_i x + b_i). Second arguments of N(.,.) are standard deviations.
// Client sizes follow a Pareto law floored at min_size and capped at max_size.
// ---------------------------------------------------------------------------
struct SyntheticSpec {
    double lambda = 0.0;
    double mu = 0.0;
    std::size_t num_clients = 100;
    std::size_t dim = 60;
    std::size_t num_classes = 10;
    std::size_t min_size = 20;
    std::size_t max_size = 1000;
    double power_law_exponent = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticClient {
    Dataset data;
    std::vector<double> weights;  // num_classes x dim, row-major
    std::vector<double> bias;     // num_classes
    double model_mean = 0.0;      // u_i
    double data_mean = 0.0;       // B_i
    std::vector<double> feature_mean;  // v_i
};

std::vector<SyntheticClient> generate_synthetic_clients(const SyntheticSpec& spec);
std::vector<Dataset> generate_synthetic(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
// Pixels are scaled to [0, 1]. When num_classes is 0 it is inferred as
// max(label) + 1.
Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path,
                 std::size_t num_classes = 0);

// Writes a dataset as an IDX pair; features are clamped to [0,1] and
// quantized to bytes. rows * cols must equal dataset.dim.
void write_idx(const Dataset& dataset, std::size_t rows, std::size_t cols,
               const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

// Rows are `label,f1,...,fd`. Blank lines are ignored.
Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes);
Dataset parse_csv(const std::string& text, std::size_t num_classes, std::string name = "csv");

}  // namespace fedlc

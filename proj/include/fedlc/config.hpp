#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedlc/fedcore.hpp"
#include "fedlc/model.hpp"

namespace fedlc {

enum class DatasetKind { synthetic, idx, csv };
enum class PartitionKind { native, quantity, dirichlet };

struct DatasetConfig {
    DatasetKind kind = DatasetKind::synthetic;
    // synthetic
    double lambda = 0.0;
    double mu = 0.0;
    std::size_t dim = 60;
    std::size_t num_classes = 10;
    std::size_t min_size = 20;
    std::size_t max_size = 1000;
    double power_law_exponent = 1.0;
    double test_fraction = 0.2;
    // idx
    std::string train_images;
    std::string train_labels;
    std::string test_images;
    std::string test_labels;
    // csv
    std::string train_csv;
    std::string test_csv;

    bool operator==(const DatasetConfig&) const = default;
};

struct PartitionConfig {
    PartitionKind kind = PartitionKind::native;
    std::size_t alpha = 2;
    double beta = 0.5;
    std::size_t min_size = 0;  // 0: min(batch_size, n / clients)

    bool operator==(const PartitionConfig&) const = default;
};

struct ExperimentConfig {
    std::string name = "experiment";
    DatasetConfig dataset;
    PartitionConfig partition;
    std::size_t clients = 100;
    std::size_t rounds = 300;
    std::size_t local_epochs = 1;
    std::size_t batch_size = 128;
    double lr = 0.01;
    ArchKind arch = ArchKind::logistic;
    std::size_t hidden = 64;
    Strategy strategy = Strategy::fedavg;
    FedOptParams fedopt;
    LossConfig loss;
    double sample_fraction = 1.0;
    std::vector<std::uint64_t> seeds = {0};
    std::string output_dir = "runs/experiment";
    std::size_t threads = 1;          // seeds run concurrently
    bool record_deviation = false;    // per-round deviation summaries
    bool write_plot = true;

    bool operator==(const ExperimentConfig&) const = default;
};

std::string to_string(DatasetKind kind);
std::string to_string(PartitionKind kind);
std::string to_string(ArchKind kind);

// Text format: `key = value` lines, `[section]` headers, `#` comments. Values
// are numbers, booleans, "quoted strings" or [comma, separated] arrays.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& config);

// Assigns one field by its dotted name ("clients", "loss.tau", "partition.beta").
// The value uses the same syntax as the config file; bare words are accepted
// for string fields.
void set_config_field(ExperimentConfig& config, const std::string& key, const std::string& value);

// Throws ConfigError naming the first invalid field.
void validate_config(const ExperimentConfig& config);

}  // namespace fedlc

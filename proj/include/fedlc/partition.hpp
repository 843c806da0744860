#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "fedlc/data.hpp"
#include "fedlc/rng.hpp"

namespace fedlc {

enum class SchemeKind { quantity, dirichlet, external };

struct PartitionScheme {
    SchemeKind kind = SchemeKind::external;
    std::size_t alpha = 0;     // shards per client, Q(alpha)
    double beta = 0.0;         // Dirichlet concentration, D(beta)
    std::size_t min_size = 0;  // D(beta) redraw threshold

    std::string describe() const;
};

// Disjoint assignment of example indices to clients.
struct Partition {
    std::vector<std::vector<std::size_t>> assignments;
    std::size_t num_clients = 0;
    PartitionScheme scheme;
    std::uint64_t seed = 0;
};

// Q(alpha): stable sort by (label, index), cut into m*alpha contiguous shards
// (remainder spread over the leading shards), deal alpha shards to each client
// through a seeded shard permutation.
Partition partition_quantity(const Dataset& dataset, std::size_t num_clients, std::size_t alpha,
                             std::uint64_t seed);

// Draws the proportion vector for one class. `attempt` counts redraws.
using ProportionSampler =
    std::function<std::vector<double>(std::size_t label, std::size_t attempt, std::size_t num_clients)>;

inline constexpr std::size_t kDefaultDirichletRetries = 1000;

// D(beta): per class, split the shuffled class examples by the cumulative
// Dirichlet(beta * 1_m) proportions. Redraws everything while any client has
// fewer than min_size examples.
Partition partition_dirichlet(const Dataset& dataset, std::size_t num_clients, double beta,
                              std::size_t min_size, std::uint64_t seed,
                              std::size_t max_retries = kDefaultDirichletRetries);

// Same procedure with an injected proportion source.
Partition partition_dirichlet(const Dataset& dataset, std::size_t num_clients, std::size_t min_size,
                              std::uint64_t seed, const ProportionSampler& sampler,
                              std::size_t max_retries = kDefaultDirichletRetries);

std::vector<double> sample_dirichlet(Rng& rng, std::size_t size, double concentration);

// Throws PartitionError unless the lists are disjoint, cover 0..n-1 and every
// client owns at least one example.
void check_partition(const Partition& partition, std::size_t dataset_size);

std::vector<std::size_t> client_counts(const Partition& partition, const Dataset& dataset,
                                       std::size_t client);

// Majority / minority / missing split of one client's label histogram.
struct ClassStats {
    std::vector<std::size_t> counts;
    std::set<std::size_t> majority;
    std::set<std::size_t> minority;
    std::set<std::size_t> missing;
    double threshold_ratio = 0.5;
};

inline constexpr double kDefaultThresholdRatio = 0.5;

ClassStats class_stats(std::vector<std::size_t> counts, double threshold_ratio = kDefaultThresholdRatio);
ClassStats class_stats(const Partition& partition, const Dataset& dataset, std::size_t client,
                       double threshold_ratio = kDefaultThresholdRatio);

struct SkewReport {
    std::vector<std::vector<std::size_t>> histograms;  // client x class
    std::vector<std::vector<double>> tv_distance;      // client x client

    std::string histogram_csv() const;
    std::string distance_csv() const;
};

SkewReport skew_report(const Partition& partition, const Dataset& dataset);

double total_variation(std::span<const std::size_t> a, std::span<const std::size_t> b);

// Partition manifest: {scheme, alpha|beta, min_size, seed, num_clients, clients: [[...], ...]}
std::string partition_to_json(const Partition& partition);
Partition partition_from_json(const std::string& text);
void save_manifest(const Partition& partition, const std::filesystem::path& path);
Partition load_manifest(const std::filesystem::path& path);

}  // namespace fedlc

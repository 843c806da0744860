#include <algorithm>
#include <cmath>
#include <random>

#include "fedlc/data.hpp"
#include "fedlc/error.hpp"
#include "fedlc/rng.hpp"

namespace fedlc {

void SyntheticSpec::validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("lambda", "must be non-negative");
    if (!(mu >= 0.0)) throw ConfigError("mu", "must be non-negative");
    if (num_clients == 0) throw ConfigError("num_clients", "must be at least 1");
    if (dim == 0) throw ConfigError("dim", "must be positive");
    if (num_classes < 2) throw ConfigError("num_classes", "must be at least 2");
    if (min_size == 0) throw ConfigError("min_size", "must be positive");
    if (max_size < min_size) throw ConfigError("max_size", "must be >= min_size");
    if (!(power_law_exponent > 0.0)) throw ConfigError("power_law_exponent", "must be positive");
}

namespace {

SyntheticClient generate_client(const SyntheticSpec& spec, std::size_t index,
                                std::span<const double> feature_sd) {
    Rng rng = make_rng(spec.seed, Stream::synthetic_client, {index});
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const std::size_t d = spec.dim;
    const std::size_t k = spec.num_classes;

    SyntheticClient client;
    client.model_mean = spec.lambda * std_normal(rng);
    client.data_mean = spec.mu * std_normal(rng);

    client.weights.resize(k * d);
    for (auto& w : client.weights) w = client.model_mean + std_normal(rng);
    client.bias.resize(k);
    for (auto& b : client.bias) b = client.model_mean + std_normal(rng);
    client.feature_mean.resize(d);
    for (auto& v : client.feature_mean) v = client.data_mean + std_normal(rng);

    // Pareto(min_size, exponent) by inversion, capped.
    const double u = unit(rng);
    const double raw = static_cast<double>(spec.min_size) * std::pow(1.0 - u, -1.0 / spec.power_law_exponent);
    const auto n = static_cast<std::size_t>(
        std::clamp(std::floor(raw), static_cast<double>(spec.min_size), static_cast<double>(spec.max_size)));

    client.data.name = "synthetic_client_" + std::to_string(index);
    client.data.num_classes = k;
    client.data.dim = d;
    client.data.examples.reserve(n);

    std::vector<double> logits(k);
    for (std::size_t s = 0; s < n; ++s) {
        Example ex;
        ex.features.resize(d);
        for (std::size_t j = 0; j < d; ++j) {
            ex.features[j] = client.feature_mean[j] + feature_sd[j] * std_normal(rng);
        }
        for (std::size_t c = 0; c < k; ++c) {
            double acc = client.bias[c];
            const double* row = client.weights.data() + c * d;
            for (std::size_t j = 0; j < d; ++j) acc += row[j] * ex.features[j];
            logits[c] = acc;
        }
        ex.label = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
        client.data.examples.push_back(std::move(ex));
    }
    return client;
}

}  // namespace

std::vector<SyntheticClient> generate_synthetic_clients(const SyntheticSpec& spec) {
    spec.validate();
    std::vector<double> feature_sd(spec.dim);
    for (std::size_t j = 0; j < spec.dim; ++j) {
        feature_sd[j] = std::sqrt(std::pow(static_cast<double>(j + 1), -1.2));
    }
    std::vector<SyntheticClient> clients;
    clients.reserve(spec.num_clients);
    for (std::size_t i = 0; i < spec.num_clients; ++i) {
        clients.push_back(generate_client(spec, i, feature_sd));
    }
    return clients;
}

std::vector<Dataset> generate_synthetic(const SyntheticSpec& spec) {
    auto clients = generate_synthetic_clients(spec);
    std::vector<Dataset> out;
    out.reserve(clients.size());
    for (auto& c : clients) out.push_back(std::move(c.data));
    return out;
}

}  // namespace fedlc

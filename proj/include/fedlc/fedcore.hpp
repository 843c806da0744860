#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedlc/data.hpp"
#include "fedlc/loss.hpp"
#include "fedlc/model.hpp"

namespace fedlc {

enum class Strategy { fedavg, fednova, scaffold, fedopt };

std::string to_string(Strategy strategy);
Strategy parse_strategy(const std::string& name);

struct ClientState {
    std::size_t id = 0;
    Dataset data;
    std::vector<std::size_t> counts;
    std::optional<ModelParams> control;  // Scaffold c_i

    static ClientState make(std::size_t id, Dataset data);
};

// Server-side Adam (FedAdam) hyperparameters.
struct FedOptParams {
    double server_lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-3;

    bool operator==(const FedOptParams&) const = default;
};

struct ServerState {
    ModelParams global;
    Strategy strategy = Strategy::fedavg;
    FedOptParams fedopt;
    std::optional<ModelParams> first_moment;   // fedopt only
    std::optional<ModelParams> second_moment;  // fedopt only
    std::optional<ModelParams> control;        // scaffold only
    std::size_t round = 0;

    static ServerState make(ModelParams global, Strategy strategy, FedOptParams fedopt = {});
};

struct LocalTrainingOptions {
    std::size_t epochs = 1;
    std::size_t batch_size = 128;
    double lr = 0.01;
    std::uint64_t seed = 0;
    std::size_t round = 0;
};

struct LocalUpdateResult {
    ModelParams new_params;
    std::size_t num_steps = 0;  // E * ceil(n_i / B)
    ModelParams delta;          // global - new
    std::optional<ModelParams> new_control;
    std::optional<ModelParams> control_delta;  // c_i+ - c_i
    double train_loss = 0.0;    // mean over all examples seen
    std::size_t num_examples = 0;
};

struct ScaffoldContext {
    const ModelParams& global_control;  // c
    const ModelParams& client_control;  // c_i
};

// Mini-batch SGD from a clone of `global`. nullopt when the client has no data.
std::optional<LocalUpdateResult> local_update(const ClientState& client, const ModelParams& global,
                                              const LossSpec& loss, const LocalTrainingOptions& options,
                                              const std::optional<ScaffoldContext>& scaffold = std::nullopt);

// Weights must sum to one within 1e-9.
ModelParams aggregate_fedavg(std::span<const LocalUpdateResult> results, std::span<const double> weights);

ModelParams aggregate_fednova(const ModelParams& global, std::span<const LocalUpdateResult> results,
                              std::span<const double> weights);

struct ScaffoldAggregate {
    ModelParams global;
    ModelParams control;
};

ScaffoldAggregate aggregate_scaffold(const ModelParams& control, std::span<const LocalUpdateResult> results,
                                     std::span<const double> weights, std::size_t total_clients);

// Adam step on the pseudo-gradient sum_i p_i (global - new_i); updates the
// server moments in place and returns the new global.
ModelParams aggregate_fedopt(ServerState& server, std::span<const LocalUpdateResult> results,
                             std::span<const double> weights);

// Loss settings shared by all clients; per-client counts are filled in by
// build_client_loss.
struct LossConfig {
    LossKind kind = LossKind::standard_ce;
    double tau = 1.0;
    double count_floor = 1.0;
    CalibrationVariant variant = CalibrationVariant::inclusive;
    bool expel_missing = false;
    double prox_mu = 0.0;
    double alpha_rs = 0.5;

    bool operator==(const LossConfig&) const = default;
};

LossSpec build_client_loss(const LossConfig& config, std::span<const std::size_t> counts,
                           std::shared_ptr<const ModelParams> anchor);

struct RoundConfig {
    LossConfig loss;
    std::size_t epochs = 1;
    std::size_t batch_size = 128;
    double lr = 0.01;
    std::uint64_t seed = 0;
    std::size_t threads = 1;  // clients trained concurrently
    std::size_t total_clients = 0;  // scaffold participation ratio; 0 = clients.size()
};

struct RoundReport {
    std::size_t round = 0;
    std::string strategy;
    std::string loss_kind;
    double test_acc = 0.0;
    std::vector<double> per_class_acc;
    double mean_per_class_acc = 0.0;
    double mean_train_loss = 0.0;
    double wall_ms = 0.0;
    std::optional<nlohmann::json> deviation;

    nlohmann::json to_json() const;
    // Single JSON line; wall_ms is omitted when include_wall_clock is false.
    std::string to_jsonl(bool include_wall_clock = true) const;
};

// Runs local updates for the sampled clients, aggregates per the server
// strategy and evaluates the new global model on `test`.
RoundReport run_round(ServerState& server, std::vector<ClientState>& clients,
                      std::span<const std::size_t> sampled_ids, const RoundConfig& config, const Dataset& test);

// Relative local sizes n_i / sum n over the sampled clients.
std::vector<double> participation_weights(std::span<const ClientState> clients,
                                          std::span<const std::size_t> sampled_ids);

}  // namespace fedlc

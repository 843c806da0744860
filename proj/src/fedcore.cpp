#include "fedlc/fedcore.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "fedlc/diagnostics.hpp"
#include "fedlc/error.hpp"
#include "fedlc/rng.hpp"

namespace fedlc {

std::string to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::fedavg: return "fedavg";
        case Strategy::fednova: return "fednova";
        case Strategy::scaffold: return "scaffold";
        case Strategy::fedopt: return "fedopt";
    }
    return "unknown";
}

Strategy parse_strategy(const std::string& name) {
    if (name == "fedavg") return Strategy::fedavg;
    if (name == "fednova") return Strategy::fednova;
    if (name == "scaffold") return Strategy::scaffold;
    if (name == "fedopt") return Strategy::fedopt;
    throw ConfigError("strategy", "unknown strategy '" + name + "'");
}

ClientState ClientState::make(std::size_t id, Dataset data) {
    ClientState c;
    c.id = id;
    c.counts = class_counts(data);
    c.data = std::move(data);
    return c;
}

ServerState ServerState::make(ModelParams global, Strategy strategy, FedOptParams fedopt) {
    ServerState s;
    s.strategy = strategy;
    s.fedopt = fedopt;
    if (strategy == Strategy::fedopt) {
        s.first_moment = ModelParams(global.arch());
        s.second_moment = ModelParams(global.arch());
    }
    if (strategy == Strategy::scaffold) s.control = ModelParams(global.arch());
    s.global = std::move(global);
    return s;
}

std::optional<LocalUpdateResult> local_update(const ClientState& client, const ModelParams& global,
                                              const LossSpec& loss, const LocalTrainingOptions& options,
                                              const std::optional<ScaffoldContext>& scaffold) {
    if (options.epochs == 0) throw ConfigError("local_epochs", "must be at least 1");
    if (options.batch_size == 0) throw ConfigError("batch_size", "must be at least 1");
    if (client.data.empty()) return std::nullopt;

    const std::size_t n = client.data.size();
    const std::size_t k = global.arch().num_classes;
    LogitLoss objective(loss, k);

    std::optional<ModelParams> correction;  // c - c_i
    if (scaffold) {
        correction = scaffold->global_control;
        *correction -= scaffold->client_control;
    }

    LocalUpdateResult result;
    result.new_params = global;
    ModelParams& current = result.new_params;
    ModelParams grad(global.arch());
    ForwardTrace trace;
    std::vector<double> dlogits(k);
    std::vector<std::size_t> order(n);
    double loss_sum = 0.0;

    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng = make_rng(options.seed, Stream::batch_shuffle, {client.id, options.round, epoch});
        std::shuffle(order.begin(), order.end(), rng);

        for (std::size_t start = 0; start < n; start += options.batch_size) {
            const std::size_t stop = std::min(n, start + options.batch_size);
            const double scale = 1.0 / static_cast<double>(stop - start);
            grad.set_zero();
            for (std::size_t b = start; b < stop; ++b) {
                const auto& ex = client.data.examples[order[b]];
                forward(current, ex.features, trace);
                loss_sum += objective.evaluate(trace.logits, ex.label, dlogits);
                accumulate_gradient(current, ex.features, trace, dlogits, scale, grad);
            }
            if (loss.prox_mu > 0.0) grad += proximal_term(loss.prox_mu, current, *loss.anchor).grad;
            if (correction) grad += *correction;
            current.axpy(-options.lr, grad);
            ++result.num_steps;
        }
    }

    result.num_examples = n;
    result.train_loss = loss_sum / static_cast<double>(n * options.epochs);
    result.delta = global;
    result.delta -= current;

    if (scaffold) {
        // option II: c_i+ = c_i - c + (global - new) / (steps * lr)
        ModelParams next = scaffold->client_control;
        if (options.lr > 0.0) {
            next -= scaffold->global_control;
            next.axpy(1.0 / (static_cast<double>(result.num_steps) * options.lr), result.delta);
        }
        ModelParams change = next;
        change -= scaffold->client_control;
        result.new_control = std::move(next);
        result.control_delta = std::move(change);
    }
    return result;
}

namespace {

void check_inputs(std::span<const LocalUpdateResult> results, std::span<const double> weights) {
    if (results.empty()) throw std::invalid_argument("aggregation needs at least one result");
    if (results.size() != weights.size()) throw std::invalid_argument("one weight per result required");
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("aggregation weights sum to " + std::to_string(total) + ", expected 1");
    }
    const Arch& arch = results.front().new_params.arch();
    for (const auto& r : results) {
        if (!(r.new_params.arch() == arch)) throw DimensionError("results have different architectures");
    }
}

}  // namespace

ModelParams aggregate_fedavg(std::span<const LocalUpdateResult> results, std::span<const double> weights) {
    check_inputs(results, weights);
    ModelParams out(results.front().new_params.arch());
    for (std::size_t i = 0; i < results.size(); ++i) out.axpy(weights[i], results[i].new_params);
    return out;
}

ModelParams aggregate_fednova(const ModelParams& global, std::span<const LocalUpdateResult> results,
                              std::span<const double> weights) {
    check_inputs(results, weights);
    for (const auto& r : results) {
        if (r.num_steps == 0) throw std::invalid_argument("FedNova needs tau_i >= 1 for every client");
    }
    // Equal tau_i cancel exactly (tau_eff / tau_i = sum p_i = 1): plain weighted average.
    const bool uniform = std::all_of(results.begin(), results.end(),
                                     [&](const auto& r) { return r.num_steps == results.front().num_steps; });
    if (uniform) return aggregate_fedavg(results, weights);

    double tau_eff = 0.0;
    for (std::size_t i = 0; i < results.size(); ++i) tau_eff += weights[i] * static_cast<double>(results[i].num_steps);
    ModelParams direction(global.arch());
    for (std::size_t i = 0; i < results.size(); ++i) {
        direction.axpy(weights[i] / static_cast<double>(results[i].num_steps), results[i].delta);
    }
    return axpy_params(-tau_eff, direction, global);
}

ScaffoldAggregate aggregate_scaffold(const ModelParams& control, std::span<const LocalUpdateResult> results,
                                     std::span<const double> weights, std::size_t total_clients) {
    check_inputs(results, weights);
    if (total_clients < results.size()) throw std::invalid_argument("more participants than clients");
    ScaffoldAggregate out{aggregate_fedavg(results, weights), control};
    ModelParams mean_change(control.arch());
    for (const auto& r : results) {
        if (!r.control_delta) throw std::invalid_argument("scaffold aggregation needs control deltas");
        mean_change += *r.control_delta;
    }
    const double participants = static_cast<double>(results.size());
    out.control.axpy((participants / static_cast<double>(total_clients)) / participants, mean_change);
    return out;
}

ModelParams aggregate_fedopt(ServerState& server, std::span<const LocalUpdateResult> results,
                             std::span<const double> weights) {
    check_inputs(results, weights);
    if (!server.first_moment || !server.second_moment) {
        server.first_moment = ModelParams(server.global.arch());
        server.second_moment = ModelParams(server.global.arch());
    }
    ModelParams pseudo(server.global.arch());
    for (std::size_t i = 0; i < results.size(); ++i) pseudo.axpy(weights[i], results[i].delta);

    const auto& h = server.fedopt;
    auto m = server.first_moment->flat();
    auto v = server.second_moment->flat();
    const auto g = pseudo.flat();
    ModelParams out = server.global;
    auto w = out.flat();
    for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
        v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
        w[i] -= h.server_lr * m[i] / (std::sqrt(v[i]) + h.eps);
    }
    return out;
}

LossSpec build_client_loss(const LossConfig& config, std::span<const std::size_t> counts,
                           std::shared_ptr<const ModelParams> anchor) {
    LossSpec spec;
    spec.kind = config.kind;
    spec.prox_mu = config.prox_mu;
    if (config.prox_mu > 0.0) spec.anchor = std::move(anchor);
    if (config.kind == LossKind::fedlc) {
        spec.calibration = make_calibration(config.tau, counts, config.count_floor);
        spec.calibration.variant = config.variant;
        spec.calibration.expel_missing = config.expel_missing;
    }
    if (config.kind == LossKind::fedrs) {
        spec.alpha_rs = config.alpha_rs;
        spec.observed.resize(counts.size());
        for (std::size_t i = 0; i < counts.size(); ++i) spec.observed[i] = counts[i] > 0;
    }
    return spec;
}

std::vector<double> participation_weights(std::span<const ClientState> clients,
                                          std::span<const std::size_t> sampled_ids) {
    double total = 0.0;
    for (auto id : sampled_ids) total += static_cast<double>(clients[id].data.size());
    std::vector<double> w;
    w.reserve(sampled_ids.size());
    for (auto id : sampled_ids) w.push_back(total > 0.0 ? static_cast<double>(clients[id].data.size()) / total : 0.0);
    return w;
}

nlohmann::json RoundReport::to_json() const {
    nlohmann::json j;
    j["round"] = round;
    j["strategy"] = strategy;
    j["loss_kind"] = loss_kind;
    j["test_acc"] = test_acc;
    j["per_class_acc"] = per_class_acc;
    j["mean_per_class_acc"] = mean_per_class_acc;
    j["mean_train_loss"] = mean_train_loss;
    j["wall_ms"] = wall_ms;
    if (deviation) j["deviation"] = *deviation;
    return j;
}

std::string RoundReport::to_jsonl(bool include_wall_clock) const {
    auto j = to_json();
    if (!include_wall_clock) j.erase("wall_ms");
    return j.dump() + "\n";
}

RoundReport run_round(ServerState& server, std::vector<ClientState>& clients,
                      std::span<const std::size_t> sampled_ids, const RoundConfig& config, const Dataset& test) {
    const auto started = std::chrono::steady_clock::now();
    if (sampled_ids.empty()) throw std::invalid_argument("round needs at least one sampled client");
    for (auto id : sampled_ids) {
        if (id >= clients.size()) throw std::invalid_argument("sampled client id out of range");
    }

    const bool scaffold = server.strategy == Strategy::scaffold;
    if (scaffold && !server.control) server.control = ModelParams(server.global.arch());
    std::shared_ptr<const ModelParams> anchor;
    if (config.loss.prox_mu > 0.0) anchor = std::make_shared<const ModelParams>(server.global);
    if (scaffold) {
        for (auto id : sampled_ids) {
            if (!clients[id].control) clients[id].control = ModelParams(server.global.arch());
        }
    }

    std::vector<std::optional<LocalUpdateResult>> slots(sampled_ids.size());
    auto train = [&](std::size_t slot) {
        const ClientState& client = clients[sampled_ids[slot]];
        const LossSpec loss = build_client_loss(config.loss, client.counts, anchor);
        LocalTrainingOptions opts{config.epochs, config.batch_size, config.lr, config.seed, server.round};
        std::optional<ScaffoldContext> ctx;
        if (scaffold) ctx.emplace(ScaffoldContext{*server.control, *client.control});
        slots[slot] = local_update(client, server.global, loss, opts, ctx);
    };

    const std::size_t workers = std::clamp<std::size_t>(config.threads, 1, sampled_ids.size());
    if (workers == 1) {
        for (std::size_t s = 0; s < slots.size(); ++s) train(s);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t s = next++; s < slots.size(); s = next++) train(s);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    std::vector<LocalUpdateResult> results;
    std::vector<std::size_t> participants;
    for (std::size_t s = 0; s < slots.size(); ++s) {
        if (!slots[s]) continue;
        results.push_back(std::move(*slots[s]));
        participants.push_back(sampled_ids[s]);
    }
    if (results.empty()) throw std::runtime_error("every sampled client was skipped (no local data)");

    const auto weights = participation_weights(clients, participants);
    double loss_sum = 0.0, seen = 0.0;
    for (const auto& r : results) {
        loss_sum += r.train_loss * static_cast<double>(r.num_examples);
        seen += static_cast<double>(r.num_examples);
    }

    switch (server.strategy) {
        case Strategy::fedavg: server.global = aggregate_fedavg(results, weights); break;
        case Strategy::fednova: server.global = aggregate_fednova(server.global, results, weights); break;
        case Strategy::fedopt: server.global = aggregate_fedopt(server, results, weights); break;
        case Strategy::scaffold: {
            const std::size_t total = config.total_clients ? config.total_clients : clients.size();
            auto agg = aggregate_scaffold(*server.control, results, weights, total);
            server.global = std::move(agg.global);
            server.control = std::move(agg.control);
            for (std::size_t i = 0; i < results.size(); ++i) {
                clients[participants[i]].control = std::move(*results[i].new_control);
            }
            break;
        }
    }
    ++server.round;

    RoundReport report;
    report.round = server.round;
    report.strategy = to_string(server.strategy);
    report.loss_kind = to_string(config.loss.kind);
    report.mean_train_loss = loss_sum / seen;
    if (!test.empty()) {
        const auto acc = per_class_accuracy(server.global, test);
        report.test_acc = acc.overall;
        report.per_class_acc = acc.accuracy;
        report.mean_per_class_acc = acc.mean;
    }
    report.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return report;
}

}  // namespace fedlc

#include "fedlc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fedlc/diagnostics.hpp"
#include "fedlc/error.hpp"
#include "fedlc/fileio.hpp"
#include "fedlc/rng.hpp"

namespace fedlc {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path resolve_output_path(const fs::path& path) {
    if (path.is_absolute()) return path;
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / path;
    return path;
}

Dataset load_dataset(const DatasetConfig& config, bool train) {
    switch (config.kind) {
        case DatasetKind::idx:
            return train ? load_idx(config.train_images, config.train_labels, 0)
                         : load_idx(config.test_images, config.test_labels, 0);
        case DatasetKind::csv:
            return load_csv(train ? config.train_csv : config.test_csv, config.num_classes);
        case DatasetKind::synthetic:
            break;
    }
    throw ConfigError("dataset.kind", "synthetic data is generated, not loaded");
}

std::size_t effective_min_size(const ExperimentConfig& config, std::size_t train_size) {
    if (config.partition.min_size > 0) return config.partition.min_size;
    return std::max<std::size_t>(1, std::min(config.batch_size, train_size / config.clients));
}

namespace {

Partition make_partition(const ExperimentConfig& config, const Dataset& train, std::uint64_t seed) {
    if (config.partition.kind == PartitionKind::quantity) {
        return partition_quantity(train, config.clients, config.partition.alpha, seed);
    }
    return partition_dirichlet(train, config.clients, config.partition.beta,
                               effective_min_size(config, train.size()), seed);
}

std::vector<Dataset> split_by_partition(const Dataset& train, const Partition& partition) {
    std::vector<Dataset> out;
    out.reserve(partition.num_clients);
    for (std::size_t c = 0; c < partition.num_clients; ++c) {
        out.push_back(train.subset(partition.assignments[c], train.name + "/client" + std::to_string(c)));
    }
    return out;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& config, std::uint64_t seed) {
    PreparedData out;
    const auto& d = config.dataset;
    if (d.kind == DatasetKind::synthetic) {
        SyntheticSpec spec;
        spec.lambda = d.lambda;
        spec.mu = d.mu;
        spec.num_clients = config.clients;
        spec.dim = d.dim;
        spec.num_classes = d.num_classes;
        spec.min_size = d.min_size;
        spec.max_size = d.max_size;
        spec.power_law_exponent = d.power_law_exponent;
        spec.seed = seed;
        auto generated = generate_synthetic(spec);

        std::vector<Dataset> train_parts, test_parts;
        for (std::size_t c = 0; c < generated.size(); ++c) {
            const Dataset& all = generated[c];
            std::vector<std::size_t> order(all.size());
            std::iota(order.begin(), order.end(), 0);
            Rng rng = make_rng(seed, Stream::synthetic_split, {c});
            std::shuffle(order.begin(), order.end(), rng);
            auto held = static_cast<std::size_t>(std::floor(d.test_fraction * static_cast<double>(all.size())));
            held = std::min(held, all.size() - 1);
            std::vector<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
            std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
            std::sort(test_idx.begin(), test_idx.end());
            std::sort(train_idx.begin(), train_idx.end());
            train_parts.push_back(all.subset(train_idx, all.name));
            test_parts.push_back(all.subset(test_idx, all.name + "/test"));
        }
        out.test = concatenate(test_parts, "synthetic/test");
        out.num_classes = d.num_classes;
        out.dim = d.dim;
        if (config.partition.kind == PartitionKind::native) {
            out.clients = std::move(train_parts);
        } else {
            Dataset pooled = concatenate(train_parts, "synthetic/train");
            out.partition = make_partition(config, pooled, seed);
            out.clients = split_by_partition(pooled, *out.partition);
        }
    } else {
        Dataset train = load_dataset(d, true);
        Dataset test = load_dataset(d, false);
        if (train.empty()) throw IngestionError("dataset", "training set is empty");
        if (test.dim != train.dim) throw IngestionError("dataset", "train and test feature sizes differ");
        const std::size_t k = std::max(train.num_classes, test.num_classes);
        train.num_classes = k;
        test.num_classes = k;
        out.num_classes = k;
        out.dim = train.dim;
        out.partition = make_partition(config, train, seed);
        out.clients = split_by_partition(train, *out.partition);
        out.test = std::move(test);
    }
    if (out.test.empty()) throw IngestionError("dataset", "test set is empty");
    return out;
}

std::vector<std::size_t> sample_clients(std::size_t num_clients, double fraction, std::uint64_t seed,
                                        std::size_t round) {
    std::vector<std::size_t> ids(num_clients);
    std::iota(ids.begin(), ids.end(), 0);
    if (fraction >= 1.0) return ids;
    const auto k = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(fraction * static_cast<double>(num_clients))), 1, num_clients);
    Rng rng = make_rng(seed, Stream::client_sampling, {round});
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(k);
    std::sort(ids.begin(), ids.end());
    return ids;
}

namespace {

struct DeviationTally {
    std::size_t pairs = 0;
    std::size_t defined = 0;
    std::size_t flagged = 0;
    std::vector<double> bounds;

    void add(const DeviationReport& report) {
        for (const auto& e : report.entries) {
            ++pairs;
            if (e.bound) {
                ++defined;
                bounds.push_back(*e.bound);
            }
            if (e.flagged) ++flagged;
        }
    }

    json to_json() {
        json j{{"pairs", pairs}, {"defined", defined}, {"flagged", flagged}};
        if (bounds.empty()) {
            j["median_bound"] = nullptr;
        } else {
            auto mid = bounds.begin() + static_cast<std::ptrdiff_t>(bounds.size() / 2);
            std::nth_element(bounds.begin(), mid, bounds.end());
            j["median_bound"] = *mid;
        }
        return j;
    }
};

json deviation_summary(const ModelParams& global, const std::vector<ClientState>& clients,
                       std::span<const std::size_t> ids, const LossConfig& loss) {
    DeviationTally plain, calibrated;
    for (auto id : ids) {
        const auto& client = clients[id];
        if (client.data.empty()) continue;
        const auto stats = class_stats(client.counts);
        plain.add(deviation_report(class_aggregates(global, client.data), stats, kDefaultDominanceFactor));
        if (loss.kind == LossKind::fedlc) {
            auto calib = make_calibration(loss.tau, client.counts, loss.count_floor);
            auto agg = class_aggregates_calibrated(global, client.data, calib);
            calibrated.add(deviation_report(agg, stats, kDefaultDominanceFactor, &calib));
        }
    }
    json j{{"plain", plain.to_json()}};
    if (loss.kind == LossKind::fedlc) j["calibrated"] = calibrated.to_json();
    return j;
}

Arch make_arch(const ExperimentConfig& config, std::size_t dim, std::size_t k) {
    return config.arch == ArchKind::logistic ? Arch::logistic(dim, k) : Arch::mlp(dim, config.hidden, k);
}

}  // namespace

SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed, std::size_t client_threads,
                    const RoundObserver& observer) {
    validate_config(config);
    auto data = prepare_data(config, seed);

    std::vector<ClientState> clients;
    clients.reserve(data.clients.size());
    for (std::size_t i = 0; i < data.clients.size(); ++i) {
        data.clients[i].num_classes = data.num_classes;
        clients.push_back(ClientState::make(i, std::move(data.clients[i])));
    }

    auto server = ServerState::make(init_params(make_arch(config, data.dim, data.num_classes), seed),
                                    config.strategy, config.fedopt);
    RoundConfig rc;
    rc.loss = config.loss;
    rc.epochs = config.local_epochs;
    rc.batch_size = config.batch_size;
    rc.lr = config.lr;
    rc.seed = seed;
    rc.threads = std::max<std::size_t>(1, client_threads);
    rc.total_clients = clients.size();

    SeedResult result;
    result.seed = seed;
    result.rounds.reserve(config.rounds);
    for (std::size_t r = 0; r < config.rounds; ++r) {
        const auto ids = sample_clients(clients.size(), config.sample_fraction, seed, r);
        auto report = run_round(server, clients, ids, rc, data.test);
        if (config.record_deviation) report.deviation = deviation_summary(server.global, clients, ids, config.loss);
        if (observer) observer(seed, report);
        result.rounds.push_back(std::move(report));
    }
    result.final_accuracy = per_class_accuracy(server.global, data.test);
    result.final_params = std::move(server.global);
    return result;
}

SummaryStat summarize(std::vector<double> values) {
    SummaryStat s;
    s.values = std::move(values);
    if (s.values.empty()) return s;
    const double n = static_cast<double>(s.values.size());
    s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
    if (s.values.size() > 1) {
        double ss = 0.0;
        for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

std::string RunArtifact::summary_line(const std::string& name) const {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << name << ": test_acc " << 100.0 * final_accuracy.mean << " +/- "
        << 100.0 * final_accuracy.std << ", mean per-class acc " << 100.0 * final_mean_per_class.mean << " +/- "
        << 100.0 * final_mean_per_class.std << " over " << final_accuracy.values.size() << " seed(s)";
    return out.str();
}

namespace {

json stat_json(const SummaryStat& s) { return json{{"mean", s.mean}, {"std", s.std}, {"values", s.values}}; }

SummaryStat stat_from_json(const json& j) {
    SummaryStat s;
    s.mean = j.at("mean").get<double>();
    s.std = j.at("std").get<double>();
    s.values = j.at("values").get<std::vector<double>>();
    return s;
}

std::string seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

}  // namespace

RunArtifact run_experiment(const ExperimentConfig& config, std::ostream* log) {
    validate_config(config);
    RunArtifact art;
    art.directory = resolve_output_path(config.output_dir);
    fs::create_directories(art.directory);
    art.config_snapshot = art.directory / "config.cfg";
    write_file_atomic(art.config_snapshot, serialize_config(config));

    const std::size_t n = config.seeds.size();
    const std::size_t workers = std::clamp<std::size_t>(config.threads, 1, n);
    const std::size_t client_threads = std::max<std::size_t>(1, config.threads / workers);
    std::vector<std::optional<SeedResult>> results(n);
    std::mutex log_mutex;

    auto run_one = [&](std::size_t i) {
        const auto seed = config.seeds[i];
        auto res = run_seed(config, seed, client_threads);
        const auto dir = art.directory / seed_dir(seed);
        std::string lines;
        for (const auto& r : res.rounds) lines += r.to_jsonl(true);
        write_file_atomic(dir / "metrics.jsonl", lines);
        write_file_atomic(dir / "final.ckpt", encode_checkpoint(res.final_params));
        if (log) {
            std::lock_guard lock(log_mutex);
            *log << "seed " << seed << ": final test_acc " << std::fixed << std::setprecision(4)
                 << res.final_accuracy.overall << '\n';
        }
        results[i] = std::move(res);
    };

    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = next++; i < n; i = next++) run_one(i);
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

    std::ostringstream per_class;
    per_class << "seed,class,count,accuracy\n";
    per_class << std::setprecision(17);
    std::vector<double> acc, mean_pc;
    json metrics = json::array();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& res = *results[i];
        const auto& fa = res.final_accuracy;
        for (std::size_t c = 0; c < fa.accuracy.size(); ++c) {
            per_class << res.seed << ',' << c << ',' << fa.counts[c] << ',' << fa.accuracy[c] << '\n';
        }
        // The final round report carries the same numbers; read them from there
        // so the summary matches the JSONL exactly.
        acc.push_back(res.rounds.back().test_acc);
        mean_pc.push_back(res.rounds.back().mean_per_class_acc);
        art.metrics.push_back(art.directory / seed_dir(res.seed) / "metrics.jsonl");
        metrics.push_back(seed_dir(res.seed) + "/metrics.jsonl");
    }
    art.per_class_csv = art.directory / "per_class.csv";
    write_file_atomic(art.per_class_csv, per_class.str());
    art.final_accuracy = summarize(acc);
    art.final_mean_per_class = summarize(mean_pc);

    if (config.write_plot) {
        art.plot_svg = art.directory / "accuracy.svg";
        emit_plot(art.metrics, *art.plot_svg);
    }

    json summary{{"name", config.name},
                 {"seeds", config.seeds},
                 {"rounds", config.rounds},
                 {"final_test_acc", stat_json(art.final_accuracy)},
                 {"final_mean_per_class_acc", stat_json(art.final_mean_per_class)},
                 {"metrics", metrics},
                 {"per_class_csv", "per_class.csv"},
                 {"config", "config.cfg"}};
    summary["plot"] = art.plot_svg ? json("accuracy.svg") : json(nullptr);
    art.summary_json = art.directory / "summary.json";
    write_file_atomic(art.summary_json, summary.dump(2) + "\n");
    return art;
}

RunArtifact load_artifact(const fs::path& directory) {
    RunArtifact art;
    art.directory = directory;
    art.summary_json = directory / "summary.json";
    const auto j = json::parse(read_file(art.summary_json));
    art.config_snapshot = directory / j.at("config").get<std::string>();
    art.per_class_csv = directory / j.at("per_class_csv").get<std::string>();
    for (const auto& m : j.at("metrics")) art.metrics.push_back(directory / m.get<std::string>());
    if (!j.at("plot").is_null()) art.plot_svg = directory / j.at("plot").get<std::string>();
    art.final_accuracy = stat_from_json(j.at("final_test_acc"));
    art.final_mean_per_class = stat_from_json(j.at("final_mean_per_class_acc"));
    return art;
}

MethodSpec parse_method(const std::string& text) {
    MethodSpec m;
    m.label = text;
    if (text.empty()) throw ConfigError("methods", "empty method name");
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, '+')) {
        if (tok == "fedavg" || tok == "fednova" || tok == "scaffold" || tok == "fedopt") {
            m.strategy = parse_strategy(tok);
        } else if (tok == "ce" || tok == "standard_ce") {
            m.loss = LossKind::standard_ce;
        } else if (tok == "fedlc" || tok == "fedrs") {
            m.loss = parse_loss_kind(tok);
        } else if (tok == "prox") {
            m.prox = true;
        } else if (tok == "fedprox") {
            m.prox = true;
            m.loss = LossKind::standard_ce;
        } else {
            throw ConfigError("methods", "unknown method component '" + tok + "' in '" + text + "'");
        }
    }
    return m;
}

ExperimentConfig apply_method(ExperimentConfig config, const MethodSpec& method) {
    config.strategy = method.strategy;
    config.loss.kind = method.loss;
    if (method.prox) {
        if (!(config.loss.prox_mu > 0.0)) config.loss.prox_mu = kDefaultProxMu;
    } else {
        config.loss.prox_mu = 0.0;
    }
    return config;
}

SweepResult run_sweep(const ExperimentConfig& base, const SweepSpec& sweep, std::ostream* log) {
    if (sweep.axis.empty()) throw ConfigError("axis", "missing sweep axis");
    if (sweep.values.empty()) throw ConfigError("values", "sweep needs at least one value");
    if (sweep.methods.empty()) throw ConfigError("methods", "sweep needs at least one method");
    std::vector<MethodSpec> methods;
    for (const auto& m : sweep.methods) methods.push_back(parse_method(m));

    // Validate every cell before running any of them.
    const fs::path root = resolve_output_path(base.output_dir);
    std::vector<std::vector<ExperimentConfig>> cells;
    for (const auto& value : sweep.values) {
        ExperimentConfig axis_cfg = base;
        set_config_field(axis_cfg, sweep.axis, value);
        auto& row = cells.emplace_back();
        for (const auto& m : methods) {
            auto c = apply_method(axis_cfg, m);
            c.name = base.name + " " + sweep.axis + "=" + value + " " + m.label;
            c.output_dir = (root / (sweep.axis + "=" + value) / m.label).string();
            validate_config(c);
            row.push_back(std::move(c));
        }
    }

    SweepResult out;
    std::ostringstream table, stds;
    table << sweep.axis;
    stds << sweep.axis;
    for (const auto& m : methods) {
        table << ',' << m.label;
        stds << ',' << m.label;
    }
    table << '\n';
    stds << '\n';
    table << std::setprecision(10);
    stds << std::setprecision(10);
    for (std::size_t v = 0; v < sweep.values.size(); ++v) {
        table << sweep.values[v];
        stds << sweep.values[v];
        for (const auto& c : cells[v]) {
            const fs::path dir = c.output_dir;
            RunArtifact art;
            if (fs::exists(dir / "summary.json")) {
                art = load_artifact(dir);
                ++out.runs_skipped;
                if (log) *log << "skip (done): " << c.name << '\n';
            } else {
                art = run_experiment(c, log);
                if (log) *log << art.summary_line(c.name) << '\n';
                ++out.runs_executed;
            }
            table << ',' << art.final_accuracy.mean;
            stds << ',' << art.final_accuracy.std;
        }
        table << '\n';
        stds << '\n';
    }
    out.table_csv = root / "table.csv";
    out.std_csv = root / "table_std.csv";
    write_file_atomic(out.table_csv, table.str());
    write_file_atomic(out.std_csv, stds.str());
    return out;
}

}  // namespace fedlc

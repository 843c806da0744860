#include "fedlc/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fedlc/error.hpp"
#include "fedlc/fileio.hpp"

namespace fedlc {

std::string PartitionScheme::describe() const {
    std::ostringstream out;
    switch (kind) {
        case SchemeKind::quantity: out << "Q(" << alpha << ")"; break;
        case SchemeKind::dirichlet: out << "D(" << beta << ")"; break;
        case SchemeKind::external: out << "external"; break;
    }
    return out.str();
}

Partition partition_quantity(const Dataset& dataset, std::size_t num_clients, std::size_t alpha,
                             std::uint64_t seed) {
    const std::size_t n = dataset.size();
    if (num_clients == 0) throw PartitionError("number of clients must be at least 1");
    if (alpha == 0) throw PartitionError("alpha must be at least 1");
    const std::size_t num_shards = num_clients * alpha;
    if (num_shards > n) {
        throw PartitionError("infeasible partition: " + std::to_string(num_shards) + " shards for " +
                             std::to_string(n) + " examples");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dataset.examples[a].label < dataset.examples[b].label;
    });

    // shard s covers order[begin[s], begin[s+1])
    const std::size_t base = n / num_shards;
    const std::size_t extra = n % num_shards;
    std::vector<std::size_t> begin(num_shards + 1, 0);
    for (std::size_t s = 0; s < num_shards; ++s) begin[s + 1] = begin[s] + base + (s < extra ? 1 : 0);

    std::vector<std::size_t> shard_perm(num_shards);
    std::iota(shard_perm.begin(), shard_perm.end(), 0);
    Rng rng = make_rng(seed, Stream::quantity_shards);
    std::shuffle(shard_perm.begin(), shard_perm.end(), rng);

    Partition out;
    out.num_clients = num_clients;
    out.scheme = {SchemeKind::quantity, alpha, 0.0, 0};
    out.seed = seed;
    out.assignments.resize(num_clients);
    for (std::size_t c = 0; c < num_clients; ++c) {
        auto& list = out.assignments[c];
        for (std::size_t a = 0; a < alpha; ++a) {
            const std::size_t s = shard_perm[c * alpha + a];
            list.insert(list.end(), order.begin() + static_cast<std::ptrdiff_t>(begin[s]),
                        order.begin() + static_cast<std::ptrdiff_t>(begin[s + 1]));
        }
        std::sort(list.begin(), list.end());
    }
    return out;
}

std::vector<double> sample_dirichlet(Rng& rng, std::size_t size, double concentration) {
    std::gamma_distribution<double> gamma(concentration, 1.0);
    std::vector<double> p(size);
    double total = 0.0;
    for (auto& v : p) {
        v = gamma(rng);
        total += v;
    }
    if (!(total > 0.0)) {
        // every gamma draw underflowed: the limit is a vertex of the simplex
        std::uniform_int_distribution<std::size_t> pick(0, size - 1);
        std::fill(p.begin(), p.end(), 0.0);
        p[pick(rng)] = 1.0;
        return p;
    }
    for (auto& v : p) v /= total;
    return p;
}

Partition partition_dirichlet(const Dataset& dataset, std::size_t num_clients, double beta,
                              std::size_t min_size, std::uint64_t seed, std::size_t max_retries) {
    if (!(beta > 0.0)) throw PartitionError("beta must be positive");
    ProportionSampler sampler = [seed, beta](std::size_t label, std::size_t attempt, std::size_t m) {
        Rng rng = make_rng(seed, Stream::dirichlet_class, {attempt, label});
        return sample_dirichlet(rng, m, beta);
    };
    Partition out = partition_dirichlet(dataset, num_clients, min_size, seed, sampler, max_retries);
    out.scheme.beta = beta;
    return out;
}

Partition partition_dirichlet(const Dataset& dataset, std::size_t num_clients, std::size_t min_size,
                              std::uint64_t seed, const ProportionSampler& sampler,
                              std::size_t max_retries) {
    const std::size_t n = dataset.size();
    if (num_clients == 0) throw PartitionError("number of clients must be at least 1");
    if (min_size == 0) throw PartitionError("min_size must be at least 1");
    if (num_clients * min_size > n) {
        throw PartitionError("infeasible partition: " + std::to_string(num_clients) + " clients x min_size " +
                             std::to_string(min_size) + " exceeds " + std::to_string(n) +
                             " examples; use a smaller min_size");
    }

    // class members in a seeded order, fixed across redraws
    std::vector<std::vector<std::size_t>> by_class(dataset.num_classes);
    for (std::size_t i = 0; i < n; ++i) by_class[dataset.examples[i].label].push_back(i);
    for (std::size_t k = 0; k < by_class.size(); ++k) {
        Rng rng = make_rng(seed, Stream::dirichlet_shuffle, {k});
        std::shuffle(by_class[k].begin(), by_class[k].end(), rng);
    }

    for (std::size_t attempt = 0; attempt < max_retries; ++attempt) {
        std::vector<std::vector<std::size_t>> lists(num_clients);
        for (std::size_t k = 0; k < by_class.size(); ++k) {
            const auto& members = by_class[k];
            if (members.empty()) continue;
            auto p = sampler(k, attempt, num_clients);
            if (p.size() != num_clients) throw PartitionError("proportion vector has wrong length");
            double total = 0.0;
            for (double v : p) {
                if (!(v >= 0.0)) throw PartitionError("proportions must be non-negative");
                total += v;
            }
            if (!(total > 0.0)) throw PartitionError("proportions must not all be zero");

            const std::size_t nk = members.size();
            double cumulative = 0.0;
            std::size_t start = 0;
            for (std::size_t c = 0; c < num_clients; ++c) {
                cumulative += p[c] / total;
                std::size_t stop = (c + 1 == num_clients)
                                       ? nk
                                       : std::min(nk, static_cast<std::size_t>(std::floor(cumulative * nk)));
                stop = std::max(stop, start);
                lists[c].insert(lists[c].end(), members.begin() + static_cast<std::ptrdiff_t>(start),
                                members.begin() + static_cast<std::ptrdiff_t>(stop));
                start = stop;
            }
        }
        const bool ok = std::all_of(lists.begin(), lists.end(),
                                    [&](const auto& l) { return l.size() >= min_size; });
        if (!ok) continue;

        Partition out;
        out.num_clients = num_clients;
        out.scheme = {SchemeKind::dirichlet, 0, 0.0, min_size};
        out.seed = seed;
        for (auto& l : lists) std::sort(l.begin(), l.end());
        out.assignments = std::move(lists);
        return out;
    }
    throw PartitionError("infeasible partition: no Dirichlet draw in " + std::to_string(max_retries) +
                         " attempts gave every client min_size=" + std::to_string(min_size) +
                         " examples; use a smaller min_size");
}

void check_partition(const Partition& partition, std::size_t dataset_size) {
    if (partition.assignments.size() != partition.num_clients) {
        throw PartitionError("assignment count differs from num_clients");
    }
    std::vector<char> seen(dataset_size, 0);
    std::size_t total = 0;
    for (std::size_t c = 0; c < partition.assignments.size(); ++c) {
        const auto& list = partition.assignments[c];
        if (list.empty()) throw PartitionError("client " + std::to_string(c) + " has no examples");
        for (auto idx : list) {
            if (idx >= dataset_size) throw PartitionError("index " + std::to_string(idx) + " out of range");
            if (seen[idx]) throw PartitionError("index " + std::to_string(idx) + " assigned twice");
            seen[idx] = 1;
            ++total;
        }
    }
    if (partition.scheme.kind != SchemeKind::external && total != dataset_size) {
        throw PartitionError("partition drops " + std::to_string(dataset_size - total) + " examples");
    }
}

std::vector<std::size_t> client_counts(const Partition& partition, const Dataset& dataset,
                                       std::size_t client) {
    std::vector<std::size_t> counts(dataset.num_classes, 0);
    for (auto idx : partition.assignments.at(client)) ++counts.at(dataset.examples.at(idx).label);
    return counts;
}

ClassStats class_stats(std::vector<std::size_t> counts, double threshold_ratio) {
    ClassStats stats;
    stats.threshold_ratio = threshold_ratio;
    const std::size_t max_count = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) {
            stats.missing.insert(k);
        } else if (static_cast<double>(counts[k]) >= threshold_ratio * static_cast<double>(max_count)) {
            stats.majority.insert(k);
        } else {
            stats.minority.insert(k);
        }
    }
    stats.counts = std::move(counts);
    return stats;
}

ClassStats class_stats(const Partition& partition, const Dataset& dataset, std::size_t client,
                       double threshold_ratio) {
    return class_stats(client_counts(partition, dataset, client), threshold_ratio);
}

double total_variation(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    const double na = std::accumulate(a.begin(), a.end(), 0.0);
    const double nb = std::accumulate(b.begin(), b.end(), 0.0);
    if (na == 0.0 && nb == 0.0) return 0.0;
    if (na == 0.0 || nb == 0.0) return 1.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sum += std::abs(a[k] / na - b[k] / nb);
    return 0.5 * sum;
}

SkewReport skew_report(const Partition& partition, const Dataset& dataset) {
    SkewReport report;
    for (std::size_t c = 0; c < partition.num_clients; ++c) {
        report.histograms.push_back(client_counts(partition, dataset, c));
    }
    const std::size_t m = report.histograms.size();
    report.tv_distance.assign(m, std::vector<double>(m, 0.0));
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            const double d = total_variation(report.histograms[a], report.histograms[b]);
            report.tv_distance[a][b] = d;
            report.tv_distance[b][a] = d;
        }
    }
    return report;
}

std::string SkewReport::histogram_csv() const {
    std::ostringstream out;
    out << "client";
    const std::size_t k = histograms.empty() ? 0 : histograms.front().size();
    for (std::size_t c = 0; c < k; ++c) out << ",class_" << c;
    out << ",total\n";
    for (std::size_t i = 0; i < histograms.size(); ++i) {
        out << i;
        std::size_t total = 0;
        for (auto v : histograms[i]) {
            out << ',' << v;
            total += v;
        }
        out << ',' << total << '\n';
    }
    return out.str();
}

std::string SkewReport::distance_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "client_a,client_b,tv_distance\n";
    for (std::size_t a = 0; a < tv_distance.size(); ++a) {
        for (std::size_t b = a + 1; b < tv_distance.size(); ++b) {
            out << a << ',' << b << ',' << tv_distance[a][b] << '\n';
        }
    }
    return out.str();
}

std::string partition_to_json(const Partition& partition) {
    nlohmann::json j;
    switch (partition.scheme.kind) {
        case SchemeKind::quantity:
            j["scheme"] = "quantity";
            j["alpha"] = partition.scheme.alpha;
            break;
        case SchemeKind::dirichlet:
            j["scheme"] = "dirichlet";
            j["beta"] = partition.scheme.beta;
            j["min_size"] = partition.scheme.min_size;
            break;
        case SchemeKind::external: j["scheme"] = "external"; break;
    }
    j["seed"] = partition.seed;
    j["num_clients"] = partition.num_clients;
    j["clients"] = partition.assignments;
    return j.dump() + "\n";
}

Partition partition_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("manifest", e.what());
    }
    try {
        Partition p;
        const auto scheme = j.at("scheme").get<std::string>();
        if (scheme == "quantity") {
            p.scheme.kind = SchemeKind::quantity;
            p.scheme.alpha = j.at("alpha").get<std::size_t>();
        } else if (scheme == "dirichlet") {
            p.scheme.kind = SchemeKind::dirichlet;
            p.scheme.beta = j.at("beta").get<double>();
            p.scheme.min_size = j.value("min_size", std::size_t{1});
        } else if (scheme == "external") {
            p.scheme.kind = SchemeKind::external;
        } else {
            throw IngestionError("scheme", "unknown scheme '" + scheme + "'");
        }
        p.seed = j.at("seed").get<std::uint64_t>();
        p.assignments = j.at("clients").get<std::vector<std::vector<std::size_t>>>();
        p.num_clients = j.value("num_clients", p.assignments.size());
        if (p.num_clients != p.assignments.size()) {
            throw IngestionError("num_clients", "does not match the number of client lists");
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError("manifest", e.what());
    }
}

void save_manifest(const Partition& partition, const std::filesystem::path& path) {
    write_file_atomic(path, partition_to_json(partition));
}

Partition load_manifest(const std::filesystem::path& path) {
    return partition_from_json(read_file(path));
}

}  // namespace fedlc

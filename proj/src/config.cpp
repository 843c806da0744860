#include "fedlc/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "fedlc/error.hpp"
#include "fedlc/fileio.hpp"

namespace fedlc {

std::string to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::synthetic: return "synthetic";
        case DatasetKind::idx: return "idx";
        case DatasetKind::csv: return "csv";
    }
    return "unknown";
}

std::string to_string(PartitionKind kind) {
    switch (kind) {
        case PartitionKind::native: return "native";
        case PartitionKind::quantity: return "quantity";
        case PartitionKind::dirichlet: return "dirichlet";
    }
    return "unknown";
}

std::string to_string(ArchKind kind) { return kind == ArchKind::logistic ? "logistic" : "mlp"; }

namespace {

std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

std::string parse_text(const std::string& key, const std::string& raw) {
    if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
        std::string out;
        for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
            if (raw[i] == '\\' && i + 2 < raw.size()) {
                ++i;
            }
            out.push_back(raw[i]);
        }
        return out;
    }
    if (raw.find_first_of("\"[]") != std::string::npos) throw ConfigError(key, "malformed string value");
    return raw;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out + "\"";
}

double parse_real(const std::string& key, const std::string& raw) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc{} || ptr != raw.data() + raw.size() || raw.empty()) {
        throw ConfigError(key, "expected a number, got '" + raw + "'");
    }
    return v;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& raw) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (ec != std::errc{} || ptr != raw.data() + raw.size() || raw.empty()) {
        throw ConfigError(key, "expected a non-negative integer, got '" + raw + "'");
    }
    return v;
}

bool parse_flag(const std::string& key, const std::string& raw) {
    if (raw == "true") return true;
    if (raw == "false") return false;
    throw ConfigError(key, "expected true or false, got '" + raw + "'");
}

std::vector<std::uint64_t> parse_unsigned_list(const std::string& key, const std::string& raw) {
    if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']') {
        // a single bare integer is accepted as a one-element list
        return {parse_unsigned(key, raw)};
    }
    std::vector<std::uint64_t> out;
    std::string inner = raw.substr(1, raw.size() - 2);
    std::istringstream in(inner);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_unsigned(key, item));
    }
    return out;
}

std::string format_real(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, ptr);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

struct Field {
    std::string key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Getter>
Field size_field(std::string key, Getter member) {
    return {key,
            [key, member](ExperimentConfig& c, const std::string& raw) {
                member(c) = static_cast<std::size_t>(parse_unsigned(key, raw));
            },
            [member](const ExperimentConfig& c) {
                return std::to_string(member(const_cast<ExperimentConfig&>(c)));
            }};
}

template <typename Getter>
Field real_field(std::string key, Getter member) {
    return {key, [key, member](ExperimentConfig& c, const std::string& raw) { member(c) = parse_real(key, raw); },
            [member](const ExperimentConfig& c) { return format_real(member(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Getter>
Field text_field(std::string key, Getter member) {
    return {key, [key, member](ExperimentConfig& c, const std::string& raw) { member(c) = parse_text(key, raw); },
            [member](const ExperimentConfig& c) { return quote(member(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Getter>
Field flag_field(std::string key, Getter member) {
    return {key, [key, member](ExperimentConfig& c, const std::string& raw) { member(c) = parse_flag(key, raw); },
            [member](const ExperimentConfig& c) {
                return std::string(member(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
            }};
}

template <typename Getter, typename Parse, typename Print>
Field enum_field(std::string key, Getter member, Parse parse, Print print) {
    return {key,
            [key, member, parse](ExperimentConfig& c, const std::string& raw) {
                const auto text = parse_text(key, raw);
                try {
                    member(c) = parse(text);
                } catch (const ConfigError& e) {
                    throw ConfigError(key, "unknown value '" + text + "'");
                }
            },
            [member, print](const ExperimentConfig& c) { return quote(print(member(const_cast<ExperimentConfig&>(c)))); }};
}

DatasetKind parse_dataset_kind(const std::string& s) {
    if (s == "synthetic") return DatasetKind::synthetic;
    if (s == "idx") return DatasetKind::idx;
    if (s == "csv") return DatasetKind::csv;
    throw ConfigError("dataset.kind", s);
}

PartitionKind parse_partition_kind(const std::string& s) {
    if (s == "native") return PartitionKind::native;
    if (s == "quantity") return PartitionKind::quantity;
    if (s == "dirichlet") return PartitionKind::dirichlet;
    throw ConfigError("partition.kind", s);
}

ArchKind parse_arch(const std::string& s) {
    if (s == "logistic") return ArchKind::logistic;
    if (s == "mlp") return ArchKind::mlp;
    throw ConfigError("arch", s);
}

#define FIELD(expr) [](ExperimentConfig& c) -> auto& { return expr; }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        text_field("name", FIELD(c.name)),
        size_field("clients", FIELD(c.clients)),
        size_field("rounds", FIELD(c.rounds)),
        size_field("local_epochs", FIELD(c.local_epochs)),
        size_field("batch_size", FIELD(c.batch_size)),
        real_field("lr", FIELD(c.lr)),
        enum_field("arch", FIELD(c.arch), parse_arch, [](ArchKind k) { return to_string(k); }),
        size_field("hidden", FIELD(c.hidden)),
        enum_field("strategy", FIELD(c.strategy), parse_strategy, [](Strategy s) { return to_string(s); }),
        real_field("sample_fraction", FIELD(c.sample_fraction)),
        Field{"seeds",
              [](ExperimentConfig& c, const std::string& raw) { c.seeds = parse_unsigned_list("seeds", raw); },
              [](const ExperimentConfig& c) {
                  std::string s = "[";
                  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
                      if (i) s += ", ";
                      s += std::to_string(c.seeds[i]);
                  }
                  return s + "]";
              }},
        text_field("output_dir", FIELD(c.output_dir)),
        size_field("threads", FIELD(c.threads)),
        flag_field("record_deviation", FIELD(c.record_deviation)),
        flag_field("write_plot", FIELD(c.write_plot)),

        enum_field("dataset.kind", FIELD(c.dataset.kind), parse_dataset_kind,
                   [](DatasetKind k) { return to_string(k); }),
        real_field("dataset.lambda", FIELD(c.dataset.lambda)),
        real_field("dataset.mu", FIELD(c.dataset.mu)),
        size_field("dataset.dim", FIELD(c.dataset.dim)),
        size_field("dataset.num_classes", FIELD(c.dataset.num_classes)),
        size_field("dataset.min_size", FIELD(c.dataset.min_size)),
        size_field("dataset.max_size", FIELD(c.dataset.max_size)),
        real_field("dataset.power_law_exponent", FIELD(c.dataset.power_law_exponent)),
        real_field("dataset.test_fraction", FIELD(c.dataset.test_fraction)),
        text_field("dataset.train_images", FIELD(c.dataset.train_images)),
        text_field("dataset.train_labels", FIELD(c.dataset.train_labels)),
        text_field("dataset.test_images", FIELD(c.dataset.test_images)),
        text_field("dataset.test_labels", FIELD(c.dataset.test_labels)),
        text_field("dataset.train_csv", FIELD(c.dataset.train_csv)),
        text_field("dataset.test_csv", FIELD(c.dataset.test_csv)),

        enum_field("partition.kind", FIELD(c.partition.kind), parse_partition_kind,
                   [](PartitionKind k) { return to_string(k); }),
        size_field("partition.alpha", FIELD(c.partition.alpha)),
        real_field("partition.beta", FIELD(c.partition.beta)),
        size_field("partition.min_size", FIELD(c.partition.min_size)),

        enum_field("loss.kind", FIELD(c.loss.kind), parse_loss_kind, [](LossKind k) { return to_string(k); }),
        real_field("loss.tau", FIELD(c.loss.tau)),
        real_field("loss.count_floor", FIELD(c.loss.count_floor)),
        enum_field("loss.variant", FIELD(c.loss.variant), parse_variant,
                   [](CalibrationVariant v) { return to_string(v); }),
        flag_field("loss.expel_missing", FIELD(c.loss.expel_missing)),
        real_field("loss.prox_mu", FIELD(c.loss.prox_mu)),
        real_field("loss.alpha_rs", FIELD(c.loss.alpha_rs)),

        real_field("fedopt.server_lr", FIELD(c.fedopt.server_lr)),
        real_field("fedopt.beta1", FIELD(c.fedopt.beta1)),
        real_field("fedopt.beta2", FIELD(c.fedopt.beta2)),
        real_field("fedopt.eps", FIELD(c.fedopt.eps)),
    };
    return table;
}

#undef FIELD

const Field& find_field(const std::string& key) {
    for (const auto& f : fields()) {
        if (f.key == key) return f;
    }
    throw ConfigError(key, "unknown field");
}

// Strips a trailing comment that is not inside quotes.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

}  // namespace

void set_config_field(ExperimentConfig& config, const std::string& key, const std::string& value) {
    find_field(key).set(config, trim(value));
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig config;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
            section = trim(line.substr(1, line.size() - 2));
            if (section != "dataset" && section != "partition" && section != "loss" && section != "fedopt") {
                throw ConfigError(section, "unknown section on line " + std::to_string(line_no));
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no), "expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string full = section.empty() ? key : section + "." + key;
        set_config_field(config, full, line.substr(eq + 1));
    }
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const IngestionError&) {
        throw ConfigError("config", "cannot read " + path.string());
    }
    return parse_config(text);
}

std::string serialize_config(const ExperimentConfig& config) {
    std::ostringstream out;
    std::string section;
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        const std::string s = dot == std::string::npos ? "" : f.key.substr(0, dot);
        const std::string name = dot == std::string::npos ? f.key : f.key.substr(dot + 1);
        if (s != section) {
            out << "\n[" << s << "]\n";
            section = s;
        }
        out << name << " = " << f.get(config) << '\n';
    }
    return out.str();
}

void validate_config(const ExperimentConfig& c) {
    if (c.name.empty()) throw ConfigError("name", "must not be empty");
    if (c.clients == 0) throw ConfigError("clients", "must be at least 1");
    if (c.rounds == 0) throw ConfigError("rounds", "must be at least 1");
    if (c.local_epochs == 0) throw ConfigError("local_epochs", "must be at least 1");
    if (c.batch_size == 0) throw ConfigError("batch_size", "must be at least 1");
    if (!(c.lr >= 0.0)) throw ConfigError("lr", "must be non-negative");
    if (c.arch == ArchKind::mlp && c.hidden == 0) throw ConfigError("hidden", "must be at least 1");
    if (!(c.sample_fraction > 0.0 && c.sample_fraction <= 1.0)) {
        throw ConfigError("sample_fraction", "must lie in (0, 1]");
    }
    if (c.seeds.empty()) throw ConfigError("seeds", "must list at least one seed");
    if (c.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
    if (c.threads == 0) throw ConfigError("threads", "must be at least 1");

    const auto& d = c.dataset;
    switch (d.kind) {
        case DatasetKind::synthetic:
            if (!(d.lambda >= 0.0)) throw ConfigError("dataset.lambda", "must be non-negative");
            if (!(d.mu >= 0.0)) throw ConfigError("dataset.mu", "must be non-negative");
            if (d.dim == 0) throw ConfigError("dataset.dim", "must be positive");
            if (d.num_classes < 2) throw ConfigError("dataset.num_classes", "must be at least 2");
            if (d.min_size == 0) throw ConfigError("dataset.min_size", "must be positive");
            if (d.max_size < d.min_size) throw ConfigError("dataset.max_size", "must be >= dataset.min_size");
            if (!(d.power_law_exponent > 0.0)) throw ConfigError("dataset.power_law_exponent", "must be positive");
            if (!(d.test_fraction >= 0.0 && d.test_fraction < 1.0)) {
                throw ConfigError("dataset.test_fraction", "must lie in [0, 1)");
            }
            break;
        case DatasetKind::idx:
            if (d.train_images.empty()) throw ConfigError("dataset.train_images", "required for idx data");
            if (d.train_labels.empty()) throw ConfigError("dataset.train_labels", "required for idx data");
            if (d.test_images.empty()) throw ConfigError("dataset.test_images", "required for idx data");
            if (d.test_labels.empty()) throw ConfigError("dataset.test_labels", "required for idx data");
            break;
        case DatasetKind::csv:
            if (d.train_csv.empty()) throw ConfigError("dataset.train_csv", "required for csv data");
            if (d.test_csv.empty()) throw ConfigError("dataset.test_csv", "required for csv data");
            if (d.num_classes < 2) throw ConfigError("dataset.num_classes", "must be at least 2");
            break;
    }

    const auto& p = c.partition;
    if (p.kind == PartitionKind::native && d.kind != DatasetKind::synthetic) {
        throw ConfigError("partition.kind", "native partition only exists for synthetic data");
    }
    if (p.kind == PartitionKind::quantity && p.alpha == 0) throw ConfigError("partition.alpha", "must be at least 1");
    if (p.kind == PartitionKind::dirichlet && !(p.beta > 0.0)) throw ConfigError("partition.beta", "must be positive");

    const auto& l = c.loss;
    if (!(l.tau >= 0.0)) throw ConfigError("loss.tau", "must be non-negative");
    if (!(l.count_floor > 0.0)) throw ConfigError("loss.count_floor", "must be positive");
    if (!(l.prox_mu >= 0.0)) throw ConfigError("loss.prox_mu", "must be non-negative");
    if (!(l.alpha_rs > 0.0 && l.alpha_rs <= 1.0)) throw ConfigError("loss.alpha_rs", "must lie in (0, 1]");

    const auto& o = c.fedopt;
    if (!(o.server_lr > 0.0)) throw ConfigError("fedopt.server_lr", "must be positive");
    if (!(o.beta1 >= 0.0 && o.beta1 < 1.0)) throw ConfigError("fedopt.beta1", "must lie in [0, 1)");
    if (!(o.beta2 >= 0.0 && o.beta2 < 1.0)) throw ConfigError("fedopt.beta2", "must lie in [0, 1)");
    if (!(o.eps > 0.0)) throw ConfigError("fedopt.eps", "must be positive");
}

}  // namespace fedlc

#include "fedlc/data.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fedlc/error.hpp"

namespace fedlc {

void Dataset::add(Example example) {
    if (example.features.size() != dim) {
        throw DimensionError("example has " + std::to_string(example.features.size()) +
                             " features, dataset dim is " + std::to_string(dim));
    }
    if (example.label >= num_classes) {
        throw DimensionError("label " + std::to_string(example.label) +
                             " out of range for " + std::to_string(num_classes) + " classes");
    }
    examples.push_back(std::move(example));
}

void Dataset::validate() const {
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (examples[i].features.size() != dim) {
            throw DimensionError("example " + std::to_string(i) + " has wrong dimension");
        }
        if (examples[i].label >= num_classes) {
            throw DimensionError("example " + std::to_string(i) + " has label out of range");
        }
    }
}

Dataset Dataset::subset(std::span<const std::size_t> indices, std::string subset_name) const {
    Dataset out{std::move(subset_name), num_classes, dim, {}};
    out.examples.reserve(indices.size());
    for (auto idx : indices) {
        if (idx >= examples.size()) {
            throw DimensionError("subset index " + std::to_string(idx) + " out of range");
        }
        out.examples.push_back(examples[idx]);
    }
    return out;
}

std::vector<std::size_t> class_counts(const Dataset& dataset) {
    std::vector<std::size_t> counts(dataset.num_classes, 0);
    for (const auto& ex : dataset.examples) ++counts.at(ex.label);
    return counts;
}

Dataset concatenate(std::span<const Dataset> parts, std::string name) {
    Dataset out;
    out.name = std::move(name);
    if (parts.empty()) return out;
    out.num_classes = parts.front().num_classes;
    out.dim = parts.front().dim;
    for (const auto& part : parts) {
        if (part.dim != out.dim || part.num_classes != out.num_classes) {
            throw DimensionError("cannot concatenate datasets of different shape");
        }
        out.examples.insert(out.examples.end(), part.examples.begin(), part.examples.end());
    }
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
    cell = trim(cell);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) {
        throw IngestionError("row " + std::to_string(row),
                             "non-numeric cell in column " + std::to_string(col) + ": '" +
                                 std::string(cell) + "'");
    }
    return value;
}

}  // namespace

Dataset parse_csv(const std::string& text, std::size_t num_classes, std::string name) {
    Dataset out{std::move(name), num_classes, 0, {}};
    std::istringstream in(text);
    std::string line;
    std::size_t row = 0;
    bool have_dim = false;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        std::vector<double> cells;
        std::string_view rest(line);
        std::size_t col = 0;
        while (true) {
            auto comma = rest.find(',');
            cells.push_back(parse_cell(rest.substr(0, comma), row, col++));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (cells.size() < 2) {
            throw IngestionError("row " + std::to_string(row), "expected label and at least one feature");
        }
        const std::size_t d = cells.size() - 1;
        if (!have_dim) {
            out.dim = d;
            have_dim = true;
        } else if (d != out.dim) {
            throw IngestionError("row " + std::to_string(row),
                                 "ragged row: " + std::to_string(d) + " features, expected " +
                                     std::to_string(out.dim));
        }
        const double label = cells.front();
        if (label < 0 || label != static_cast<double>(static_cast<std::size_t>(label))) {
            throw IngestionError("row " + std::to_string(row), "label must be a non-negative integer");
        }
        if (static_cast<std::size_t>(label) >= num_classes) {
            throw IngestionError("row " + std::to_string(row),
                                 "label " + std::to_string(static_cast<std::size_t>(label)) +
                                     " out of range for " + std::to_string(num_classes) + " classes");
        }
        out.examples.push_back({std::vector<double>(cells.begin() + 1, cells.end()),
                                static_cast<std::size_t>(label)});
    }
    return out;
}

Dataset load_csv(const std::filesystem::path& path, std::size_t num_classes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("path", "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), num_classes, path.stem().string());
}

}  // namespace fedlc

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "fedlc/data.hpp"
#include "fedlc/error.hpp"

namespace fedlc {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::filesystem::path& path, const std::string& field) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError(field, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be_u32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::string& field) {
    if (bytes.size() < offset + 4) throw IngestionError(field, "truncated file");
    return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
           (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void put_be_u32(std::ofstream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>((v >> 24) & 0xff), static_cast<char>((v >> 16) & 0xff),
                       static_cast<char>((v >> 8) & 0xff), static_cast<char>(v & 0xff)};
    out.write(b, 4);
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path,
                 const std::filesystem::path& labels_path,
                 std::size_t num_classes) {
    const auto images = read_all(images_path, "images");
    const auto labels = read_all(labels_path, "labels");

    if (be_u32(images, 0, "images.magic") != kImageMagic) {
        throw IngestionError("images.magic", "expected 0x00000803");
    }
    if (be_u32(labels, 0, "labels.magic") != kLabelMagic) {
        throw IngestionError("labels.magic", "expected 0x00000801");
    }
    const std::size_t count = be_u32(images, 4, "images.count");
    const std::size_t rows = be_u32(images, 8, "images.rows");
    const std::size_t cols = be_u32(images, 12, "images.cols");
    const std::size_t label_count = be_u32(labels, 4, "labels.count");

    if (count != label_count) {
        throw IngestionError("labels.count", std::to_string(label_count) + " labels for " +
                                                 std::to_string(count) + " images");
    }
    const std::size_t dim = rows * cols;
    if (images.size() < 16 + count * dim) throw IngestionError("images.pixels", "truncated file");
    if (labels.size() < 8 + count) throw IngestionError("labels.values", "truncated file");

    std::size_t max_label = 0;
    for (std::size_t i = 0; i < count; ++i) max_label = std::max<std::size_t>(max_label, labels[8 + i]);
    if (num_classes == 0) num_classes = count == 0 ? 0 : max_label + 1;
    if (count > 0 && max_label >= num_classes) {
        throw IngestionError("labels.values", "label " + std::to_string(max_label) + " out of range for " +
                                                  std::to_string(num_classes) + " classes");
    }

    Dataset out{images_path.stem().string(), num_classes, dim, {}};
    out.examples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Example ex;
        ex.features.resize(dim);
        const unsigned char* px = images.data() + 16 + i * dim;
        for (std::size_t j = 0; j < dim; ++j) ex.features[j] = px[j] / 255.0;
        ex.label = labels[8 + i];
        out.examples.push_back(std::move(ex));
    }
    return out;
}

void write_idx(const Dataset& dataset, std::size_t rows, std::size_t cols,
               const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
    if (rows * cols != dataset.dim) throw DimensionError("rows * cols must equal dataset dim");
    std::ofstream img(images_path, std::ios::binary);
    std::ofstream lab(labels_path, std::ios::binary);
    if (!img || !lab) throw IngestionError("path", "cannot open IDX output files");
    put_be_u32(img, kImageMagic);
    put_be_u32(img, static_cast<std::uint32_t>(dataset.size()));
    put_be_u32(img, static_cast<std::uint32_t>(rows));
    put_be_u32(img, static_cast<std::uint32_t>(cols));
    put_be_u32(lab, kLabelMagic);
    put_be_u32(lab, static_cast<std::uint32_t>(dataset.size()));
    for (const auto& ex : dataset.examples) {
        for (double v : ex.features) {
            img.put(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
        }
        lab.put(static_cast<char>(ex.label));
    }
}

}  // namespace fedlc

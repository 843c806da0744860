#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "fedlc/data.hpp"
#include "fedlc/error.hpp"
#include "fedlc/rng.hpp"
#include "test_util.hpp"

using namespace fedlc;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream out(p, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>(v >> s));
}

std::vector<unsigned char> idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols) {
    std::vector<unsigned char> b;
    put_u32(b, 0x803);
    put_u32(b, count);
    put_u32(b, rows);
    put_u32(b, cols);
    for (std::uint32_t i = 0; i < count * rows * cols; ++i) b.push_back(static_cast<unsigned char>(i * 7 % 256));
    return b;
}

std::vector<unsigned char> idx_labels(std::vector<unsigned char> labels) {
    std::vector<unsigned char> b;
    put_u32(b, 0x801);
    put_u32(b, static_cast<std::uint32_t>(labels.size()));
    b.insert(b.end(), labels.begin(), labels.end());
    return b;
}

template <typename F>
std::string ingestion_field(F&& f) {
    try {
        f();
    } catch (const IngestionError& e) {
        return e.field();
    }
    return "<no error>";
}

}  // namespace

TEST_CASE("rng streams are keyed and reproducible") {
    CHECK(derive_seed(1, Stream::model_init) == derive_seed(1, Stream::model_init));
    CHECK(derive_seed(1, Stream::model_init) != derive_seed(2, Stream::model_init));
    CHECK(derive_seed(1, Stream::model_init) != derive_seed(1, Stream::batch_shuffle));
    CHECK(derive_seed(1, Stream::batch_shuffle, {1, 2}) != derive_seed(1, Stream::batch_shuffle, {2, 1}));
    auto a = make_rng(5, Stream::probe_trial, {3});
    auto b = make_rng(5, Stream::probe_trial, {3});
    for (int i = 0; i < 10; ++i) CHECK(a() == b());
}

TEST_CASE("synthetic: lambda = 0 puts every client's model mean at zero") {
    SyntheticSpec spec;
    spec.lambda = 0.0;
    spec.mu = 0.0;
    spec.num_clients = 2;
    spec.seed = 11;
    const auto clients = generate_synthetic_clients(spec);
    REQUIRE(clients.size() == 2);
    for (const auto& c : clients) {
        CHECK(c.model_mean == 0.0);
        CHECK(c.data_mean == 0.0);
        CHECK(c.weights.size() == spec.num_classes * spec.dim);
        CHECK(c.bias.size() == spec.num_classes);
    }
}

TEST_CASE("synthetic: labels are the argmax of the client's own linear model") {
    SyntheticSpec spec;
    spec.lambda = 1.0;
    spec.mu = 1.0;
    spec.num_clients = 5;
    spec.seed = 3;
    for (const auto& c : generate_synthetic_clients(spec)) {
        for (const auto& ex : c.data.examples) {
            std::size_t best = 0;
            double best_v = -1e300;
            for (std::size_t k = 0; k < spec.num_classes; ++k) {
                double v = c.bias[k];
                for (std::size_t j = 0; j < spec.dim; ++j) v += c.weights[k * spec.dim + j] * ex.features[j];
                if (v > best_v) {
                    best_v = v;
                    best = k;
                }
            }
            CHECK(ex.label == best);
        }
    }
}

TEST_CASE("synthetic(1,1): label marginals differ between every pair of clients") {
    SyntheticSpec spec;
    spec.lambda = 1.0;
    spec.mu = 1.0;
    spec.num_clients = 100;
    spec.seed = 0;
    const auto clients = generate_synthetic(spec);
    REQUIRE(clients.size() == 100);
    std::size_t equal_pairs = 0;
    std::vector<std::vector<std::size_t>> hist;
    for (const auto& c : clients) hist.push_back(class_counts(c));
    for (std::size_t i = 0; i < hist.size(); ++i) {
        for (std::size_t j = i + 1; j < hist.size(); ++j) {
            if (hist[i] == hist[j]) ++equal_pairs;
        }
    }
    CHECK(equal_pairs == 0);
    for (const auto& c : clients) {
        CHECK(c.size() >= spec.min_size);
        CHECK(c.size() <= spec.max_size);
        CHECK(c.dim == 60);
        CHECK(c.num_classes == 10);
    }
}

TEST_CASE("synthetic: same seed gives bit-identical data, different seed differs") {
    SyntheticSpec spec;
    spec.lambda = 0.5;
    spec.mu = 0.5;
    spec.num_clients = 8;
    spec.seed = 42;
    const auto a = generate_synthetic(spec);
    const auto b = generate_synthetic(spec);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].size() == b[i].size());
        for (std::size_t n = 0; n < a[i].size(); ++n) {
            CHECK(a[i].examples[n].label == b[i].examples[n].label);
            CHECK(a[i].examples[n].features == b[i].examples[n].features);
        }
    }
    spec.seed = 43;
    const auto c = generate_synthetic(spec);
    CHECK(c[0].examples[0].features != a[0].examples[0].features);
}

TEST_CASE("synthetic: client streams do not depend on the number of clients") {
    SyntheticSpec spec;
    spec.lambda = 1.0;
    spec.mu = 1.0;
    spec.num_clients = 3;
    spec.seed = 9;
    const auto small = generate_synthetic(spec);
    spec.num_clients = 6;
    const auto large = generate_synthetic(spec);
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(small[i].size() == large[i].size());
        CHECK(small[i].examples.front().features == large[i].examples.front().features);
    }
}

TEST_CASE("synthetic: spec validation names the field") {
    SyntheticSpec spec;
    spec.lambda = -1.0;
    try {
        spec.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "lambda");
    }
    spec.lambda = 0.0;
    spec.num_clients = 0;
    CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
}

TEST_CASE("idx: four-image pair decodes with dim rows*cols") {
    testutil::TempDir tmp;
    write_bytes(tmp / "img", idx_images(4, 2, 3));
    write_bytes(tmp / "lab", idx_labels({0, 1, 2, 3}));
    const auto ds = load_idx(tmp / "img", tmp / "lab");
    CHECK(ds.size() == 4);
    CHECK(ds.dim == 6);
    CHECK(ds.num_classes == 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(ds.examples[i].label == i);
    CHECK(ds.examples[1].features[0] == doctest::Approx((6 * 7 % 256) / 255.0));
}

TEST_CASE("idx: label count mismatch, bad magic and truncation are reported by field") {
    testutil::TempDir tmp;
    write_bytes(tmp / "img", idx_images(4, 2, 2));
    write_bytes(tmp / "lab3", idx_labels({0, 1, 2}));
    CHECK(ingestion_field([&] { load_idx(tmp / "img", tmp / "lab3"); }) == "labels.count");

    write_bytes(tmp / "empty", {});
    write_bytes(tmp / "lab4", idx_labels({0, 1, 2, 3}));
    CHECK(ingestion_field([&] { load_idx(tmp / "empty", tmp / "lab4"); }) == "images.magic");

    auto bad = idx_images(4, 2, 2);
    bad[3] = 0x01;
    write_bytes(tmp / "badmagic", bad);
    CHECK(ingestion_field([&] { load_idx(tmp / "badmagic", tmp / "lab4"); }) == "images.magic");

    auto cut = idx_images(4, 2, 2);
    cut.resize(cut.size() - 3);
    write_bytes(tmp / "cut", cut);
    CHECK(ingestion_field([&] { load_idx(tmp / "cut", tmp / "lab4"); }) == "images.pixels");

    write_bytes(tmp / "lab_hi", idx_labels({0, 1, 2, 9}));
    CHECK(ingestion_field([&] { load_idx(tmp / "img", tmp / "lab_hi", 4); }) == "labels.values");
}

TEST_CASE("idx: write then read round-trips quantized values") {
    testutil::TempDir tmp;
    Dataset ds{"rt", 3, 4, {}};
    ds.add({{0.0, 1.0, 0.5, 0.25}, 2});
    ds.add({{1.0, 0.0, 0.75, 0.1}, 0});
    write_idx(ds, 2, 2, tmp / "i", tmp / "l");
    const auto back = load_idx(tmp / "i", tmp / "l", 3);
    REQUIRE(back.size() == 2);
    CHECK(back.examples[0].label == 2);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(std::abs(back.examples[0].features[j] - ds.examples[0].features[j]) <= 0.5 / 255.0 + 1e-12);
    }
}

TEST_CASE("csv: basic parse, blank lines, empty input") {
    const auto ds = parse_csv("1,0.5,0.5\n0,1.0,0.0", 2);
    CHECK(ds.size() == 2);
    CHECK(ds.dim == 2);
    CHECK(ds.examples[0].label == 1);
    CHECK(ds.examples[1].features == std::vector<double>{1.0, 0.0});

    CHECK(parse_csv("\n1,2\n\n0,3\n", 2).size() == 2);
    const auto empty = parse_csv("", 3);
    CHECK(empty.empty());
    CHECK(class_counts(empty) == std::vector<std::size_t>{0, 0, 0});
}

TEST_CASE("csv: malformed input names the row") {
    CHECK(ingestion_field([] { parse_csv("5,0.1,0.2", 3); }) == "row 1");
    CHECK(ingestion_field([] { parse_csv("0,0.1,0.2\n1,0.3", 3); }) == "row 2");
    CHECK(ingestion_field([] { parse_csv("0,abc", 3); }) == "row 1");
    CHECK(ingestion_field([] { parse_csv("0.5,1", 3); }) == "row 1");
}

TEST_CASE("class_counts") {
    Dataset ds{"c", 3, 1, {}};
    ds.add({{0.0}, 0});
    ds.add({{0.0}, 0});
    ds.add({{0.0}, 1});
    CHECK(class_counts(ds) == std::vector<std::size_t>{2, 1, 0});
    CHECK(class_counts(Dataset{"e", 2, 1, {}}) == std::vector<std::size_t>{0, 0});
}

TEST_CASE("class_counts matches a brute-force tally on a synthetic client") {
    SyntheticSpec spec;
    spec.lambda = 1.0;
    spec.mu = 1.0;
    spec.num_clients = 4;
    spec.seed = 5;
    for (const auto& c : generate_synthetic(spec)) {
        std::vector<std::size_t> tally(c.num_classes, 0);
        for (std::size_t i = 0; i < c.size(); ++i) tally[c.examples[i].label] += 1;
        CHECK(class_counts(c) == tally);
    }
}

TEST_CASE("dataset rejects wrong dimensions and labels") {
    Dataset ds{"d", 2, 2, {}};
    CHECK_THROWS_AS(ds.add({{1.0}, 0}), DimensionError);
    CHECK_THROWS_AS(ds.add({{1.0, 2.0}, 2}), DimensionError);
    ds.add({{1.0, 2.0}, 1});
    const std::vector<std::size_t> idx{0, 0};
    CHECK(ds.subset(idx, "s").size() == 2);
    const std::vector<std::size_t> bad{3};
    CHECK_THROWS_AS(ds.subset(bad, "s"), DimensionError);
}

TEST_CASE("bundled digits files load") {
    const std::string dir = FEDLC_TEST_DATA;
    const auto train = load_idx(dir + "/digits-train-images.idx", dir + "/digits-train-labels.idx");
    const auto test = load_idx(dir + "/digits-test-images.idx", dir + "/digits-test-labels.idx");
    CHECK(train.dim == 64);
    CHECK(train.num_classes == 10);
    CHECK(train.size() + test.size() == 1797);
}

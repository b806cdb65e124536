#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "zico/dataset.hpp"
#include "zico/errors.hpp"

using namespace zico;

namespace {

Dataset tiny_dataset(std::vector<double> rows, int d) {
    Dataset ds;
    ds.d = d;
    ds.M = int(rows.size()) / d;
    ds.samples = std::move(rows);
    return ds;
}

std::string temp_path(const char* stem) {
    return std::string("/tmp/zico_test_") + stem;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("l2_normalize hand case and idempotence") {
    auto ds = l2_normalize(tiny_dataset({3, 4}, 2));
    CHECK(ds.samples[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(ds.samples[1] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(ds.normalized);

    const auto again = l2_normalize(ds);
    CHECK(again.samples[0] == doctest::Approx(ds.samples[0]).epsilon(1e-15));
    CHECK(again.samples[1] == doctest::Approx(ds.samples[1]).epsilon(1e-15));

    auto unit = l2_normalize(tiny_dataset({1, 0, 0}, 3));
    CHECK(unit.samples == std::vector<double>{1, 0, 0});
}

TEST_CASE("l2_normalize rejects a zero row by index") {
    try {
        l2_normalize(tiny_dataset({1, 1, 0, 0}, 2));
        FAIL("expected validation_error");
    } catch (const validation_error& e) {
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }
}

TEST_CASE("standardize_features centers and scales each column") {
    auto ds = standardize_features(tiny_dataset({1, 10, 3, 20, 5, 30}, 2));
    for (int j = 0; j < 2; ++j) {
        double mean = 0.0, var = 0.0;
        for (int i = 0; i < ds.M; ++i) mean += ds.samples[size_t(i * 2 + j)];
        mean /= ds.M;
        for (int i = 0; i < ds.M; ++i) {
            const double c = ds.samples[size_t(i * 2 + j)] - mean;
            var += c * c;
        }
        var /= ds.M;
        CHECK(std::abs(mean) < 1e-12);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("synth_clusters shapes, labels and determinism") {
    const auto ds = synth_clusters(3, 5, 8, 0.2, 42);
    CHECK(ds.M == 15);
    CHECK(ds.d == 8);
    CHECK(ds.num_classes == 3);
    REQUIRE(ds.labels.size() == 15);
    for (int c = 0; c < 3; ++c)
        CHECK(std::count(ds.labels.begin(), ds.labels.end(), c) == 5);

    const auto same = synth_clusters(3, 5, 8, 0.2, 42);
    CHECK(same.samples == ds.samples);
    CHECK(same.labels == ds.labels);

    const auto other = synth_clusters(3, 5, 8, 0.2, 43);
    CHECK(other.samples != ds.samples);
}

TEST_CASE("synth_clusters at zero spread collapses each class to a point") {
    const auto ds = synth_clusters(2, 4, 6, 0.0, 7);
    for (int i = 1; i < 4; ++i)
        for (int j = 0; j < 6; ++j)
            CHECK(ds.row(i)[j] == ds.row(0)[j]);
    // the two class centers differ
    bool differs = false;
    for (int j = 0; j < 6; ++j)
        if (ds.row(0)[j] != ds.row(4)[j]) differs = true;
    CHECK(differs);
}

TEST_CASE("synth_clusters validates its arguments") {
    CHECK_THROWS_AS(synth_clusters(1, 4, 6, 0.1, 7), validation_error);
    CHECK_THROWS_AS(synth_clusters(2, 0, 6, 0.1, 7), validation_error);
}

TEST_CASE("synth_textures emits phase-randomized gratings per class") {
    const auto ds = synth_textures(4, 3, 8, 0.0, 21);
    CHECK(ds.M == 12);
    CHECK(ds.d == 64);
    CHECK(ds.channels == 1);
    CHECK(ds.height == 8);
    CHECK(ds.width == 8);
    CHECK(ds.num_classes == 4);
    REQUIRE(ds.labels.size() == 12);
    CHECK(ds.labels[0] == 0);
    CHECK(ds.labels[11] == 3);

    // noise-free pixels are plain cosines
    for (const double v : ds.samples) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    // random phase: two samples of the same class differ
    bool differs = false;
    for (int j = 0; j < ds.d; ++j)
        if (ds.row(0)[j] != ds.row(1)[j]) differs = true;
    CHECK(differs);

    const auto same = synth_textures(4, 3, 8, 0.0, 21);
    CHECK(same.samples == ds.samples);
    CHECK(same.labels == ds.labels);
}

TEST_CASE("synth_textures validates its arguments") {
    CHECK_THROWS_AS(synth_textures(1, 4, 8, 0.1, 7), validation_error);
    CHECK_THROWS_AS(synth_textures(2, 0, 8, 0.1, 7), validation_error);
    CHECK_THROWS_AS(synth_textures(2, 4, 1, 0.1, 7), validation_error);
}

TEST_CASE("with_regression_targets scales labels into the unit interval") {
    auto ds = synth_clusters(4, 2, 3, 0.1, 9);
    ds = with_regression_targets(std::move(ds));
    REQUIRE(ds.targets.size() == size_t(ds.M));
    CHECK(ds.label_bound == 1.0);
    for (int i = 0; i < ds.M; ++i) {
        CHECK(ds.targets[size_t(i)] == doctest::Approx(ds.labels[size_t(i)] / 3.0).epsilon(1e-15));
        CHECK(ds.targets[size_t(i)] >= 0.0);
        CHECK(ds.targets[size_t(i)] <= 1.0);
    }

    Dataset unlabeled = tiny_dataset({1, 2}, 2);
    CHECK_THROWS_AS(with_regression_targets(std::move(unlabeled)), validation_error);
}

TEST_CASE("batch_iter partitions the sample set exactly") {
    auto ds = synth_clusters(2, 2, 4, 0.1, 11); // M = 4
    const auto even = batch_iter(ds, 2, 5);
    REQUIRE(even.size() == 2);
    CHECK(even[0].size == 2);
    CHECK(even[1].size == 2);

    auto ds5 = synth_clusters(5, 1, 4, 0.1, 11); // M = 5
    const auto ragged = batch_iter(ds5, 2, 5);
    REQUIRE(ragged.size() == 3);
    CHECK(ragged[0].size == 2);
    CHECK(ragged[1].size == 2);
    CHECK(ragged[2].size == 1);

    // every sample appears exactly once across batches
    std::multiset<int> seen;
    for (const auto& b : ragged)
        for (const int lab : b.labels) seen.insert(lab);
    CHECK(seen == std::multiset<int>{0, 1, 2, 3, 4});

    const auto replay = batch_iter(ds5, 2, 5);
    for (size_t i = 0; i < ragged.size(); ++i) {
        CHECK(replay[i].inputs == ragged[i].inputs);
        CHECK(replay[i].labels == ragged[i].labels);
        CHECK(replay[i].index == int(i));
    }

    CHECK_THROWS_AS(batch_iter(ds, 0, 5), validation_error);
}

TEST_CASE("split_dataset divides rows without loss") {
    const auto ds = synth_clusters(2, 10, 4, 0.2, 13); // M = 20
    const auto [train, test] = split_dataset(ds, 15, 3);
    CHECK(train.M == 15);
    CHECK(test.M == 5);
    CHECK(train.d == ds.d);
    CHECK(test.num_classes == ds.num_classes);

    // label multiset is preserved across the split
    std::multiset<int> before(ds.labels.begin(), ds.labels.end());
    std::multiset<int> after(train.labels.begin(), train.labels.end());
    after.insert(test.labels.begin(), test.labels.end());
    CHECK(before == after);

    // degenerate splits are legal; only out-of-range counts throw
    const auto [none, all] = split_dataset(ds, 0, 3);
    CHECK(none.M == 0);
    CHECK(all.M == 20);
    CHECK_THROWS_AS(split_dataset(ds, -1, 3), validation_error);
    CHECK_THROWS_AS(split_dataset(ds, 21, 3), validation_error);
}

TEST_CASE("idx hand-built single image parses to scaled pixels") {
    const std::string img = temp_path("hand.images");
    const std::string lab = temp_path("hand.labels");
    {
        // magic 0x00000803, 1 image, 2 rows, 2 cols, pixels 0,255,0,255
        const unsigned char ib[] = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2,
                                    0, 0, 0, 2, 0, 255, 0, 255};
        std::ofstream fi(img, std::ios::binary);
        fi.write(reinterpret_cast<const char*>(ib), sizeof ib);
        const unsigned char lb[] = {0, 0, 8, 1, 0, 0, 0, 1, 7};
        std::ofstream fl(lab, std::ios::binary);
        fl.write(reinterpret_cast<const char*>(lb), sizeof lb);
    }
    const auto ds = load_idx(img, lab);
    CHECK(ds.M == 1);
    CHECK(ds.d == 4);
    CHECK(ds.height == 2);
    CHECK(ds.width == 2);
    CHECK(ds.samples == std::vector<double>{0, 1, 0, 1});
    REQUIRE(ds.labels.size() == 1);
    CHECK(ds.labels[0] == 7);
    std::remove(img.c_str());
    std::remove(lab.c_str());
}

TEST_CASE("idx round-trips through write_idx byte for byte") {
    const auto ds = synth_clusters(3, 4, 16, 0.3, 17);
    const std::string img = temp_path("rt.images");
    const std::string lab = temp_path("rt.labels");
    write_idx(ds, img, lab);
    const std::string bytes_img = slurp(img);
    const std::string bytes_lab = slurp(lab);

    const auto back = load_idx(img, lab);
    CHECK(back.M == ds.M);
    CHECK(back.labels == ds.labels);

    write_idx(back, img, lab);
    CHECK(slurp(img) == bytes_img);
    CHECK(slurp(lab) == bytes_lab);
    std::remove(img.c_str());
    std::remove(lab.c_str());
}

TEST_CASE("idx rejects wrong magic, truncation and count mismatch") {
    const std::string img = temp_path("bad.images");
    const std::string lab = temp_path("bad.labels");

    auto write_bytes = [](const std::string& path, const std::vector<unsigned char>& b) {
        std::ofstream f(path, std::ios::binary);
        f.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
    };

    // image magic in the label slot
    write_bytes(img, {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 9});
    write_bytes(lab, {0, 0, 8, 3, 0, 0, 0, 1, 5});
    CHECK_THROWS_AS(load_idx(img, lab), parse_error);

    // empty image file
    write_bytes(img, {});
    CHECK_THROWS_AS(load_idx(img, lab), parse_error);

    // truncated pixel payload
    write_bytes(img, {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2});
    write_bytes(lab, {0, 0, 8, 1, 0, 0, 0, 1, 5});
    CHECK_THROWS_AS(load_idx(img, lab), parse_error);

    // image/label count mismatch
    write_bytes(img, {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 9});
    write_bytes(lab, {0, 0, 8, 1, 0, 0, 0, 2, 5, 6});
    CHECK_THROWS_AS(load_idx(img, lab), parse_error);

    // missing file
    CHECK_THROWS_AS(load_idx(temp_path("nope.images"), lab), io_error);

    std::remove(img.c_str());
    std::remove(lab.c_str());
}

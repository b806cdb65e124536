#include "zico/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "zico/rng.hpp"

namespace zico {

Dataset l2_normalize(Dataset ds) {
    for (int i = 0; i < ds.M; ++i) {
        double* r = ds.samples.data() + size_t(i) * size_t(ds.d);
        double nrm = 0.0;
        for (int j = 0; j < ds.d; ++j) nrm += r[j] * r[j];
        nrm = std::sqrt(nrm);
        if (nrm == 0.0)
            throw validation_error("l2_normalize: row " + std::to_string(i) + " is all zero");
        for (int j = 0; j < ds.d; ++j) r[j] /= nrm;
    }
    ds.normalized = true;
    return ds;
}

Dataset standardize_features(Dataset ds) {
    for (int j = 0; j < ds.d; ++j) {
        double mean = 0.0;
        for (int i = 0; i < ds.M; ++i) mean += ds.samples[size_t(i) * ds.d + j];
        mean /= double(ds.M);
        double var = 0.0;
        for (int i = 0; i < ds.M; ++i) {
            const double c = ds.samples[size_t(i) * ds.d + j] - mean;
            var += c * c;
        }
        var /= double(ds.M);
        const double inv = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
        for (int i = 0; i < ds.M; ++i) {
            auto& v = ds.samples[size_t(i) * ds.d + j];
            v = (v - mean) * inv;
        }
    }
    ds.normalized = false;
    return ds;
}

Dataset synth_clusters(int classes, int per_class, int dim, double spread, uint64_t seed) {
    if (classes < 2) throw validation_error("synth_clusters: need at least 2 classes");
    if (per_class < 1) throw validation_error("synth_clusters: need at least 1 sample per class");
    Rng rng(seed);
    std::vector<std::vector<double>> centers(static_cast<size_t>(classes),
                                             std::vector<double>(static_cast<size_t>(dim)));
    for (auto& c : centers) {
        double nrm = 0.0;
        for (auto& v : c) {
            v = rng.normal();
            nrm += v * v;
        }
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) nrm = 1.0;
        for (auto& v : c) v /= nrm;
    }
    Dataset ds;
    ds.M = classes * per_class;
    ds.d = dim;
    ds.num_classes = classes;
    ds.samples.resize(size_t(ds.M) * size_t(dim));
    ds.labels.resize(size_t(ds.M));
    int row = 0;
    for (int k = 0; k < classes; ++k)
        for (int s = 0; s < per_class; ++s, ++row) {
            double* r = ds.samples.data() + size_t(row) * size_t(dim);
            for (int j = 0; j < dim; ++j) r[j] = centers[size_t(k)][size_t(j)] + spread * rng.normal();
            ds.labels[size_t(row)] = k;
        }
    return ds;
}

Dataset synth_textures(int classes, int per_class, int size, double spread, uint64_t seed) {
    if (classes < 2) throw validation_error("synth_textures: need at least 2 classes");
    if (per_class < 1) throw validation_error("synth_textures: need at least 1 sample per class");
    if (size < 2) throw validation_error("synth_textures: image side must be at least 2");
    Rng rng(seed);
    Dataset ds;
    ds.M = classes * per_class;
    ds.channels = 1;
    ds.height = size;
    ds.width = size;
    ds.d = size * size;
    ds.num_classes = classes;
    ds.samples.resize(size_t(ds.M) * size_t(ds.d));
    ds.labels.resize(size_t(ds.M));
    const double freq = 2.0 * std::numbers::pi / 4.0; // wavelength of four pixels
    int row = 0;
    for (int k = 0; k < classes; ++k) {
        const double angle = std::numbers::pi * double(k) / double(classes);
        const double ax = std::cos(angle);
        const double ay = std::sin(angle);
        for (int s = 0; s < per_class; ++s, ++row) {
            const double phase = 2.0 * std::numbers::pi * rng.uniform();
            double* r = ds.samples.data() + size_t(row) * size_t(ds.d);
            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x)
                    r[y * size + x] = std::cos(freq * (ax * double(x) + ay * double(y)) + phase) +
                                      spread * rng.normal();
            ds.labels[size_t(row)] = k;
        }
    }
    return ds;
}

Dataset with_regression_targets(Dataset ds) {
    if (ds.labels.empty())
        throw validation_error("with_regression_targets: dataset has no class labels");
    const double denom = ds.num_classes > 1 ? double(ds.num_classes - 1) : 1.0;
    ds.targets.resize(ds.labels.size());
    for (size_t i = 0; i < ds.labels.size(); ++i) ds.targets[i] = double(ds.labels[i]) / denom;
    ds.label_bound = 1.0;
    return ds;
}

std::vector<Batch> batch_iter(const Dataset& ds, int batch_size, uint64_t seed) {
    if (batch_size < 1) throw validation_error("batch_iter: batch_size must be >= 1");
    Rng rng(seed);
    const std::vector<int> order = rng.permutation(ds.M);
    std::vector<Batch> batches;
    for (int start = 0; start < ds.M; start += batch_size) {
        const int count = std::min(batch_size, ds.M - start);
        Batch b;
        b.index = int(batches.size());
        b.size = count;
        b.inputs.resize(size_t(count) * size_t(ds.d));
        for (int i = 0; i < count; ++i) {
            const int src = order[size_t(start + i)];
            const double* r = ds.row(src);
            std::copy(r, r + ds.d, b.inputs.begin() + size_t(i) * size_t(ds.d));
            if (!ds.labels.empty()) b.labels.push_back(ds.labels[size_t(src)]);
            if (!ds.targets.empty()) b.targets.push_back(ds.targets[size_t(src)]);
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, int train_count, uint64_t seed) {
    if (train_count < 0 || train_count > ds.M)
        throw validation_error("split_dataset: train_count out of range");
    Rng rng(seed);
    const std::vector<int> order = rng.permutation(ds.M);
    auto take = [&](int from, int upto) {
        Dataset out;
        out.d = ds.d;
        out.channels = ds.channels;
        out.height = ds.height;
        out.width = ds.width;
        out.num_classes = ds.num_classes;
        out.normalized = ds.normalized;
        out.label_bound = ds.label_bound;
        out.M = upto - from;
        out.samples.resize(size_t(out.M) * size_t(ds.d));
        for (int i = from; i < upto; ++i) {
            const int src = order[size_t(i)];
            const double* r = ds.row(src);
            std::copy(r, r + ds.d, out.samples.begin() + size_t(i - from) * size_t(ds.d));
            if (!ds.labels.empty()) out.labels.push_back(ds.labels[size_t(src)]);
            if (!ds.targets.empty()) out.targets.push_back(ds.targets[size_t(src)]);
        }
        return out;
    };
    return {take(0, train_count), take(train_count, ds.M)};
}

namespace {

constexpr uint32_t kImageMagic = 0x00000803;
constexpr uint32_t kLabelMagic = 0x00000801;

uint32_t read_be32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        throw parse_error("idx: truncated header in " + path);
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

void write_be32(std::ofstream& f, uint32_t v) {
    const unsigned char b[4] = {uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8), uint8_t(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

std::string hex_magic(uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", v);
    return buf;
}

} // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream fi(images_path, std::ios::binary);
    if (!fi) throw io_error("idx: cannot open " + images_path);
    const uint32_t im = read_be32(fi, images_path);
    if (im != kImageMagic)
        throw parse_error("idx: image magic expected " + hex_magic(kImageMagic) + ", got " +
                          hex_magic(im) + " in " + images_path);
    const uint32_t count = read_be32(fi, images_path);
    const uint32_t rows = read_be32(fi, images_path);
    const uint32_t cols = read_be32(fi, images_path);

    std::ifstream fl(labels_path, std::ios::binary);
    if (!fl) throw io_error("idx: cannot open " + labels_path);
    const uint32_t lm = read_be32(fl, labels_path);
    if (lm != kLabelMagic)
        throw parse_error("idx: label magic expected " + hex_magic(kLabelMagic) + ", got " +
                          hex_magic(lm) + " in " + labels_path);
    const uint32_t lcount = read_be32(fl, labels_path);
    if (lcount != count)
        throw parse_error("idx: image count " + std::to_string(count) + " != label count " +
                          std::to_string(lcount));

    Dataset ds;
    ds.M = int(count);
    ds.d = int(rows * cols);
    ds.channels = 1;
    ds.height = int(rows);
    ds.width = int(cols);
    ds.samples.resize(size_t(ds.M) * size_t(ds.d));
    std::vector<unsigned char> pix(size_t(ds.d));
    for (int i = 0; i < ds.M; ++i) {
        if (!fi.read(reinterpret_cast<char*>(pix.data()), std::streamsize(pix.size())))
            throw parse_error("idx: truncated pixel data in " + images_path);
        for (int j = 0; j < ds.d; ++j)
            ds.samples[size_t(i) * size_t(ds.d) + size_t(j)] = double(pix[size_t(j)]) / 255.0;
    }
    ds.labels.resize(size_t(ds.M));
    int max_label = 0;
    for (int i = 0; i < ds.M; ++i) {
        unsigned char lab;
        if (!fl.read(reinterpret_cast<char*>(&lab), 1))
            throw parse_error("idx: truncated label data in " + labels_path);
        ds.labels[size_t(i)] = int(lab);
        max_label = std::max(max_label, int(lab));
    }
    ds.num_classes = max_label + 1;
    if (fi.peek() != std::char_traits<char>::eof())
        throw parse_error("idx: trailing bytes after pixel data in " + images_path);
    if (fl.peek() != std::char_traits<char>::eof())
        throw parse_error("idx: trailing bytes after label data in " + labels_path);
    return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path) {
    if (ds.labels.empty()) throw validation_error("write_idx: dataset has no labels");
    // Flat feature sets carry no usable image shape, so they are stored as
    // one row of d columns; values are clamped into [0,1] before quantizing.
    const bool image_shape = ds.channels == 1 && ds.height * ds.width == ds.d;
    std::ofstream fi(images_path, std::ios::binary);
    if (!fi) throw io_error("idx: cannot open " + images_path + " for writing");
    write_be32(fi, kImageMagic);
    write_be32(fi, uint32_t(ds.M));
    write_be32(fi, uint32_t(image_shape ? ds.height : 1));
    write_be32(fi, uint32_t(image_shape ? ds.width : ds.d));
    for (int i = 0; i < ds.M; ++i)
        for (int j = 0; j < ds.d; ++j) {
            const double v = ds.samples[size_t(i) * size_t(ds.d) + size_t(j)];
            const auto b = uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            fi.write(reinterpret_cast<const char*>(&b), 1);
        }
    std::ofstream fl(labels_path, std::ios::binary);
    if (!fl) throw io_error("idx: cannot open " + labels_path + " for writing");
    write_be32(fl, kLabelMagic);
    write_be32(fl, uint32_t(ds.M));
    for (int i = 0; i < ds.M; ++i) {
        const auto b = uint8_t(ds.labels[size_t(i)]);
        fl.write(reinterpret_cast<const char*>(&b), 1);
    }
}

} // namespace zico

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zico/errors.hpp"

namespace zico {

// Immutable after construction. samples is row-major M x d; a row can be
// viewed as [channels, height, width] when channels*height*width == d.
struct Dataset {
    int M = 0;
    int d = 0;
    int channels = 1, height = 1, width = 1;
    std::vector<double> samples;
    std::vector<int> labels;     // classification labels (empty for pure regression)
    std::vector<double> targets; // regression targets (empty for pure classification)
    int num_classes = 0;
    bool normalized = false;
    double label_bound = 1.0; // R: |target| <= R when targets present

    const double* row(int i) const { return samples.data() + size_t(i) * size_t(d); }
};

struct Batch {
    int index = 0; // batch ordinal within the epoch
    int size = 0;
    std::vector<double> inputs; // size x d
    std::vector<int> labels;
    std::vector<double> targets;
};

// Each row divided by its L2 norm. A zero row is a validation error naming
// the row index.
Dataset l2_normalize(Dataset ds);

// Per-feature standardization (mean 0, std 1) used before benchmark training.
Dataset standardize_features(Dataset ds);

// Gaussian blobs around `classes` random unit-vector centers. The class
// signal lives in per-feature coordinates, which pooled convolutional
// candidates cannot see; use synth_textures when training those.
Dataset synth_clusters(int classes, int per_class, int dim, double spread, uint64_t seed);

// Phase-randomized oriented gratings on a size x size canvas, one orientation
// per class (angle k*pi/classes, wavelength four pixels) plus Gaussian pixel
// noise. Random phase keeps the signal out of absolute pixel positions, so
// the classes are only separable through local texture statistics, exactly
// what small convolutional candidates extract.
Dataset synth_textures(int classes, int per_class, int size, double spread, uint64_t seed);

// Class indices scaled into [0,1] so the regression bound R=1 holds.
Dataset with_regression_targets(Dataset ds);

// Seeded shuffle, then contiguous slices; the final short batch is emitted.
std::vector<Batch> batch_iter(const Dataset& ds, int batch_size, uint64_t seed);

// Seeded shuffle, then the first `train_count` rows vs the rest.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, int train_count, uint64_t seed);

// IDX container format (big-endian, image magic 0x00000803, label magic
// 0x00000801); pixel bytes scaled to [0,1]. write_idx clamps samples into
// [0,1] and stores flat feature sets as a single row of d columns.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path);

} // namespace zico

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pbls/bls.hpp"
#include "pbls/matrix.hpp"

namespace pbls {

/// Raw IDX image/label pair (MNIST layout).
struct RawDataset {
    std::size_t count = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> images;  // count * height * width
    std::vector<std::uint8_t> labels;  // count, each < class_count
    std::size_t class_count = 10;
};

/// Parses IDX files: magic 0x00000803 (u8 3-D tensor) for images,
/// 0x00000801 (u8 vector) for labels; dimensions big-endian u32.
RawDataset load_idx(const std::string& images_path, const std::string& labels_path,
                    std::size_t class_count = 10);

/// Test-only/round-trip helper: writes IDX bytes for the given raw data.
std::vector<std::uint8_t> encode_idx_images(const RawDataset& raw);
std::vector<std::uint8_t> encode_idx_labels(const RawDataset& raw);

/// Per-feature min/max from the training set, reused to scale test data.
struct NormStats {
    std::vector<double> mins, maxs;
};

/// Flattens images to rows, min-max scales to [0,1] (constant features map
/// to 0), one-hot encodes labels. If `stats` is null, statistics are
/// computed from `raw` and returned through `out_stats` when given.
Dataset to_dataset(const RawDataset& raw, const NormStats* stats = nullptr,
                   NormStats* out_stats = nullptr);

/// Deterministic Gaussian blobs: unit within-class standard deviation,
/// class centers spaced `separation` apart. Output is normalized and
/// one-hot encoded.
Dataset synthetic_blobs(std::size_t classes, std::size_t samples_per_class, std::size_t dim,
                        double separation, std::uint64_t seed);

}  // namespace pbls

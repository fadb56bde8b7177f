#include "pbls/data.hpp"

#include <fstream>
#include <random>

namespace pbls {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f),
                                     std::istreambuf_iterator<char>());
}

std::uint32_t get_u32_be(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

}  // namespace

RawDataset load_idx(const std::string& images_path, const std::string& labels_path,
                    std::size_t class_count) {
    std::vector<std::uint8_t> img = read_file(images_path);
    std::vector<std::uint8_t> lab = read_file(labels_path);

    if (img.size() < 16) throw FormatError(images_path + ": truncated IDX header");
    if (get_u32_be(img.data()) != kImageMagic)
        throw FormatError(images_path + ": bad IDX magic for a u8 image tensor");
    std::uint32_t count = get_u32_be(img.data() + 4);
    std::uint32_t height = get_u32_be(img.data() + 8);
    std::uint32_t width = get_u32_be(img.data() + 12);
    if (img.size() != 16 + static_cast<std::size_t>(count) * height * width)
        throw FormatError(images_path + ": image data truncated");

    if (lab.size() < 8) throw FormatError(labels_path + ": truncated IDX header");
    if (get_u32_be(lab.data()) != kLabelMagic)
        throw FormatError(labels_path + ": bad IDX magic for a u8 label vector");
    std::uint32_t lcount = get_u32_be(lab.data() + 4);
    if (lab.size() != 8 + static_cast<std::size_t>(lcount))
        throw FormatError(labels_path + ": label data truncated");
    if (lcount != count)
        throw FormatError("image count " + std::to_string(count) + " != label count " +
                          std::to_string(lcount));

    RawDataset raw;
    raw.count = count;
    raw.height = height;
    raw.width = width;
    raw.class_count = class_count;
    raw.images.assign(img.begin() + 16, img.end());
    raw.labels.assign(lab.begin() + 8, lab.end());
    for (std::uint8_t l : raw.labels)
        if (l >= class_count)
            throw FormatError("label " + std::to_string(l) + " out of range for " +
                              std::to_string(class_count) + " classes");
    return raw;
}

std::vector<std::uint8_t> encode_idx_images(const RawDataset& raw) {
    std::vector<std::uint8_t> out;
    put_u32_be(out, kImageMagic);
    put_u32_be(out, static_cast<std::uint32_t>(raw.count));
    put_u32_be(out, static_cast<std::uint32_t>(raw.height));
    put_u32_be(out, static_cast<std::uint32_t>(raw.width));
    out.insert(out.end(), raw.images.begin(), raw.images.end());
    return out;
}

std::vector<std::uint8_t> encode_idx_labels(const RawDataset& raw) {
    std::vector<std::uint8_t> out;
    put_u32_be(out, kLabelMagic);
    put_u32_be(out, static_cast<std::uint32_t>(raw.count));
    out.insert(out.end(), raw.labels.begin(), raw.labels.end());
    return out;
}

namespace {

Dataset finalize(DenseMatrix x, std::vector<std::size_t> labels, std::size_t classes,
                 const NormStats* stats, NormStats* out_stats) {
    NormStats local;
    if (!stats) {
        local.mins.assign(x.cols(), 0.0);
        local.maxs.assign(x.cols(), 0.0);
        for (std::size_t j = 0; j < x.cols(); ++j) {
            double lo = x(0, j), hi = x(0, j);
            for (std::size_t i = 1; i < x.rows(); ++i) {
                lo = std::min(lo, x(i, j));
                hi = std::max(hi, x(i, j));
            }
            local.mins[j] = lo;
            local.maxs[j] = hi;
        }
        stats = &local;
    }
    for (std::size_t j = 0; j < x.cols(); ++j) {
        const double lo = stats->mins[j], range = stats->maxs[j] - stats->mins[j];
        for (std::size_t i = 0; i < x.rows(); ++i)
            x(i, j) = range > 0.0 ? (x(i, j) - lo) / range : 0.0;
    }
    if (out_stats) *out_stats = *stats;

    DenseMatrix y(x.rows(), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) y(i, labels[i]) = 1.0;
    return Dataset{std::move(x), std::move(y), std::move(labels)};
}

}  // namespace

Dataset to_dataset(const RawDataset& raw, const NormStats* stats, NormStats* out_stats) {
    if (raw.count == 0) throw InvalidArgument("to_dataset: empty dataset");
    const std::size_t dim = raw.height * raw.width;
    DenseMatrix x(raw.count, dim);
    for (std::size_t i = 0; i < raw.count; ++i)
        for (std::size_t j = 0; j < dim; ++j)
            x(i, j) = static_cast<double>(raw.images[i * dim + j]);
    std::vector<std::size_t> labels(raw.labels.begin(), raw.labels.end());
    return finalize(std::move(x), std::move(labels), raw.class_count, stats, out_stats);
}

Dataset synthetic_blobs(std::size_t classes, std::size_t samples_per_class, std::size_t dim,
                        double separation, std::uint64_t seed) {
    if (classes == 0 || samples_per_class == 0 || dim == 0)
        throw InvalidArgument("synthetic_blobs: all counts must be >= 1");
    if (separation < 0.0) throw InvalidArgument("synthetic_blobs: separation must be >= 0");

    const std::size_t n = classes * samples_per_class;
    DenseMatrix x(n, dim);
    std::vector<std::size_t> labels(n);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    // Centers are collinear at spacing `separation`, so all pairs are at
    // least `separation` apart. Classes interleave across rows so any
    // stride split stays balanced.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % classes;
        labels[i] = c;
        x(i, 0) = static_cast<double>(c) * separation + g(rng);
        for (std::size_t j = 1; j < dim; ++j) x(i, j) = g(rng);
    }
    return finalize(std::move(x), std::move(labels), classes, nullptr, nullptr);
}

}  // namespace pbls

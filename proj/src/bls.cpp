#include "pbls/bls.hpp"

#include <cmath>
#include <cstring>
#include <random>

namespace pbls {

double apply_activation(Activation act, double x) {
    switch (act) {
        case Activation::Linear: return x;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::Tanh: return std::tanh(x);
    }
    return x;
}

void BlsConfig::validate() const {
    if (n_feature_groups == 0 || nodes_per_feature_group == 0 || n_enh_groups == 0 ||
        nodes_per_enh_group == 0)
        throw InvalidArgument("BlsConfig: all node counts must be >= 1");
    if (lambda <= 0.0) throw InvalidArgument("BlsConfig: lambda must be positive");
    if (enhancement_scale <= 0.0) throw InvalidArgument("BlsConfig: enhancement_scale must be positive");
}

BlsModel::BlsModel(BlsConfig config, std::uint64_t seed, std::size_t input_dim)
    : config_(config), seed_(seed), input_dim_(input_dim) {
    config_.validate();
    if (input_dim_ == 0) throw InvalidArgument("BlsModel: input_dim must be positive");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto fill = [&](DenseMatrix& m, double scale) {
        for (double& x : m.data()) x = scale * u(rng);
    };

    const std::size_t fw = config_.nodes_per_feature_group;
    for (std::size_t g = 0; g < config_.n_feature_groups; ++g) {
        DenseMatrix w(input_dim_, fw);
        fill(w, 1.0);
        w_f_.push_back(std::move(w));
        std::vector<double> beta(fw);
        for (double& b : beta) b = u(rng);
        beta_f_.push_back(std::move(beta));
    }

    // Enhancement weights are shrunk to keep the pre-activation in the
    // responsive range of tanh/sigmoid.
    const double shrink = config_.enhancement_scale /
                          std::sqrt(static_cast<double>(config_.feature_width()));
    const std::size_t ew = config_.nodes_per_enh_group;
    for (std::size_t g = 0; g < config_.n_enh_groups; ++g) {
        DenseMatrix w(config_.feature_width(), ew);
        fill(w, shrink);
        w_h_.push_back(std::move(w));
        std::vector<double> beta(ew);
        for (double& b : beta) b = shrink * u(rng);
        beta_h_.push_back(std::move(beta));
    }
}

const DenseMatrix& BlsModel::output_weights() const {
    if (!w_out_) throw StateError("BlsModel: not trained");
    return *w_out_;
}

void BlsModel::set_output_weights(DenseMatrix w) {
    if (w.rows() != config_.total_nodes())
        throw DimensionError("BlsModel: output weight rows must equal total node count");
    w_out_ = std::move(w);
}

namespace {

DenseMatrix affine_activate(const DenseMatrix& x, const DenseMatrix& w,
                            const std::vector<double>& beta, Activation act) {
    DenseMatrix out = mat_mul(x, w);
    for (std::size_t i = 0; i < out.rows(); ++i)
        for (std::size_t j = 0; j < out.cols(); ++j)
            out(i, j) = apply_activation(act, out(i, j) + beta[j]);
    return out;
}

DenseMatrix hcat(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) throw DimensionError("hcat: row counts differ");
    DenseMatrix out(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols(); ++j) out(i, a.cols() + j) = b(i, j);
    }
    return out;
}

}  // namespace

DenseMatrix build_feature_nodes(const DenseMatrix& x, const BlsModel& model) {
    if (x.cols() != model.input_dim())
        throw DimensionError("build_feature_nodes: X cols must equal input dim");
    DenseMatrix z;
    for (std::size_t g = 0; g < model.config().n_feature_groups; ++g) {
        DenseMatrix zg = affine_activate(x, model.feature_weights()[g],
                                         model.feature_biases()[g],
                                         model.config().feature_activation);
        z = (g == 0) ? std::move(zg) : hcat(z, zg);
    }
    return z;
}

DenseMatrix build_enhancement_nodes(const DenseMatrix& z, const BlsModel& model) {
    if (z.cols() != model.config().feature_width())
        throw DimensionError("build_enhancement_nodes: Z cols must equal feature width");
    DenseMatrix h;
    for (std::size_t g = 0; g < model.config().n_enh_groups; ++g) {
        DenseMatrix hg = affine_activate(z, model.enh_weights()[g], model.enh_biases()[g],
                                         model.config().enhancement_activation);
        h = (g == 0) ? std::move(hg) : hcat(h, hg);
    }
    return h;
}

DenseMatrix assemble_design(const DenseMatrix& z, const DenseMatrix& h) {
    return hcat(z, h);
}

BlsModel train(const Dataset& data, const BlsConfig& config, std::uint64_t seed,
               const PinvBackend& backend) {
    config.validate();
    if (data.x.rows() != data.y.rows()) throw DimensionError("train: X/Y row mismatch");
    if (data.x.rows() < config.total_nodes())
        throw InvalidArgument(
            "train: need at least as many samples as total nodes (full column rank regime)");
    BlsModel model(config, seed, data.x.cols());
    DenseMatrix z = build_feature_nodes(data.x, model);
    DenseMatrix h = build_enhancement_nodes(z, model);
    DenseMatrix a = assemble_design(z, h);
    DenseMatrix pinv = backend(a, config.lambda);
    model.set_output_weights(mat_mul(pinv, data.y));
    return model;
}

std::vector<std::size_t> predict(const BlsModel& model, const DenseMatrix& x_test) {
    const DenseMatrix& w = model.output_weights();  // throws StateError if untrained
    DenseMatrix z = build_feature_nodes(x_test, model);
    DenseMatrix h = build_enhancement_nodes(z, model);
    DenseMatrix scores = mat_mul(assemble_design(z, h), w);
    std::vector<std::size_t> labels(scores.rows());
    for (std::size_t i = 0; i < scores.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < scores.cols(); ++c)
            if (scores(i, c) > scores(i, best)) best = c;  // strict: ties keep lowest index
        labels[i] = best;
    }
    return labels;
}

double evaluate(const BlsModel& model, const Dataset& data) {
    std::vector<std::size_t> pred = predict(model, data.x);
    if (pred.size() != data.labels.size()) throw DimensionError("evaluate: label count mismatch");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == data.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Model serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kModelMagic[8] = {'P', 'B', 'L', 'S', 'M', 'D', 'L', '1'};

void put_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64_le(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64_le(out, bits);
}

std::uint64_t get_u64_le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

double get_f64_le(const std::uint8_t* p) {
    std::uint64_t bits = get_u64_le(p);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

std::vector<std::uint8_t> BlsModel::serialize() const {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kModelMagic, kModelMagic + 8);
    put_u64_le(out, config_.n_feature_groups);
    put_u64_le(out, config_.nodes_per_feature_group);
    put_u64_le(out, config_.n_enh_groups);
    put_u64_le(out, config_.nodes_per_enh_group);
    put_f64_le(out, config_.lambda);
    put_f64_le(out, config_.enhancement_scale);
    out.push_back(static_cast<std::uint8_t>(config_.feature_activation));
    out.push_back(static_cast<std::uint8_t>(config_.enhancement_activation));
    put_u64_le(out, seed_);
    put_u64_le(out, input_dim_);
    out.push_back(w_out_ ? 1 : 0);
    if (w_out_) {
        auto w = w_out_->serialize();
        out.insert(out.end(), w.begin(), w.end());
    }
    return out;
}

BlsModel BlsModel::deserialize(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t kFixed = 8 + 4 * 8 + 2 * 8 + 2 + 8 + 8 + 1;
    if (bytes.size() < kFixed || std::memcmp(bytes.data(), kModelMagic, 8) != 0)
        throw FormatError("model file: bad magic or truncated");
    const std::uint8_t* p = bytes.data() + 8;
    BlsConfig cfg;
    cfg.n_feature_groups = get_u64_le(p); p += 8;
    cfg.nodes_per_feature_group = get_u64_le(p); p += 8;
    cfg.n_enh_groups = get_u64_le(p); p += 8;
    cfg.nodes_per_enh_group = get_u64_le(p); p += 8;
    cfg.lambda = get_f64_le(p); p += 8;
    cfg.enhancement_scale = get_f64_le(p); p += 8;
    if (*p > 2) throw FormatError("model file: bad activation tag");
    cfg.feature_activation = static_cast<Activation>(*p++);
    if (*p > 2) throw FormatError("model file: bad activation tag");
    cfg.enhancement_activation = static_cast<Activation>(*p++);
    std::uint64_t seed = get_u64_le(p); p += 8;
    std::uint64_t input_dim = get_u64_le(p); p += 8;
    bool has_w = *p++ != 0;
    BlsModel model(cfg, seed, input_dim);
    if (has_w) {
        std::span<const std::uint8_t> rest(p, bytes.data() + bytes.size());
        model.set_output_weights(DenseMatrix::deserialize(rest));
    } else if (p != bytes.data() + bytes.size()) {
        throw FormatError("model file: trailing bytes");
    }
    return model;
}

}  // namespace pbls

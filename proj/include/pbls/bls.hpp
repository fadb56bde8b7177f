#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "pbls/matrix.hpp"

namespace pbls {

enum class Activation : std::uint8_t { Linear, Sigmoid, Tanh };

double apply_activation(Activation act, double x);

struct BlsConfig {
    std::size_t n_feature_groups = 4;
    std::size_t nodes_per_feature_group = 8;
    std::size_t n_enh_groups = 4;
    std::size_t nodes_per_enh_group = 8;
    double lambda = 1e-8;
    double enhancement_scale = 0.8;  // shrink factor s; weights drawn U[-1,1] * s/sqrt(width)
    Activation feature_activation = Activation::Linear;
    Activation enhancement_activation = Activation::Tanh;

    std::size_t feature_width() const { return n_feature_groups * nodes_per_feature_group; }
    std::size_t enh_width() const { return n_enh_groups * nodes_per_enh_group; }
    std::size_t total_nodes() const { return feature_width() + enh_width(); }
    void validate() const;
};

struct Dataset {
    DenseMatrix x;                // samples x input dim, normalized to [0,1]
    DenseMatrix y;                // samples x classes, one-hot
    std::vector<std::size_t> labels;  // 0-based class indices
};

/// Random feature/enhancement weights plus (after training) the output
/// weights. All random weights are a pure function of (config, seed,
/// input_dim).
class BlsModel {
public:
    BlsModel(BlsConfig config, std::uint64_t seed, std::size_t input_dim);

    const BlsConfig& config() const { return config_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t input_dim() const { return input_dim_; }
    bool trained() const { return w_out_.has_value(); }
    const DenseMatrix& output_weights() const;
    void set_output_weights(DenseMatrix w);

    const std::vector<DenseMatrix>& feature_weights() const { return w_f_; }
    const std::vector<std::vector<double>>& feature_biases() const { return beta_f_; }
    const std::vector<DenseMatrix>& enh_weights() const { return w_h_; }
    const std::vector<std::vector<double>>& enh_biases() const { return beta_h_; }

    // Versioned binary record (magic "PBLSMDL1"): config, seed, input_dim,
    // output weights. Random weights are re-derived from the seed.
    std::vector<std::uint8_t> serialize() const;
    static BlsModel deserialize(std::span<const std::uint8_t> bytes);

private:
    BlsConfig config_;
    std::uint64_t seed_;
    std::size_t input_dim_;
    std::vector<DenseMatrix> w_f_;               // per feature group: input_dim x width
    std::vector<std::vector<double>> beta_f_;    // per feature group: width
    std::vector<DenseMatrix> w_h_;               // per enh group: feature_width x width
    std::vector<std::vector<double>> beta_h_;
    std::optional<DenseMatrix> w_out_;           // total_nodes x classes
};

/// Z^n = [Z_1 .. Z_n], Z_i = act(X W_fi + beta_fi).
DenseMatrix build_feature_nodes(const DenseMatrix& x, const BlsModel& model);

/// H^m = [H_1 .. H_m], H_j = act(Z W_hj + beta_hj).
DenseMatrix build_enhancement_nodes(const DenseMatrix& z, const BlsModel& model);

/// A = [Z | H].
DenseMatrix assemble_design(const DenseMatrix& z, const DenseMatrix& h);

/// Ridge pseudoinverse provider: (A, lambda) -> (lambda I + A^T A)^-1 A^T.
using PinvBackend = std::function<DenseMatrix(const DenseMatrix&, double)>;

/// Trains output weights W = pinv(A, lambda) * Y. Backend errors propagate.
BlsModel train(const Dataset& data, const BlsConfig& config, std::uint64_t seed,
               const PinvBackend& backend);

/// Argmax class per row of A_test * W; ties resolved to the lowest index.
std::vector<std::size_t> predict(const BlsModel& model, const DenseMatrix& x_test);

/// Fraction of correctly predicted labels.
double evaluate(const BlsModel& model, const Dataset& data);

}  // namespace pbls

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "biograd/ops.hpp"
#include "biograd/tensor.hpp"

namespace biograd {

enum class LayerKind { Conv, Pool, Dense };

std::string to_string(LayerKind k);

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    std::size_t fan_out = 0; // filters (conv) or units (dense); unused for pool
    std::size_t kernel = 0;  // conv kernel size / pool window
    std::size_t stride = 1;
    std::size_t padding = 0;
    Activation activation = Activation::Identity;
};

struct LayerParams {
    Tensor weights; // conv: F x C x k x k, dense: out x in; empty for pool
    Tensor bias;    // F or out; empty for pool
    std::optional<Tensor> mask; // binary, congruent with weights
};

enum class HeadKind { Linear, Ridge };

struct Network {
    std::vector<LayerSpec> specs;
    std::vector<LayerParams> params; // index-aligned with specs
    HeadKind head = HeadKind::Linear;
    Shape input_shape;
};

struct ForwardCache {
    Tensor input;
    std::vector<Tensor> pre;  // a_i per layer
    std::vector<Tensor> post; // z_i = activation(a_i) per layer
    std::vector<std::optional<Conv2dCache<double>>> conv; // per conv layer
    std::vector<std::optional<PoolCache>> pool;           // per pool layer
};

// Output shape of a single layer; throws ConfigError when the shapes do not
// compose.
Shape layer_output_shape(const LayerSpec& spec, const Shape& in);

// Composed output shape of the whole stack.
Shape output_shape(const Network& net);

// Weights drawn Gaussian(0, gain / sqrt(fan_in)) from the seeded generator,
// biases zero, no masks. Validates that all layer shapes compose.
Network build_network(std::vector<LayerSpec> specs, HeadKind head, std::uint64_t seed,
                      Shape input_shape, double init_gain = 1.0);

// Full cached forward pass. Linear head: the output is the final dense
// layer's pre-softmax scores. Ridge head: the output is the flattened feature
// vector of the last layer.
std::pair<Tensor, ForwardCache> forward(const Network& net, const Tensor& x);

// Per-layer binary masks zeroing round(sparsity * total) weight positions,
// sampled without replacement over a global index across all layers.
std::vector<Tensor> make_mask(const Network& net, double sparsity, std::uint64_t seed);

void install_masks(Network& net, std::vector<Tensor> masks);

// w := w .* mask for every masked layer.
void apply_masks(Network& net);

std::size_t total_weight_count(const Network& net);

// Fraction of exactly-zero weight values across all parameterized layers.
double measured_sparsity(const Network& net);

} // namespace biograd

#include "biograd/network.hpp"

#include <cmath>
#include <utility>

#include "biograd/error.hpp"
#include "biograd/rng.hpp"

namespace biograd {

std::string to_string(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::Pool: return "pool";
        case LayerKind::Dense: return "dense";
    }
    return "?";
}

Shape layer_output_shape(const LayerSpec& spec, const Shape& in) {
    switch (spec.kind) {
        case LayerKind::Conv: {
            if (in.size() != 3)
                throw ConfigError("conv layer expects a C x H x W input, got " + shape_str(in));
            if (spec.kernel > in[1] + 2 * spec.padding || spec.kernel > in[2] + 2 * spec.padding)
                throw ConfigError("conv kernel " + std::to_string(spec.kernel) +
                                  " larger than padded input " + shape_str(in));
            return {spec.fan_out, conv_out_extent(in[1], spec.kernel, spec.stride, spec.padding),
                    conv_out_extent(in[2], spec.kernel, spec.stride, spec.padding)};
        }
        case LayerKind::Pool: {
            if (in.size() != 3)
                throw ConfigError("pool layer expects a C x H x W input, got " + shape_str(in));
            if (spec.kernel > in[1] || spec.kernel > in[2])
                throw ConfigError("pool window " + std::to_string(spec.kernel) +
                                  " larger than input " + shape_str(in));
            return {in[0], (in[1] - spec.kernel) / spec.stride + 1,
                    (in[2] - spec.kernel) / spec.stride + 1};
        }
        case LayerKind::Dense:
            return {spec.fan_out};
    }
    throw ConfigError("unknown layer kind");
}

Shape output_shape(const Network& net) {
    Shape cur = net.input_shape;
    for (const LayerSpec& spec : net.specs) cur = layer_output_shape(spec, cur);
    return cur;
}

Network build_network(std::vector<LayerSpec> specs, HeadKind head, std::uint64_t seed,
                      Shape input_shape, double init_gain) {
    if (specs.empty()) throw ConfigError("build_network: no layers");

    Network net;
    net.head = head;
    net.input_shape = input_shape;
    net.params.reserve(specs.size());

    Rng base(seed);
    Shape cur = input_shape;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const LayerSpec& spec = specs[i];
        if ((spec.kind == LayerKind::Conv || spec.kind == LayerKind::Dense) && spec.fan_out < 1)
            throw ConfigError("layer " + std::to_string(i) + " (" + to_string(spec.kind) +
                              "): fan_out must be >= 1");
        Shape out;
        try {
            out = layer_output_shape(spec, cur);
        } catch (const ConfigError& e) {
            const std::string below = i == 0 ? "input" : "layer " + std::to_string(i - 1);
            throw ConfigError(below + " -> layer " + std::to_string(i) +
                              " do not compose: " + e.what());
        }

        LayerParams p;
        if (spec.kind == LayerKind::Conv) {
            const std::size_t fan_in = cur[0] * spec.kernel * spec.kernel;
            const double stddev = init_gain / std::sqrt(double(fan_in));
            Rng r = base.fork(i);
            p.weights = Tensor({spec.fan_out, cur[0], spec.kernel, spec.kernel});
            for (double& v : p.weights.data()) v = r.normal(0.0, stddev);
            p.bias = Tensor({spec.fan_out});
        } else if (spec.kind == LayerKind::Dense) {
            const std::size_t fan_in = shape_numel(cur);
            const double stddev = init_gain / std::sqrt(double(fan_in));
            Rng r = base.fork(i);
            p.weights = Tensor({spec.fan_out, fan_in});
            for (double& v : p.weights.data()) v = r.normal(0.0, stddev);
            p.bias = Tensor({spec.fan_out});
        }
        net.params.push_back(std::move(p));
        cur = out;
    }
    net.specs = std::move(specs);
    return net;
}

std::pair<Tensor, ForwardCache> forward(const Network& net, const Tensor& x) {
    if (x.shape() != net.input_shape)
        throw DimensionError("forward: input " + shape_str(x.shape()) +
                             " does not match network input " + shape_str(net.input_shape));

    ForwardCache cache;
    cache.input = x;
    cache.pre.resize(net.specs.size());
    cache.post.resize(net.specs.size());
    cache.conv.resize(net.specs.size());
    cache.pool.resize(net.specs.size());

    Tensor cur = x;
    for (std::size_t i = 0; i < net.specs.size(); ++i) {
        const LayerSpec& spec = net.specs[i];
        Tensor a;
        switch (spec.kind) {
            case LayerKind::Conv: {
                auto [out, c] = conv2d_forward(cur, net.params[i].weights, net.params[i].bias,
                                               spec.stride, spec.padding);
                a = std::move(out);
                cache.conv[i] = std::move(c);
                break;
            }
            case LayerKind::Pool: {
                auto [out, c] = maxpool2d(cur, spec.kernel, spec.stride);
                a = std::move(out);
                cache.pool[i] = std::move(c);
                break;
            }
            case LayerKind::Dense: {
                a = affine(net.params[i].weights, cur.flattened(), net.params[i].bias);
                break;
            }
        }
        if (!a.all_finite())
            throw NumericError("forward: non-finite activation at layer " + std::to_string(i));
        cache.pre[i] = a;
        cache.post[i] = activation_apply(spec.activation, a);
        cur = cache.post[i];
    }

    Tensor out = net.head == HeadKind::Ridge ? cur.flattened() : cur;
    return {std::move(out), std::move(cache)};
}

std::size_t total_weight_count(const Network& net) {
    std::size_t n = 0;
    for (const LayerParams& p : net.params) n += p.weights.size();
    return n;
}

std::vector<Tensor> make_mask(const Network& net, double sparsity, std::uint64_t seed) {
    if (sparsity < 0.0 || sparsity >= 1.0)
        throw ConfigError("make_mask: sparsity must lie in [0, 1), got " +
                          std::to_string(sparsity));

    const std::size_t total = total_weight_count(net);
    const std::size_t zeros = std::size_t(std::llround(sparsity * double(total)));

    Rng rng(seed);
    std::vector<std::size_t> chosen = rng.sample_without_replacement(total, zeros);

    std::vector<Tensor> masks(net.specs.size());
    for (std::size_t i = 0; i < net.params.size(); ++i)
        if (net.params[i].weights.size() > 0)
            masks[i] = Tensor::full(net.params[i].weights.shape(), 1.0);

    // Map global indices back to (layer, offset).
    std::vector<std::size_t> layer_start(net.params.size(), 0);
    std::size_t acc = 0;
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        layer_start[i] = acc;
        acc += net.params[i].weights.size();
    }
    for (std::size_t g : chosen) {
        std::size_t layer = net.params.size() - 1;
        for (std::size_t i = 1; i < net.params.size(); ++i) {
            if (g < layer_start[i]) {
                layer = i - 1;
                break;
            }
        }
        masks[layer][g - layer_start[layer]] = 0.0;
    }
    return masks;
}

void install_masks(Network& net, std::vector<Tensor> masks) {
    if (masks.size() != net.params.size())
        throw DimensionError("install_masks: mask count " + std::to_string(masks.size()) +
                             " does not match layer count " + std::to_string(net.params.size()));
    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (masks[i].size() == 0) continue;
        if (masks[i].shape() != net.params[i].weights.shape())
            throw DimensionError("install_masks: layer " + std::to_string(i) + " mask " +
                                 shape_str(masks[i].shape()) + " does not match weights " +
                                 shape_str(net.params[i].weights.shape()));
        net.params[i].mask = std::move(masks[i]);
    }
    apply_masks(net);
}

void apply_masks(Network& net) {
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        LayerParams& p = net.params[i];
        if (!p.mask) continue;
        if (p.mask->shape() != p.weights.shape())
            throw DimensionError("apply_masks: layer " + std::to_string(i) + " mask " +
                                 shape_str(p.mask->shape()) + " does not match weights " +
                                 shape_str(p.weights.shape()));
        for (std::size_t j = 0; j < p.weights.size(); ++j)
            p.weights[j] *= (*p.mask)[j];
    }
}

double measured_sparsity(const Network& net) {
    std::size_t zeros = 0, total = 0;
    for (const LayerParams& p : net.params) {
        total += p.weights.size();
        for (double v : p.weights.data())
            if (v == 0.0) ++zeros;
    }
    return total == 0 ? 0.0 : double(zeros) / double(total);
}

} // namespace biograd

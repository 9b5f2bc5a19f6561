#include "biograd/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "biograd/error.hpp"

namespace biograd {
namespace {

constexpr char kMagic[4] = {'B', 'I', 'O', 'G'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::ostream& os, std::uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                                static_cast<unsigned char>(v >> 8)};
    os.write(reinterpret_cast<const char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

std::uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return std::uint16_t(b[0]) | std::uint16_t(b[1]) << 8;
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

void put_tensor(std::ostream& os, const Tensor& t) {
    put_u32(os, std::uint32_t(t.rank()));
    for (std::size_t d : t.shape()) put_u64(os, d);
    for (double v : t.data()) put_f64(os, v);
}

Tensor get_tensor(std::istream& is) {
    const std::uint32_t rank = get_u32(is);
    if (rank > 8) throw IoError("checkpoint: implausible tensor rank");
    Shape shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) shape[i] = std::size_t(get_u64(is));
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_f64(is);
    if (!is) throw IoError("checkpoint: truncated tensor payload");
    return t;
}

std::uint8_t kind_code(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return 0;
        case LayerKind::Pool: return 1;
        case LayerKind::Dense: return 2;
    }
    return 255;
}

LayerKind kind_from_code(std::uint8_t c) {
    switch (c) {
        case 0: return LayerKind::Conv;
        case 1: return LayerKind::Pool;
        case 2: return LayerKind::Dense;
    }
    throw IoError("checkpoint: unknown layer kind code " + std::to_string(c));
}

std::uint8_t act_code(Activation a) {
    switch (a) {
        case Activation::Relu: return 0;
        case Activation::Tanh: return 1;
        case Activation::Identity: return 2;
        case Activation::Triangle: return 3;
    }
    return 255;
}

Activation act_from_code(std::uint8_t c) {
    switch (c) {
        case 0: return Activation::Relu;
        case 1: return Activation::Tanh;
        case 2: return Activation::Identity;
        case 3: return Activation::Triangle;
    }
    throw IoError("checkpoint: unknown activation code " + std::to_string(c));
}

} // namespace

void save_network(const Network& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot open " + path + " for writing");

    os.write(kMagic, 4);
    put_u16(os, kVersion);
    os.put(net.head == HeadKind::Linear ? 0 : 1);
    put_u32(os, std::uint32_t(net.input_shape.size()));
    for (std::size_t d : net.input_shape) put_u64(os, d);
    put_u32(os, std::uint32_t(net.specs.size()));

    for (std::size_t i = 0; i < net.specs.size(); ++i) {
        const LayerSpec& s = net.specs[i];
        os.put(char(kind_code(s.kind)));
        put_u32(os, std::uint32_t(s.fan_out));
        put_u32(os, std::uint32_t(s.kernel));
        put_u32(os, std::uint32_t(s.stride));
        put_u32(os, std::uint32_t(s.padding));
        os.put(char(act_code(s.activation)));

        const LayerParams& p = net.params[i];
        const bool has_params = p.weights.size() > 0;
        os.put(has_params ? 1 : 0);
        if (has_params) {
            put_tensor(os, p.weights);
            put_tensor(os, p.bias);
            os.put(p.mask ? 1 : 0);
            if (p.mask) put_tensor(os, *p.mask);
        }
    }
    if (!os) throw IoError("checkpoint: write to " + path + " failed");
}

Network load_network(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open " + path);

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("checkpoint: " + path + " is not a BIOG checkpoint");
    const std::uint16_t version = get_u16(is);
    if (version != kVersion)
        throw IoError("checkpoint: unsupported format version " + std::to_string(version));

    Network net;
    net.head = is.get() == 0 ? HeadKind::Linear : HeadKind::Ridge;
    const std::uint32_t in_rank = get_u32(is);
    net.input_shape.resize(in_rank);
    for (std::uint32_t i = 0; i < in_rank; ++i) net.input_shape[i] = std::size_t(get_u64(is));

    const std::uint32_t layers = get_u32(is);
    for (std::uint32_t i = 0; i < layers; ++i) {
        LayerSpec s;
        s.kind = kind_from_code(std::uint8_t(is.get()));
        s.fan_out = get_u32(is);
        s.kernel = get_u32(is);
        s.stride = get_u32(is);
        s.padding = get_u32(is);
        s.activation = act_from_code(std::uint8_t(is.get()));

        LayerParams p;
        const int has_params = is.get();
        if (has_params == 1) {
            p.weights = get_tensor(is);
            p.bias = get_tensor(is);
            if (is.get() == 1) p.mask = get_tensor(is);
        }
        net.specs.push_back(s);
        net.params.push_back(std::move(p));
        if (!is) throw IoError("checkpoint: truncated layer table in " + path);
    }
    return net;
}

} // namespace biograd

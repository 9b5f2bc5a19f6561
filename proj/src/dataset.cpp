#include "biograd/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "biograd/error.hpp"
#include "biograd/rng.hpp"

namespace biograd {

Tensor Dataset::sample(std::size_t i) const {
    const std::size_t c = images.dim(1), h = images.dim(2), w = images.dim(3);
    const std::size_t stride = c * h * w;
    Tensor out({c, h, w});
    std::memcpy(out.data().data(), images.data().data() + i * stride, stride * sizeof(double));
    return out;
}

// ---------------------------------------------------------------------------
// CIFAR binary batches
// ---------------------------------------------------------------------------

namespace {

constexpr std::size_t kCifarPixels = 3 * 32 * 32;

void read_cifar_file(const std::string& path, std::size_t label_bytes,
                     std::vector<unsigned char>& pixels, std::vector<std::size_t>& labels) {
    std::error_code ec;
    const auto fsize = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("cifar: cannot stat " + path);

    const std::size_t record = label_bytes + kCifarPixels;
    if (fsize == 0 || fsize % record != 0)
        throw IoError("cifar: " + path + " has " + std::to_string(fsize) +
                      " bytes, expected a multiple of " + std::to_string(record));
    const std::size_t count = fsize / record;

    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cifar: cannot open " + path);

    std::vector<unsigned char> buf(record);
    for (std::size_t i = 0; i < count; ++i) {
        is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(record));
        if (!is)
            throw IoError("cifar: " + path + " truncated at record " + std::to_string(i) +
                          ", expected " + std::to_string(count * record) + " bytes");
        // CIFAR-100 carries coarse then fine label; the fine one is used.
        labels.push_back(buf[label_bytes - 1]);
        pixels.insert(pixels.end(), buf.begin() + std::ptrdiff_t(label_bytes), buf.end());
    }
}

Dataset assemble(std::vector<unsigned char> pixels, std::vector<std::size_t> labels,
                 std::size_t class_count, const std::string& split) {
    const std::size_t n = labels.size();
    Dataset ds;
    ds.class_count = class_count;
    ds.split = split;
    ds.labels = std::move(labels);
    ds.images = Tensor({n, 3, 32, 32});
    for (std::size_t i = 0; i < pixels.size(); ++i)
        ds.images[i] = double(pixels[i]) / 255.0;
    return ds;
}

} // namespace

std::pair<Dataset, Dataset> load_cifar(const std::string& dir, CifarVariant variant) {
    std::vector<unsigned char> train_px, test_px;
    std::vector<std::size_t> train_lb, test_lb;

    if (variant == CifarVariant::Cifar10) {
        for (int b = 1; b <= 5; ++b)
            read_cifar_file(dir + "/data_batch_" + std::to_string(b) + ".bin", 1, train_px,
                            train_lb);
        read_cifar_file(dir + "/test_batch.bin", 1, test_px, test_lb);
        return {assemble(std::move(train_px), std::move(train_lb), 10, "train"),
                assemble(std::move(test_px), std::move(test_lb), 10, "test")};
    }
    read_cifar_file(dir + "/train.bin", 2, train_px, train_lb);
    read_cifar_file(dir + "/test.bin", 2, test_px, test_lb);
    return {assemble(std::move(train_px), std::move(train_lb), 100, "train"),
            assemble(std::move(test_px), std::move(test_lb), 100, "test")};
}

// ---------------------------------------------------------------------------
// Synthetic shapes
// ---------------------------------------------------------------------------

Dataset make_synthetic_shapes(std::size_t per_class, std::uint64_t seed,
                              const std::string& split) {
    constexpr std::size_t kSide = 8;
    const std::size_t n = 3 * per_class;
    Rng rng(seed);

    Dataset ds;
    ds.class_count = 3;
    ds.split = split;
    ds.labels.resize(n);
    ds.images = Tensor({n, 3, kSide, kSide});

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i % 3;
    rng.shuffle(order);

    for (std::size_t img = 0; img < n; ++img) {
        const std::size_t cls = order[img];
        ds.labels[img] = cls;
        double* px = ds.images.data().data() + img * 3 * kSide * kSide;

        for (std::size_t i = 0; i < 3 * kSide * kSide; ++i) px[i] = 0.25 * rng.uniform();

        // Foreground color deliberately carries no class information.
        double col[3];
        for (double& v : col) v = 0.35 + 0.65 * rng.uniform();

        auto paint = [&](std::size_t y, std::size_t x) {
            for (std::size_t ch = 0; ch < 3; ++ch)
                px[(ch * kSide + y) * kSide + x] = std::min(1.0, col[ch]);
        };

        switch (cls) {
            case 0: { // horizontal bar
                const std::size_t row = rng.below(kSide);
                for (std::size_t x = 0; x < kSide; ++x) paint(row, x);
                break;
            }
            case 1: { // vertical bar
                const std::size_t colx = rng.below(kSide);
                for (std::size_t y = 0; y < kSide; ++y) paint(y, colx);
                break;
            }
            default: { // diagonal, either orientation, shifted
                const bool anti = rng.below(2) == 1;
                const std::ptrdiff_t off = std::ptrdiff_t(rng.below(5)) - 2;
                for (std::size_t t = 0; t < kSide; ++t) {
                    const std::ptrdiff_t x =
                        anti ? std::ptrdiff_t(kSide - 1 - t) + off : std::ptrdiff_t(t) + off;
                    if (x >= 0 && x < std::ptrdiff_t(kSide)) paint(t, std::size_t(x));
                }
                break;
            }
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Subsetting and noise
// ---------------------------------------------------------------------------

namespace {

Dataset take(const Dataset& ds, const std::vector<std::size_t>& indices) {
    const std::size_t c = ds.images.dim(1), h = ds.images.dim(2), w = ds.images.dim(3);
    const std::size_t stride = c * h * w;
    Dataset out;
    out.class_count = ds.class_count;
    out.split = ds.split;
    out.labels.reserve(indices.size());
    out.images = Tensor({indices.size(), c, h, w});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.labels.push_back(ds.labels[indices[i]]);
        std::memcpy(out.images.data().data() + i * stride,
                    ds.images.data().data() + indices[i] * stride, stride * sizeof(double));
    }
    return out;
}

} // namespace

Dataset subset(const Dataset& ds, double fraction, std::uint64_t seed, bool stratified) {
    if (fraction <= 0.0 || fraction > 1.0)
        throw ConfigError("subset: fraction must lie in (0, 1], got " + std::to_string(fraction));
    Rng rng(seed);

    std::vector<std::size_t> picked;
    if (stratified) {
        std::vector<std::vector<std::size_t>> per_class(ds.class_count);
        for (std::size_t i = 0; i < ds.size(); ++i) per_class[ds.labels[i]].push_back(i);
        for (std::size_t c = 0; c < ds.class_count; ++c) {
            const std::size_t want = std::size_t(fraction * double(per_class[c].size()));
            if (want == 0)
                throw ConfigError("subset: fraction " + std::to_string(fraction) +
                                  " yields zero samples for class " + std::to_string(c));
            Rng r = rng.fork(c);
            std::vector<std::size_t> sel = r.sample_without_replacement(per_class[c].size(), want);
            for (std::size_t s : sel) picked.push_back(per_class[c][s]);
        }
    } else {
        const std::size_t want = std::size_t(fraction * double(ds.size()));
        if (want == 0)
            throw ConfigError("subset: fraction " + std::to_string(fraction) +
                              " yields an empty subset");
        picked = rng.fork(0).sample_without_replacement(ds.size(), want);
    }
    Rng shuffle_rng = rng.fork(ds.class_count + 1);
    shuffle_rng.shuffle(picked);
    return take(ds, picked);
}

Dataset add_random_noise(const Dataset& ds, double level, std::uint64_t seed) {
    if (level < 0.0 || level > 1.0)
        throw ConfigError("noise level must lie in [0, 1], got " + std::to_string(level));
    Dataset out = ds;
    if (level == 0.0) return out;
    Rng rng(seed);
    for (double& v : out.images.data()) {
        if (rng.uniform() < level) v = rng.uniform();
    }
    return out;
}

Dataset add_pepper_noise(const Dataset& ds, double level, std::uint64_t seed, bool per_channel) {
    if (level < 0.0 || level > 1.0)
        throw ConfigError("noise level must lie in [0, 1], got " + std::to_string(level));
    Dataset out = ds;
    if (level == 0.0) return out;
    Rng rng(seed);
    const std::size_t c = ds.images.dim(1), h = ds.images.dim(2), w = ds.images.dim(3);
    const std::size_t sites = h * w;
    const std::size_t hit = std::size_t(level * double(sites));

    for (std::size_t i = 0; i < ds.size(); ++i) {
        double* img = out.images.data().data() + i * c * sites;
        if (per_channel) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                Rng r = rng.fork(i * c + ch);
                for (std::size_t p : r.sample_without_replacement(sites, hit))
                    img[ch * sites + p] = 0.0;
            }
        } else {
            Rng r = rng.fork(i);
            for (std::size_t p : r.sample_without_replacement(sites, hit))
                for (std::size_t ch = 0; ch < c; ++ch) img[ch * sites + p] = 0.0;
        }
    }
    return out;
}

} // namespace biograd

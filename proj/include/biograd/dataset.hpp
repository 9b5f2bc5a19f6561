#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "biograd/tensor.hpp"

namespace biograd {

// Images live in [0, 1]; labels index into [0, class_count).
struct Dataset {
    Tensor images; // N x C x H x W
    std::vector<std::size_t> labels;
    std::size_t class_count = 0;
    std::string split; // "train" or "test"

    std::size_t size() const { return labels.size(); }
    Shape sample_shape() const {
        return {images.dim(1), images.dim(2), images.dim(3)};
    }
    Tensor sample(std::size_t i) const;
};

enum class CifarVariant { Cifar10, Cifar100 };

// Reads the published binary batch layout: per record one label byte
// (CIFAR-10) or coarse+fine label bytes (CIFAR-100) followed by 3072
// channel-major pixel bytes, scaled by 1/255.
std::pair<Dataset, Dataset> load_cifar(const std::string& dir, CifarVariant variant);

// Deterministic 3-class 8x8 RGB set: horizontal / vertical / diagonal bars at
// random positions and colors over low-level background noise.
Dataset make_synthetic_shapes(std::size_t per_class, std::uint64_t seed,
                              const std::string& split);

// stratified: floor(fraction * N_c) per class without replacement, order
// shuffled; otherwise floor(fraction * N) over the whole set.
Dataset subset(const Dataset& ds, double fraction, std::uint64_t seed, bool stratified);

// Each pixel is independently replaced with probability `level` by a fresh
// uniform draw in [0, 1).
Dataset add_random_noise(const Dataset& ds, double level, std::uint64_t seed);

// Zeroes floor(level * H * W) spatial positions per image, sampled without
// replacement; all channels at a position by default.
Dataset add_pepper_noise(const Dataset& ds, double level, std::uint64_t seed,
                         bool per_channel = false);

} // namespace biograd

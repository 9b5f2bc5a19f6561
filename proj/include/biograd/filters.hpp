#pragma once

#include <string>
#include <vector>

#include "biograd/network.hpp"

namespace biograd {

struct PpmImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<unsigned char> rgb; // 3 bytes per pixel, row-major
};

// Tiles F kernels row-major into a ceil(sqrt(F))-column grid with 1-pixel
// black separators. Each kernel is min-max normalized to [0, 255] on its own;
// a constant kernel maps to mid gray (128).
PpmImage render_filter_grid(const Tensor& kernels);

// First-layer kernels of a checkpointed network; the first layer must be conv.
PpmImage render_first_layer(const Network& net);

void write_ppm(const PpmImage& img, const std::string& path);

} // namespace biograd

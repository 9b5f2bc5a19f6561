#include "biograd/filters.hpp"

#include <cmath>
#include <fstream>

#include "biograd/error.hpp"

namespace biograd {

PpmImage render_filter_grid(const Tensor& kernels) {
    if (kernels.rank() != 4)
        throw DimensionError("render_filter_grid: expected F x C x k x k kernels, got " +
                             shape_str(kernels.shape()));
    const std::size_t f = kernels.dim(0), c = kernels.dim(1), k = kernels.dim(2);
    const std::size_t cols = std::size_t(std::ceil(std::sqrt(double(f))));
    const std::size_t rows = (f + cols - 1) / cols;

    PpmImage img;
    img.width = cols * k + cols + 1;
    img.height = rows * k + rows + 1;
    img.rgb.assign(img.width * img.height * 3, 0); // separators and padding stay black

    for (std::size_t fi = 0; fi < f; ++fi) {
        const std::size_t tile_r = fi / cols, tile_c = fi % cols;
        const std::size_t y0 = tile_r * (k + 1) + 1;
        const std::size_t x0 = tile_c * (k + 1) + 1;

        double lo = kernels(fi, std::size_t{0}, std::size_t{0}, std::size_t{0});
        double hi = lo;
        for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t y = 0; y < k; ++y)
                for (std::size_t x = 0; x < k; ++x) {
                    const double v = kernels(fi, ci, y, x);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
        const bool flat = hi == lo;

        for (std::size_t y = 0; y < k; ++y) {
            for (std::size_t x = 0; x < k; ++x) {
                unsigned char px[3];
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    // Channel 0/1/2 maps to R/G/B; single-channel kernels
                    // replicate, extra channels are ignored.
                    const std::size_t src = c == 1 ? 0 : ch;
                    if (src >= c) {
                        px[ch] = 0;
                        continue;
                    }
                    if (flat) {
                        px[ch] = 128;
                        continue;
                    }
                    const double v = (kernels(fi, src, y, x) - lo) / (hi - lo);
                    px[ch] = static_cast<unsigned char>(std::lround(v * 255.0));
                }
                const std::size_t off = ((y0 + y) * img.width + (x0 + x)) * 3;
                img.rgb[off] = px[0];
                img.rgb[off + 1] = px[1];
                img.rgb[off + 2] = px[2];
            }
        }
    }
    return img;
}

PpmImage render_first_layer(const Network& net) {
    if (net.specs.empty() || net.specs.front().kind != LayerKind::Conv)
        throw ConfigError("no conv filters to render");
    return render_filter_grid(net.params.front().weights);
}

void write_ppm(const PpmImage& img, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("ppm: cannot open " + path + " for writing");
    os << "P6\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.rgb.data()), std::streamsize(img.rgb.size()));
    if (!os) throw IoError("ppm: write to " + path + " failed");
}

} // namespace biograd

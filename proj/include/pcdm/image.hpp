#pragma once

#include <algorithm>
#include <string>
#include <utility>

#include "pcdm/core/tensor.hpp"

namespace pcdm {

/// RGB raster with channel values in [0,1]. Pixels are stored as an
/// (height*width) x 3 tensor in row-major pixel order so image data moves
/// through the tape ops unchanged.
struct Image {
    int height = 0;
    int width = 0;
    Tensor rgb;

    Image() = default;

    Image(int h, int w) : height(h), width(w), rgb(Tensor({h * w, 3})) {
        check_dims(h, w);
    }

    Image(int h, int w, Tensor data) : height(h), width(w), rgb(std::move(data)) {
        check_dims(h, w);
        if (rgb.rows() != h * w || rgb.cols() != 3)
            throw ContractError("image data " + shape_str(rgb.shape()) + " does not match " +
                                std::to_string(h) + "x" + std::to_string(w));
        for (std::size_t i = 0; i < rgb.numel(); ++i) {
            const double v = rgb[i];
            if (!(v >= -1e-9 && v <= 1.0 + 1e-9))
                throw DomainError("image value " + std::to_string(v) + " outside [0,1]");
            rgb[i] = std::clamp(v, 0.0, 1.0);
        }
    }

    int pixel_index(int y, int x) const { return y * width + x; }

    double at(int y, int x, int c) const { return rgb.at(pixel_index(y, x), c); }
    double& at(int y, int x, int c) { return rgb.at(pixel_index(y, x), c); }

    int pixels() const { return height * width; }

private:
    static void check_dims(int h, int w) {
        if (h < 1 || w < 1)
            throw ContractError("image dims must be positive, got " + std::to_string(h) +
                                "x" + std::to_string(w));
    }
};

/// Box-average downsample by an integer factor; dimensions must divide evenly.
inline Image downsample(const Image& img, int factor) {
    if (factor < 1 || img.height % factor != 0 || img.width % factor != 0)
        throw ContractError("downsample factor " + std::to_string(factor) +
                            " does not divide " + std::to_string(img.height) + "x" +
                            std::to_string(img.width));
    Image out(img.height / factor, img.width / factor);
    const double inv = 1.0 / (factor * factor);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int dy = 0; dy < factor; ++dy)
                    for (int dx = 0; dx < factor; ++dx)
                        acc += img.at(y * factor + dy, x * factor + dx, c);
                out.at(y, x, c) = acc * inv;
            }
    return out;
}

}  // namespace pcdm

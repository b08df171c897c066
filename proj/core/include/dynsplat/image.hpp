#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dynsplat {

// Dense row-major [y][x][c] image, double precision.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {}

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double* pixel(int y, int x) {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
    }
    const double* pixel(int y, int x) const {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
    }
    std::size_t size() const { return data.size(); }
};

// 8-bit binary pixmap (P6). Values clamped to [0,1] and rounded on write.
void write_ppm(const Image& img, const std::string& path);
Image read_ppm(const std::string& path);

// Raw float32 tensor file ("NPGT" magic): shape header + little-endian data.
// Used for latent images and anywhere a lossless-ish dump of a tensor is needed.
void write_tensor_file(const std::string& path, const std::vector<std::uint32_t>& dims,
                       const std::vector<double>& values);
void read_tensor_file(const std::string& path, std::vector<std::uint32_t>& dims,
                      std::vector<double>& values);

// 10*log10(1 / MSE) over all channels, dynamic range 1.
double psnr(const Image& a, const Image& b);

} // namespace dynsplat

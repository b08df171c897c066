#include "dynsplat/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>

#include "dynsplat/errors.hpp"
#include "dynsplat/io_util.hpp"

namespace dynsplat {

namespace {
std::uint8_t to_byte(double v) {
    const double s = std::clamp(v, 0.0, 1.0) * 255.0;
    return static_cast<std::uint8_t>(std::lround(s));
}

// Skips whitespace and '#' comments between PPM header tokens.
int next_pnm_int(std::istream& is) {
    int c = is.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n')
                c = is.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = is.get();
    }
    if (c == EOF)
        throw DataError("truncated PPM header");
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = is.get();
    }
    return value;
}
} // namespace

void write_ppm(const Image& img, const std::string& path) {
    if (img.channels != 3)
        throw DataError("write_ppm expects a 3-channel image, got " + std::to_string(img.channels));
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw DataError("cannot open for writing: " + path);
    os << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        const double* src = img.pixel(y, 0);
        for (int i = 0; i < img.width * 3; ++i)
            row[static_cast<std::size_t>(i)] = to_byte(src[i]);
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!os)
        throw DataError("write failed: " + path);
}

Image read_ppm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw DataError("cannot open: " + path);
    char m0 = 0, m1 = 0;
    is.get(m0);
    is.get(m1);
    if (m0 != 'P' || m1 != '6')
        throw DataError("not a P6 pixmap: " + path);
    const int w = next_pnm_int(is);
    const int h = next_pnm_int(is);
    const int maxval = next_pnm_int(is);
    if (maxval != 255)
        throw DataError("unsupported PPM maxval " + std::to_string(maxval) + ": " + path);
    Image img(h, w, 3);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * 3);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!is)
        throw DataError("truncated PPM payload: " + path);
    for (std::size_t i = 0; i < buf.size(); ++i)
        img.data[i] = static_cast<double>(buf[i]) / 255.0;
    return img;
}

void write_tensor_file(const std::string& path, const std::vector<std::uint32_t>& dims,
                       const std::vector<double>& values) {
    std::size_t total = 1;
    for (auto d : dims)
        total *= d;
    if (total != values.size())
        throw DataError("tensor dims do not match value count");
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw DataError("cannot open for writing: " + path);
    os.write("NPGT", 4);
    write_u32(os, 1u);
    write_u32(os, static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims)
        write_u32(os, d);
    write_f32_array(os, values);
    if (!os)
        throw DataError("write failed: " + path);
}

void read_tensor_file(const std::string& path, std::vector<std::uint32_t>& dims,
                      std::vector<double>& values) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw DataError("cannot open: " + path);
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "NPGT")
        throw DataError("bad tensor magic: " + path);
    const std::uint32_t version = read_u32(is);
    if (version != 1)
        throw DataError("unsupported tensor version " + std::to_string(version) + ": " + path);
    const std::uint32_t ndims = read_u32(is);
    dims.resize(ndims);
    std::size_t total = 1;
    for (std::uint32_t i = 0; i < ndims; ++i) {
        dims[i] = read_u32(is);
        total *= dims[i];
    }
    read_f32_array(is, values, total);
}

double psnr(const Image& a, const Image& b) {
    if (a.height != b.height || a.width != b.width || a.channels != b.channels)
        throw DataError("psnr: image dimensions differ");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse <= 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

} // namespace dynsplat

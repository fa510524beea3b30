#include "gazelab/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gazelab/common.hpp"

namespace gazelab {

void write_pgm(const std::string& path, const GrayImage& img) {
    if (img.pixels.size() != img.width * img.height)
        throw format_error("write_pgm: pixel count does not match dimensions");
    if (img.width == 0 || img.height == 0) throw format_error("write_pgm: empty image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error("write_pgm: cannot open " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw format_error("write_pgm: write failed for " + path);
}

GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("read_pgm: cannot open " + path);
    std::string magic;
    std::size_t w = 0, h = 0;
    int maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5" || maxval != 255 || w == 0 || h == 0)
        throw format_error("read_pgm: bad header in " + path);
    in.get();  // single whitespace after maxval
    GrayImage img{w, h, std::vector<unsigned char>(w * h)};
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.pixels.size())
        throw format_error("read_pgm: truncated data in " + path);
    return img;
}

GrayImage to_gray(const std::vector<double>& values, std::size_t width, std::size_t height) {
    if (values.size() != width * height)
        throw format_error("to_gray: value count does not match dimensions");
    GrayImage img{width, height, std::vector<unsigned char>(values.size())};
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v = std::clamp(values[i], 0.0, 255.0);
        img.pixels[i] = static_cast<unsigned char>(std::floor(v + 0.5));
    }
    return img;
}

GrayImage normalize_to_gray(const std::vector<double>& values, std::size_t width,
                            std::size_t height) {
    if (values.size() != width * height)
        throw format_error("normalize_to_gray: value count does not match dimensions");
    auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    double lo = *lo_it, hi = *hi_it;
    std::vector<double> scaled(values.size(), 0.0);
    if (hi > lo)
        for (std::size_t i = 0; i < values.size(); ++i)
            scaled[i] = 255.0 * (values[i] - lo) / (hi - lo);
    return to_gray(scaled, width, height);
}

GrayImage upscale(const GrayImage& img, std::size_t factor) {
    if (factor == 0) throw format_error("upscale: factor must be >= 1");
    if (factor == 1) return img;
    GrayImage out{img.width * factor, img.height * factor, {}};
    out.pixels.resize(out.width * out.height);
    for (std::size_t y = 0; y < out.height; ++y)
        for (std::size_t x = 0; x < out.width; ++x)
            out.pixels[y * out.width + x] = img.pixels[(y / factor) * img.width + x / factor];
    return out;
}

}  // namespace gazelab

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace gazelab {

// 8-bit grayscale image, row-major.
struct GrayImage {
    std::size_t width = 0, height = 0;
    std::vector<unsigned char> pixels;
};

// Binary PGM (P5). Throws format_error on I/O failure or size mismatch.
void write_pgm(const std::string& path, const GrayImage& img);
GrayImage read_pgm(const std::string& path);

// Quantize values already in [0,255] (clamped, round half up).
GrayImage to_gray(const std::vector<double>& values, std::size_t width, std::size_t height);

// Min-max normalize arbitrary values to [0,255]; a constant field maps to 0.
GrayImage normalize_to_gray(const std::vector<double>& values, std::size_t width,
                            std::size_t height);

// Nearest-neighbor upscale, integer factor >= 1.
GrayImage upscale(const GrayImage& img, std::size_t factor);

}  // namespace gazelab

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "disordernet/tensor.hpp"

namespace dnet {

// 8-bit RGB image, row-major, interleaved channels.
struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // height * width * 3

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h, std::uint8_t fill = 0) : width(w), height(h), pixels(w * h * 3, fill) {}

    std::uint8_t* at(std::size_t x, std::size_t y) { return pixels.data() + (y * width + x) * 3; }
    const std::uint8_t* at(std::size_t x, std::size_t y) const { return pixels.data() + (y * width + x) * 3; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

// Only 8-bit RGB PNGs are accepted; alpha, grayscale, palette and 16-bit
// images are rejected with LoadError.
RgbImage decode_png(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_png(const RgbImage& image);

RgbImage read_png(const std::filesystem::path& path);
void write_png(const RgbImage& image, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

// Exact sub-image; throws ParamError when the region leaves the image.
RgbImage crop(const RgbImage& image, std::size_t x, std::size_t y, std::size_t width, std::size_t height);

// (H, W, 3) tensor with channel_value / 255.
Tensor to_tensor(const RgbImage& image);
// Writes the normalized (H, W, 3) region at (x, y) into `out` starting at `offset`.
void copy_normalized(const RgbImage& image, std::size_t x, std::size_t y, std::size_t width, std::size_t height,
                     double* out);
// Inverse of to_tensor: round(v * 255), clamped to [0, 255].
RgbImage from_tensor(const Tensor& t);

}  // namespace dnet

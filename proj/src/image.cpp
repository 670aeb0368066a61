#include "disordernet/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "disordernet/error.hpp"

namespace dnet {

namespace {

struct ReadCursor {
    const std::vector<std::uint8_t>* bytes;
    std::size_t offset;
};

void read_callback(png_structp png, png_bytep out, png_size_t length) {
    auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cursor->bytes->size() - cursor->offset < length) png_error(png, "unexpected end of PNG data");
    std::memcpy(out, cursor->bytes->data() + cursor->offset, length);
    cursor->offset += length;
}

void write_callback(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void flush_callback(png_structp) {}

// libpng reports errors through longjmp; route them into a message instead
// of its default stderr output.
void error_callback(png_structp png, png_const_charp message) {
    auto* buffer = static_cast<std::string*>(png_get_error_ptr(png));
    if (buffer) *buffer = message;
    png_longjmp(png, 1);
}

void warning_callback(png_structp, png_const_charp) {}

}  // namespace

RgbImage decode_png(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw LoadError("not a PNG file");

    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, error_callback, warning_callback);
    if (!png) throw LoadError("cannot allocate PNG decoder");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw LoadError("cannot allocate PNG decoder");
    }

    ReadCursor cursor{&bytes, 0};
    RgbImage image;
    std::string reject;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw LoadError("PNG decode failed: " + message);
    }
    png_set_read_fn(png, &cursor, read_callback);
    png_read_info(png, info);

    const auto width = png_get_image_width(png, info);
    const auto height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (color_type != PNG_COLOR_TYPE_RGB) {
        reject = color_type == PNG_COLOR_TYPE_RGB_ALPHA ? "alpha channel not supported" : "only RGB PNGs supported";
    } else if (bit_depth != 8) {
        reject = "only 8-bit PNGs supported";
    } else if (png_get_valid(png, info, PNG_INFO_tRNS)) {
        reject = "transparency not supported";
    }
    if (reject.empty()) {
        png_set_interlace_handling(png);
        png_read_update_info(png, info);
        image = RgbImage(width, height);
        rows.resize(height);
        for (std::size_t y = 0; y < height; ++y) rows[y] = image.at(0, y);
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (!reject.empty()) throw LoadError("unsupported PNG: " + reject);
    return image;
}

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
    if (image.width == 0 || image.height == 0 || image.pixels.size() != image.width * image.height * 3) {
        throw ParamError("cannot encode an empty or inconsistent image");
    }
    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, error_callback, warning_callback);
    if (!png) throw IoError("cannot allocate PNG encoder");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("cannot allocate PNG encoder");
    }
    std::vector<std::uint8_t> out;
    std::vector<png_bytep> rows(image.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed: " + message);
    }
    png_set_write_fn(png, &out, write_callback, flush_callback);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < image.height; ++y) rows[y] = const_cast<png_bytep>(image.at(0, y));
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

RgbImage read_png(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return decode_png(bytes);
    } catch (const LoadError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

void write_png(const RgbImage& image, const std::filesystem::path& path) { write_file(path, encode_png(image)); }

RgbImage crop(const RgbImage& image, std::size_t x, std::size_t y, std::size_t width, std::size_t height) {
    if (x > image.width || y > image.height || width > image.width - x || height > image.height - y) {
        throw ParamError("crop (" + std::to_string(x) + ", " + std::to_string(y) + ", " + std::to_string(width) +
                         "x" + std::to_string(height) + ") exceeds image bounds " + std::to_string(image.width) +
                         "x" + std::to_string(image.height));
    }
    RgbImage out(width, height);
    for (std::size_t r = 0; r < height; ++r) {
        std::memcpy(out.at(0, r), image.at(x, y + r), width * 3);
    }
    return out;
}

void copy_normalized(const RgbImage& image, std::size_t x, std::size_t y, std::size_t width, std::size_t height,
                     double* out) {
    for (std::size_t r = 0; r < height; ++r) {
        const std::uint8_t* src = image.at(x, y + r);
        for (std::size_t k = 0; k < width * 3; ++k) *out++ = static_cast<double>(src[k]) / 255.0;
    }
}

Tensor to_tensor(const RgbImage& image) {
    Tensor t(Shape{image.height, image.width, 3});
    copy_normalized(image, 0, 0, image.width, image.height, t.data().data());
    return t;
}

RgbImage from_tensor(const Tensor& t) {
    if (t.shape().rank() != 3 || t.shape()[2] != 3) {
        throw ShapeError("from_tensor expects (H, W, 3), got " + t.shape().str());
    }
    RgbImage image(t.shape()[1], t.shape()[0]);
    for (std::size_t i = 0; i < t.size(); ++i) {
        image.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(t[i] * 255.0), 0L, 255L));
    }
    return image;
}

}  // namespace dnet

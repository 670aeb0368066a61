#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "disordernet/image.hpp"
#include "disordernet/network.hpp"

namespace dnet {

struct Roi {
    std::size_t x = 0, y = 0;
    std::size_t width = 0, height = 0;

    friend bool operator==(const Roi&, const Roi&) = default;
};

// Whole image as a region.
Roi full_roi(const RgbImage& image);
// Throws ParamError when smaller than 50x50 or not fully inside the image.
void check_roi(const Roi& roi, std::size_t image_width, std::size_t image_height);

enum class Merge { none, union_boxes };

std::string_view merge_name(Merge m);
std::optional<Merge> parse_merge(std::string_view token);

struct ScanConfig {
    std::size_t stride = 25;
    double threshold = 0.5;
    Merge merge = Merge::none;
    std::size_t border = 2;
    std::array<std::uint8_t, 3> color{255, 0, 0};

    // 1 <= stride <= 50, threshold in (0, 1), border >= 1.
    void validate() const;
};

struct WindowOrigin {
    std::size_t x = 0, y = 0;
    friend bool operator==(const WindowOrigin&, const WindowOrigin&) = default;
};

struct Detection {
    std::size_t x = 0, y = 0;  // window origin in image coordinates
    double score = 0.0;
    friend bool operator==(const Detection&, const Detection&) = default;
};

struct Box {
    std::size_t x = 0, y = 0, width = 0, height = 0;
    friend bool operator==(const Box&, const Box&) = default;
};

struct ScanResult {
    Roi roi;
    std::size_t stride = 0;
    double threshold = 0.0;
    std::size_t windows_scanned = 0;
    std::vector<Detection> detections;  // row-major window order
    RgbImage marked;
};

// Regular grid at `stride` plus a flush-right column and flush-bottom row
// when the grid stops short of the edge. Row-major order, no duplicates.
std::vector<WindowOrigin> windows(const Roi& roi, std::size_t stride);
std::size_t window_count(const Roi& roi, std::size_t stride);

// Maps an (N, 50, 50, 3) batch to N scores.
using Scorer = std::function<std::vector<double>(const Tensor&)>;

ScanResult scan(const RgbImage& image, const Roi& roi, const Scorer& scorer, const ScanConfig& cfg = {});
ScanResult scan(const RgbImage& image, const Roi& roi, const Network& net, const ScanConfig& cfg = {});

// none: one box per detection. union_boxes: detections whose windows overlap
// with positive area are grouped transitively; one bounding box per group.
std::vector<Box> detection_boxes(const std::vector<Detection>& detections, Merge merge);

// Outlines each box with a `border`-pixel frame drawn inside the box; every
// other pixel is left untouched.
RgbImage mark(const RgbImage& image, const std::vector<Detection>& detections, Merge merge,
              std::size_t border = 2, std::array<std::uint8_t, 3> color = {255, 0, 0});

// Sidecar: {windows_scanned, roi, stride, threshold, detections: [{x, y, score}]}.
nlohmann::json sidecar_json(const ScanResult& result);
void write_sidecar(const ScanResult& result, const std::filesystem::path& path);

struct Sidecar {
    Roi roi;
    std::size_t stride = 0;
    double threshold = 0.0;
    std::size_t windows_scanned = 0;
    std::vector<Detection> detections;
};
Sidecar read_sidecar(const std::filesystem::path& path);

}  // namespace dnet

#include "disordernet/scanner.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "disordernet/error.hpp"

namespace dnet {

namespace {

constexpr std::size_t kScanBatch = 64;

std::vector<std::size_t> axis_origins(std::size_t start, std::size_t length, std::size_t stride) {
    std::vector<std::size_t> out;
    for (std::size_t off = 0; off + kPatchSize <= length; off += stride) out.push_back(start + off);
    if (out.back() + kPatchSize < start + length) out.push_back(start + length - kPatchSize);
    return out;
}

bool overlaps(const Box& a, const Box& b) {
    return a.x < b.x + b.width && b.x < a.x + a.width && a.y < b.y + b.height && b.y < a.y + a.height;
}

Box bounding(const Box& a, const Box& b) {
    const std::size_t x0 = std::min(a.x, b.x), y0 = std::min(a.y, b.y);
    const std::size_t x1 = std::max(a.x + a.width, b.x + b.width), y1 = std::max(a.y + a.height, b.y + b.height);
    return Box{x0, y0, x1 - x0, y1 - y0};
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
}

void draw_frame(RgbImage& img, const Box& box, std::size_t border, const std::array<std::uint8_t, 3>& color) {
    const std::size_t x1 = std::min(img.width, box.x + box.width);
    const std::size_t y1 = std::min(img.height, box.y + box.height);
    for (std::size_t y = box.y; y < y1; ++y) {
        const bool edge_row = y < box.y + border || y + border >= box.y + box.height;
        for (std::size_t x = box.x; x < x1; ++x) {
            if (!edge_row && x >= box.x + border && x + border < box.x + box.width) continue;
            std::copy(color.begin(), color.end(), img.at(x, y));
        }
    }
}

}  // namespace

Roi full_roi(const RgbImage& image) { return Roi{0, 0, image.width, image.height}; }

void check_roi(const Roi& roi, std::size_t image_width, std::size_t image_height) {
    if (roi.width < kPatchSize || roi.height < kPatchSize) {
        throw ParamError("ROI " + std::to_string(roi.width) + "x" + std::to_string(roi.height) +
                         " is smaller than the 50x50 window");
    }
    if (roi.x + roi.width > image_width || roi.y + roi.height > image_height) {
        throw ParamError("ROI at (" + std::to_string(roi.x) + ", " + std::to_string(roi.y) + ") size " +
                         std::to_string(roi.width) + "x" + std::to_string(roi.height) + " leaves the " +
                         std::to_string(image_width) + "x" + std::to_string(image_height) + " image");
    }
}

std::string_view merge_name(Merge m) { return m == Merge::union_boxes ? "union" : "none"; }

std::optional<Merge> parse_merge(std::string_view token) {
    if (token == "none") return Merge::none;
    if (token == "union") return Merge::union_boxes;
    return std::nullopt;
}

void ScanConfig::validate() const {
    if (stride < 1 || stride > kPatchSize) throw ParamError("stride must be in [1, 50], got " + std::to_string(stride));
    if (!(threshold > 0.0 && threshold < 1.0)) throw ParamError("threshold must be in (0, 1)");
    if (border < 1) throw ParamError("border width must be >= 1");
}

std::vector<WindowOrigin> windows(const Roi& roi, std::size_t stride) {
    if (roi.width < kPatchSize || roi.height < kPatchSize) {
        throw ParamError("ROI " + std::to_string(roi.width) + "x" + std::to_string(roi.height) +
                         " is smaller than the 50x50 window");
    }
    if (stride == 0) throw ParamError("stride must be positive");
    const auto xs = axis_origins(roi.x, roi.width, stride);
    const auto ys = axis_origins(roi.y, roi.height, stride);
    std::vector<WindowOrigin> out;
    out.reserve(xs.size() * ys.size());
    for (auto y : ys)
        for (auto x : xs) out.push_back({x, y});
    return out;
}

std::size_t window_count(const Roi& roi, std::size_t stride) {
    const auto per_axis = [&](std::size_t len) {
        const std::size_t regular = (len - kPatchSize) / stride + 1;
        return regular + ((len - kPatchSize) % stride != 0 ? 1 : 0);
    };
    return per_axis(roi.width) * per_axis(roi.height);
}

ScanResult scan(const RgbImage& image, const Roi& roi, const Scorer& scorer, const ScanConfig& cfg) {
    cfg.validate();
    check_roi(roi, image.width, image.height);
    const auto origins = windows(roi, cfg.stride);
    constexpr std::size_t per_window = kPatchSize * kPatchSize * kPatchChannels;

    ScanResult result;
    result.roi = roi;
    result.stride = cfg.stride;
    result.threshold = cfg.threshold;
    result.windows_scanned = origins.size();
    for (std::size_t start = 0; start < origins.size(); start += kScanBatch) {
        const std::size_t n = std::min(kScanBatch, origins.size() - start);
        Tensor batch(Shape{n, kPatchSize, kPatchSize, kPatchChannels});
        for (std::size_t i = 0; i < n; ++i) {
            const auto& o = origins[start + i];
            copy_normalized(image, o.x, o.y, kPatchSize, kPatchSize, batch.data().data() + i * per_window);
        }
        const auto scores = scorer(batch);
        if (scores.size() != n) throw ShapeError("scorer returned " + std::to_string(scores.size()) + " scores for " +
                                                 std::to_string(n) + " windows");
        for (std::size_t i = 0; i < n; ++i) {
            if (scores[i] >= cfg.threshold) result.detections.push_back({origins[start + i].x, origins[start + i].y, scores[i]});
        }
    }
    result.marked = mark(image, result.detections, cfg.merge, cfg.border, cfg.color);
    return result;
}

ScanResult scan(const RgbImage& image, const Roi& roi, const Network& net, const ScanConfig& cfg) {
    if (net.spec().input != Shape{kPatchSize, kPatchSize, kPatchChannels}) {
        throw ShapeError("scan needs a network taking 50x50x3 input, got " + net.spec().input.str());
    }
    const Scorer scorer = [&net](const Tensor& batch) { return net.predict_scores(batch).values(); };
    return scan(image, roi, scorer, cfg);
}

std::vector<Box> detection_boxes(const std::vector<Detection>& detections, Merge merge) {
    std::vector<Box> boxes;
    boxes.reserve(detections.size());
    for (const auto& d : detections) boxes.push_back({d.x, d.y, kPatchSize, kPatchSize});
    if (merge == Merge::none || boxes.size() < 2) return boxes;

    std::vector<std::size_t> parent(boxes.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    for (std::size_t i = 0; i < boxes.size(); ++i)
        for (std::size_t j = i + 1; j < boxes.size(); ++j)
            if (overlaps(boxes[i], boxes[j])) parent[find_root(parent, j)] = find_root(parent, i);

    // Groups come out in order of their first member.
    std::vector<Box> merged;
    std::vector<std::size_t> slot(boxes.size(), static_cast<std::size_t>(-1));
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const std::size_t r = find_root(parent, i);
        if (slot[r] == static_cast<std::size_t>(-1)) {
            slot[r] = merged.size();
            merged.push_back(boxes[i]);
        } else {
            merged[slot[r]] = bounding(merged[slot[r]], boxes[i]);
        }
    }
    return merged;
}

RgbImage mark(const RgbImage& image, const std::vector<Detection>& detections, Merge merge, std::size_t border,
              std::array<std::uint8_t, 3> color) {
    RgbImage out = image;
    for (const auto& box : detection_boxes(detections, merge)) draw_frame(out, box, border, color);
    return out;
}

nlohmann::json sidecar_json(const ScanResult& result) {
    nlohmann::json dets = nlohmann::json::array();
    for (const auto& d : result.detections) dets.push_back({{"x", d.x}, {"y", d.y}, {"score", d.score}});
    return {
        {"windows_scanned", result.windows_scanned},
        {"roi", {{"x", result.roi.x}, {"y", result.roi.y}, {"width", result.roi.width}, {"height", result.roi.height}}},
        {"stride", result.stride},
        {"threshold", result.threshold},
        {"detections", dets},
    };
}

void write_sidecar(const ScanResult& result, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << sidecar_json(result).dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

Sidecar read_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        Sidecar s;
        s.windows_scanned = j.at("windows_scanned").get<std::size_t>();
        const auto& r = j.at("roi");
        s.roi = Roi{r.at("x").get<std::size_t>(), r.at("y").get<std::size_t>(), r.at("width").get<std::size_t>(),
                    r.at("height").get<std::size_t>()};
        s.stride = j.at("stride").get<std::size_t>();
        s.threshold = j.at("threshold").get<double>();
        for (const auto& d : j.at("detections")) {
            s.detections.push_back({d.at("x").get<std::size_t>(), d.at("y").get<std::size_t>(), d.at("score").get<double>()});
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

}  // namespace dnet

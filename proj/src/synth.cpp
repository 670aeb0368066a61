#include "disordernet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "disordernet/error.hpp"

namespace dnet::synth {

namespace {

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L)); }

double smoothstep(double edge0, double edge1, double x) {
    const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

}  // namespace

RgbImage render_skin(std::size_t width, std::size_t height, Rng& rng) {
    return render_skin_window(width, height, SkinWindow{0, 0, width, height}, rng);
}

RgbImage render_skin_window(std::size_t width, std::size_t height, const SkinWindow& window, Rng& rng) {
    if (window.x + window.width > width || window.y + window.height > height) {
        throw ParamError("skin window leaves the canvas");
    }
    const double r = rng.uniform(0.72, 0.92);
    const double g = r * rng.uniform(0.70, 0.82);
    const double b = r * rng.uniform(0.56, 0.70);
    // Gentle lighting gradient plus one long-wavelength undulation.
    const double gx = rng.uniform(-6e-4, 6e-4);
    const double gy = rng.uniform(-6e-4, 6e-4);
    const double wave_amp = rng.uniform(0.0, 0.03);
    const double wave_len = rng.uniform(60.0, 200.0);
    const double wave_dir = rng.uniform(0.0, std::numbers::pi);
    const double wave_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double noise = 0.012;

    const double cx = static_cast<double>(width) / 2.0;
    const double cy = static_cast<double>(height) / 2.0;
    RgbImage image(window.width, window.height);
    for (std::size_t y = 0; y < window.height; ++y) {
        for (std::size_t x = 0; x < window.width; ++x) {
            const double dx = static_cast<double>(window.x + x) - cx;
            const double dy = static_cast<double>(window.y + y) - cy;
            const double along = dx * std::cos(wave_dir) + dy * std::sin(wave_dir);
            const double shade =
                1.0 + gx * dx + gy * dy + wave_amp * std::sin(2.0 * std::numbers::pi * along / wave_len + wave_phase);
            std::uint8_t* px = image.at(x, y);
            px[0] = quantize(r * shade + noise * rng.normal());
            px[1] = quantize(g * shade + noise * rng.normal());
            px[2] = quantize(b * shade + noise * rng.normal());
        }
    }
    return image;
}

void plant_blob(RgbImage& image, const Blob& blob) {
    // Per-channel darkening: green drops most, red least, giving a reddish cast.
    constexpr double kChannelWeight[3] = {0.55, 1.0, 0.85};
    const double c = std::cos(blob.angle), s = std::sin(blob.angle);
    const double reach = std::max(blob.rx, blob.ry) + 1.0;
    const auto x0 = static_cast<std::size_t>(std::max(0.0, std::floor(blob.cx - reach)));
    const auto y0 = static_cast<std::size_t>(std::max(0.0, std::floor(blob.cy - reach)));
    const auto x1 = std::min(image.width, static_cast<std::size_t>(std::max(0.0, std::ceil(blob.cx + reach))));
    const auto y1 = std::min(image.height, static_cast<std::size_t>(std::max(0.0, std::ceil(blob.cy + reach))));
    for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) {
            const double dx = static_cast<double>(x) + 0.5 - blob.cx;
            const double dy = static_cast<double>(y) + 0.5 - blob.cy;
            const double u = (dx * c + dy * s) / blob.rx;
            const double v = (-dx * s + dy * c) / blob.ry;
            const double d = std::sqrt(u * u + v * v);
            const double weight = 1.0 - smoothstep(0.6, 1.0, d);
            if (weight <= 0.0) continue;
            std::uint8_t* px = image.at(x, y);
            for (int ch = 0; ch < 3; ++ch) {
                const double value = static_cast<double>(px[ch]) / 255.0;
                px[ch] = quantize(value * (1.0 - blob.contrast * kChannelWeight[ch] * weight));
            }
        }
    }
}

Blob random_blob(std::size_t width, std::size_t height, Rng& rng) {
    Blob blob;
    blob.rx = rng.uniform(kMinRadius, kMaxRadius);
    blob.ry = std::clamp(blob.rx * rng.uniform(0.6, 1.4), kMinRadius, kMaxRadius);
    blob.angle = rng.uniform(0.0, std::numbers::pi);
    blob.contrast = rng.uniform(kMinContrast, kMaxContrast);
    const double reach = std::max(blob.rx, blob.ry);
    blob.cx = rng.uniform(reach, static_cast<double>(width) - reach);
    blob.cy = rng.uniform(reach, static_cast<double>(height) - reach);
    return blob;
}

PatchDataset synth_patches(std::size_t n, double lesion_fraction, std::uint64_t seed) {
    if (n < 2) throw ParamError("synth_patches needs n >= 2");
    if (!(lesion_fraction >= 0.0 && lesion_fraction <= 1.0)) throw ParamError("lesion fraction must be in [0, 1]");
    const auto lesions = static_cast<std::size_t>(std::llround(static_cast<double>(n) * lesion_fraction));
    std::vector<Label> labels(n, Label::healthy);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(lesions), Label::lesion);
    Rng order_rng(derive_seed(seed, 0));
    order_rng.shuffle(labels.begin(), labels.end());

    PatchDataset ds;
    ds.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, i + 1));
        // A window of a face-sized canvas, so patches carry the same lighting
        // offsets as windows taken from a full image.
        const SkinWindow window{static_cast<std::size_t>(rng.below(kPatchCanvas - kPatchSize + 1)),
                                static_cast<std::size_t>(rng.below(kPatchCanvas - kPatchSize + 1)), kPatchSize,
                                kPatchSize};
        RgbImage patch = render_skin_window(kPatchCanvas, kPatchCanvas, window, rng);
        if (labels[i] == Label::lesion) plant_blob(patch, random_blob(kPatchSize, kPatchSize, rng));
        char id[32];
        std::snprintf(id, sizeof id, "synth_%06zu", i);
        ds.samples.push_back(PatchSample{to_tensor(patch), labels[i], id});
    }
    return ds;
}

SynthFace synth_face(std::size_t width, std::size_t height, std::size_t lesion_count, std::uint64_t seed,
                     double margin) {
    if (width < kPatchSize || height < kPatchSize) throw ParamError("synthetic face must be at least 50x50");
    Rng rng(seed);
    SynthFace face{render_skin(width, height, rng), {}};
    for (std::size_t i = 0; i < lesion_count; ++i) {
        Blob blob = random_blob(width, height, rng);
        const double reach = std::max(blob.rx, blob.ry) + margin;
        blob.cx = rng.uniform(reach, static_cast<double>(width) - reach);
        blob.cy = rng.uniform(reach, static_cast<double>(height) - reach);
        plant_blob(face.image, blob);
        face.lesions.push_back(blob);
    }
    return face;
}

}  // namespace dnet::synth

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "disordernet/dataset.hpp"
#include "disordernet/image.hpp"
#include "disordernet/rng.hpp"

// Synthetic skin imagery standing in for clinical photographs. Healthy skin is
// a smooth skin-tone field with low-amplitude noise; a lesion is the same field
// with a darker, reddish elliptical blob.
namespace dnet::synth {

struct Blob {
    double cx = 0.0, cy = 0.0;  // center, pixels
    double rx = 0.0, ry = 0.0;  // semi-axes, pixels
    double angle = 0.0;         // radians
    // Relative drop of the most affected (green) channel at the blob core.
    double contrast = 0.0;
};

inline constexpr double kMinRadius = 5.0;
inline constexpr double kMaxRadius = 15.0;
inline constexpr double kMinContrast = 0.3;
inline constexpr double kMaxContrast = 0.6;

// Side of the skin canvas that training patches are cut from.
inline constexpr std::size_t kPatchCanvas = 320;

struct SkinWindow {
    std::size_t x = 0, y = 0, width = 0, height = 0;
};

// Skin field of the given size, quantized to 8 bits.
RgbImage render_skin(std::size_t width, std::size_t height, Rng& rng);
// Only the given window of a width x height field; the lighting matches the
// same region of the full render for the same generator state.
RgbImage render_skin_window(std::size_t width, std::size_t height, const SkinWindow& window, Rng& rng);
void plant_blob(RgbImage& image, const Blob& blob);
Blob random_blob(std::size_t width, std::size_t height, Rng& rng);

// `n` patches, round(n * lesion_fraction) of them lesions, interleaved in a
// seeded random order. Deterministic per seed; source ids are "synth_NNNNNN".
PatchDataset synth_patches(std::size_t n, double lesion_fraction, std::uint64_t seed);

struct SynthFace {
    RgbImage image;
    std::vector<Blob> lesions;
};

// Larger skin canvas with `lesion_count` planted blobs, each kept at least
// `margin` pixels from the border.
SynthFace synth_face(std::size_t width, std::size_t height, std::size_t lesion_count, std::uint64_t seed,
                     double margin = 30.0);

}  // namespace dnet::synth

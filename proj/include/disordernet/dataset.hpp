#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "disordernet/image.hpp"
#include "disordernet/network.hpp"
#include "disordernet/tensor.hpp"

namespace dnet {

std::string_view label_name(Label label);
std::optional<Label> parse_label(std::string_view token);

struct PatchSample {
    Tensor pixels;  // (50, 50, 3), values in [0, 1]
    Label label = Label::healthy;
    std::string source_id;
};

struct PatchDataset {
    std::vector<PatchSample> samples;
    std::filesystem::path manifest;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    std::size_t count(Label label) const;
};

// One manifest row: `relative_path,label[,annotator[,timestamp]]`. Paths are
// relative to the manifest's directory. An optional header row starting with
// `path,` is skipped.
struct ManifestRow {
    std::string path;
    Label label = Label::healthy;
    std::string annotator;
    std::string timestamp;
};

std::vector<ManifestRow> read_manifest(const std::filesystem::path& manifest);
std::string format_manifest_row(const ManifestRow& row);
inline constexpr std::string_view kManifestHeader = "path,label,annotator,timestamp";

// Decodes every referenced PNG in manifest order; normalization is v / 255.
// Errors name the manifest row (1-based line number) and the file.
PatchDataset load_dataset(const std::filesystem::path& manifest);

// Writes `<dir>/<source_id>.png` per sample plus `<dir>/manifest.csv`;
// returns the manifest path. Pixels are stored as round(v * 255).
std::filesystem::path write_dataset(const PatchDataset& ds, const std::filesystem::path& dir);

struct SplitSpec {
    double train = 0.70;
    double val = 0.20;
    double test = 0.10;
    std::uint64_t seed = 0;
};

struct SplitResult {
    PatchDataset train;
    PatchDataset val;
    PatchDataset test;
};

// Per-label index partition: val and test sizes are the rounded fractions of
// each class, train takes the remainder. Indices ascend within each part.
struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

SplitIndices split_indices(const std::vector<Label>& labels, const SplitSpec& spec);
SplitResult split(const PatchDataset& ds, const SplitSpec& spec);

struct FoldAssignment {
    std::size_t k = 0;
    std::vector<std::size_t> fold;  // per sample, in [0, k)

    std::vector<std::size_t> members(std::size_t f) const;
    std::vector<std::size_t> sizes() const;
};

// Stratified: each class is shuffled, the classes are concatenated and
// position i goes to fold i mod k, so the first (n mod k) folds hold one
// extra sample.
FoldAssignment kfold_labels(const std::vector<Label>& labels, std::size_t k, std::uint64_t seed);
FoldAssignment kfold(const PatchDataset& ds, std::size_t k, std::uint64_t seed);

std::vector<Label> labels_of(const PatchDataset& ds);
PatchDataset subset(const PatchDataset& ds, const std::vector<std::size_t>& indices);

}  // namespace dnet

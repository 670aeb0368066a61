#include "disordernet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "disordernet/error.hpp"
#include "disordernet/rng.hpp"

namespace dnet {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                                               : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return fields;
}

}  // namespace

std::string_view label_name(Label label) { return label == Label::lesion ? "lesion" : "healthy"; }

std::optional<Label> parse_label(std::string_view token) {
    if (token == "lesion") return Label::lesion;
    if (token == "healthy") return Label::healthy;
    return std::nullopt;
}

std::size_t PatchDataset::count(Label label) const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [&](const PatchSample& s) { return s.label == label; }));
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw LoadError("cannot open manifest " + manifest.string());
    std::vector<ManifestRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv(line);
        if (line_no == 1 && fields[0] == "path") continue;
        const auto where = [&] { return manifest.string() + " line " + std::to_string(line_no); };
        if (fields.size() < 2) throw LoadError(where() + ": expected `path,label`, got \"" + trim(line) + "\"");
        if (fields[0].empty()) throw LoadError(where() + ": empty path");
        const auto label = parse_label(fields[1]);
        if (!label) {
            throw LoadError(where() + " (" + fields[0] + "): bad label \"" + fields[1] +
                            "\", expected healthy or lesion");
        }
        ManifestRow row{fields[0], *label, fields.size() > 2 ? fields[2] : "", fields.size() > 3 ? fields[3] : ""};
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_manifest_row(const ManifestRow& row) {
    std::string out = row.path + "," + std::string(label_name(row.label));
    if (!row.annotator.empty() || !row.timestamp.empty()) out += "," + row.annotator + "," + row.timestamp;
    return out;
}

PatchDataset load_dataset(const std::filesystem::path& manifest) {
    const auto rows = read_manifest(manifest);
    const auto base = manifest.parent_path();
    PatchDataset ds;
    ds.manifest = manifest;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        const auto file = base / row.path;
        const auto where = [&] { return manifest.string() + " row " + std::to_string(i + 1) + " (" + row.path + ")"; };
        RgbImage image;
        try {
            image = decode_png(read_file(file));
        } catch (const Error& e) {
            throw LoadError(where() + ": " + e.what());
        }
        if (image.width != kPatchSize || image.height != kPatchSize) {
            throw LoadError(where() + ": patch is " + std::to_string(image.width) + "x" +
                            std::to_string(image.height) + ", expected 50x50");
        }
        std::string id = std::filesystem::path(row.path).stem().string();
        if (!seen.insert(id).second) throw LoadError(where() + ": duplicate source id " + id);
        ds.samples.push_back(PatchSample{to_tensor(image), row.label, std::move(id)});
    }
    return ds;
}

std::filesystem::path write_dataset(const PatchDataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto manifest = dir / "manifest.csv";
    std::ofstream out(manifest, std::ios::trunc);
    if (!out) throw IoError("cannot open " + manifest.string() + " for writing");
    out << "path,label\n";
    for (const auto& s : ds.samples) {
        const std::string name = s.source_id + ".png";
        write_png(from_tensor(s.pixels), dir / name);
        out << name << ',' << label_name(s.label) << '\n';
    }
    if (!out) throw IoError("failed writing " + manifest.string());
    return manifest;
}

std::vector<Label> labels_of(const PatchDataset& ds) {
    std::vector<Label> labels;
    labels.reserve(ds.size());
    for (const auto& s : ds.samples) labels.push_back(s.label);
    return labels;
}

PatchDataset subset(const PatchDataset& ds, const std::vector<std::size_t>& indices) {
    PatchDataset out;
    out.manifest = ds.manifest;
    out.samples.reserve(indices.size());
    for (auto i : indices) out.samples.push_back(ds.samples.at(i));
    return out;
}

SplitIndices split_indices(const std::vector<Label>& labels, const SplitSpec& spec) {
    if (!(spec.train > 0 && spec.val > 0 && spec.test > 0) ||
        std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
        throw ConfigError("split fractions must be positive and sum to 1");
    }
    if (labels.size() < 10) {
        throw ConfigError("split needs at least 10 samples, got " + std::to_string(labels.size()));
    }
    Rng rng(spec.seed);
    SplitIndices out;
    for (Label cls : {Label::healthy, Label::lesion}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) members.push_back(i);
        rng.shuffle(members.begin(), members.end());
        const double n = static_cast<double>(members.size());
        const auto n_val = static_cast<std::size_t>(std::llround(n * spec.val));
        const auto n_test = static_cast<std::size_t>(std::llround(n * spec.test));
        const std::size_t n_train = members.size() - std::min(members.size(), n_val + n_test);
        auto it = members.begin();
        out.train.insert(out.train.end(), it, it + static_cast<std::ptrdiff_t>(n_train));
        it += static_cast<std::ptrdiff_t>(n_train);
        const auto val_end = it + static_cast<std::ptrdiff_t>(std::min<std::size_t>(n_val, members.end() - it));
        out.val.insert(out.val.end(), it, val_end);
        out.test.insert(out.test.end(), val_end, members.end());
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

SplitResult split(const PatchDataset& ds, const SplitSpec& spec) {
    const auto idx = split_indices(labels_of(ds), spec);
    return SplitResult{subset(ds, idx.train), subset(ds, idx.val), subset(ds, idx.test)};
}

std::vector<std::size_t> FoldAssignment::members(std::size_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
        if (fold[i] == f) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldAssignment::sizes() const {
    std::vector<std::size_t> out(k, 0);
    for (auto f : fold) ++out[f];
    return out;
}

FoldAssignment kfold_labels(const std::vector<Label>& labels, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("k must be at least 2, got " + std::to_string(k));
    if (k > labels.size()) {
        throw ConfigError("k = " + std::to_string(k) + " exceeds dataset size " + std::to_string(labels.size()));
    }
    Rng rng(seed);
    std::vector<std::size_t> order;
    for (Label cls : {Label::healthy, Label::lesion}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) members.push_back(i);
        rng.shuffle(members.begin(), members.end());
        order.insert(order.end(), members.begin(), members.end());
    }
    FoldAssignment out{k, std::vector<std::size_t>(labels.size())};
    for (std::size_t pos = 0; pos < order.size(); ++pos) out.fold[order[pos]] = pos % k;
    return out;
}

FoldAssignment kfold(const PatchDataset& ds, std::size_t k, std::uint64_t seed) {
    return kfold_labels(labels_of(ds), k, seed);
}

}  // namespace dnet

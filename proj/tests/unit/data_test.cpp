#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "disordernet/dataset.hpp"
#include "disordernet/error.hpp"
#include "disordernet/image.hpp"
#include "disordernet/synth.hpp"
#include "tempdir.hpp"

using namespace dnet;
using dnet::testing::TempDir;

namespace {

RgbImage gradient_image(std::size_t w, std::size_t h) {
    RgbImage img(w, h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            auto* px = img.at(x, y);
            px[0] = static_cast<std::uint8_t>((x * 7 + y) % 256);
            px[1] = static_cast<std::uint8_t>((y * 13) % 256);
            px[2] = static_cast<std::uint8_t>((x + y * 3) % 256);
        }
    return img;
}

std::vector<Label> balanced_labels(std::size_t per_class) {
    std::vector<Label> labels;
    for (std::size_t i = 0; i < per_class; ++i) {
        labels.push_back(Label::healthy);
        labels.push_back(Label::lesion);
    }
    return labels;
}

double mean_green(const Tensor& t) {
    double s = 0.0;
    for (std::size_t i = 1; i < t.size(); i += 3) s += t[i];
    return s / static_cast<double>(t.size() / 3);
}

}  // namespace

TEST(Image, PngRoundTripIsExact) {
    const RgbImage img = gradient_image(37, 23);
    const RgbImage back = decode_png(encode_png(img));
    EXPECT_EQ(back, img);
}

TEST(Image, DecodeRejectsGarbage) {
    EXPECT_THROW(decode_png({1, 2, 3, 4, 5}), LoadError);
    EXPECT_THROW(decode_png({}), LoadError);
}

TEST(Image, NormalizationRoundTripsEveryByte) {
    RgbImage img(256, 1);
    for (std::size_t x = 0; x < 256; ++x) {
        auto* px = img.at(x, 0);
        px[0] = px[1] = px[2] = static_cast<std::uint8_t>(x);
    }
    const Tensor t = to_tensor(img);
    EXPECT_EQ(t.shape(), (Shape{1, 256, 3}));
    EXPECT_DOUBLE_EQ(t[3 * 255], 1.0);
    EXPECT_DOUBLE_EQ(t[3 * 128], 128.0 / 255.0);
    EXPECT_EQ(from_tensor(t), img);
}

TEST(Image, CropCopiesExactRegion) {
    const RgbImage img = gradient_image(80, 60);
    const RgbImage c = crop(img, 10, 5, 50, 50);
    ASSERT_EQ(c.width, 50u);
    for (std::size_t y = 0; y < 50; ++y)
        for (std::size_t x = 0; x < 50; ++x)
            for (int ch = 0; ch < 3; ++ch) ASSERT_EQ(c.at(x, y)[ch], img.at(x + 10, y + 5)[ch]);
    EXPECT_THROW(crop(img, 31, 0, 50, 50), ParamError);
    EXPECT_THROW(crop(img, 0, 11, 50, 50), ParamError);
}

TEST(Manifest, ParsesRowsAndSkipsHeader) {
    TempDir dir;
    std::ofstream(dir / "m.csv") << "path,label,annotator,timestamp\n"
                                 << "a.png,healthy\n"
                                 << "\n"
                                 << "sub/b.png, lesion ,ann,2024-01-01T00:00:00Z\n";
    const auto rows = read_manifest(dir / "m.csv");
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].path, "a.png");
    EXPECT_EQ(rows[0].label, Label::healthy);
    EXPECT_EQ(rows[1].path, "sub/b.png");
    EXPECT_EQ(rows[1].label, Label::lesion);
    EXPECT_EQ(rows[1].annotator, "ann");
    EXPECT_EQ(format_manifest_row(rows[1]), "sub/b.png,lesion,ann,2024-01-01T00:00:00Z");
    EXPECT_EQ(format_manifest_row(rows[0]), "a.png,healthy");
}

TEST(Manifest, BadLabelNamesTheLine) {
    TempDir dir;
    std::ofstream(dir / "m.csv") << "a.png,healthy\nb.png,melanoma\n";
    try {
        read_manifest(dir / "m.csv");
        FAIL() << "expected LoadError";
    } catch (const LoadError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("melanoma"), std::string::npos);
    }
}

TEST(Dataset, WriteThenLoadRoundTrips) {
    TempDir dir;
    const PatchDataset ds = synth::synth_patches(12, 0.5, 3);
    const auto manifest = write_dataset(ds, dir.path());
    const PatchDataset back = load_dataset(manifest);
    ASSERT_EQ(back.size(), ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(back.samples[i].label, ds.samples[i].label);
        EXPECT_EQ(back.samples[i].source_id, ds.samples[i].source_id);
        EXPECT_EQ(back.samples[i].pixels, ds.samples[i].pixels);
    }
}

TEST(Dataset, RejectsWrongSizedPatch) {
    TempDir dir;
    write_png(gradient_image(50, 50), dir / "ok.png");
    write_png(gradient_image(49, 50), dir / "narrow.png");
    std::ofstream(dir / "manifest.csv") << "ok.png,healthy\nnarrow.png,lesion\n";
    try {
        load_dataset(dir / "manifest.csv");
        FAIL() << "expected LoadError";
    } catch (const LoadError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("narrow.png"), std::string::npos) << msg;
        EXPECT_NE(msg.find("49x50"), std::string::npos) << msg;
    }
}

TEST(Dataset, MissingFileAndDuplicatesFail) {
    TempDir dir;
    write_png(gradient_image(50, 50), dir / "a.png");
    std::ofstream(dir / "m1.csv") << "a.png,healthy\nmissing.png,lesion\n";
    EXPECT_THROW(load_dataset(dir / "m1.csv"), LoadError);
    std::ofstream(dir / "m2.csv") << "a.png,healthy\na.png,lesion\n";
    EXPECT_THROW(load_dataset(dir / "m2.csv"), LoadError);
    EXPECT_THROW(load_dataset(dir / "nope.csv"), LoadError);
}

TEST(Split, HundredSamplesGiveSeventyTwentyTen) {
    const auto labels = balanced_labels(50);
    const auto idx = split_indices(labels, SplitSpec{0.7, 0.2, 0.1, 11});
    EXPECT_EQ(idx.train.size(), 70u);
    EXPECT_EQ(idx.val.size(), 20u);
    EXPECT_EQ(idx.test.size(), 10u);
    const auto lesions = [&](const std::vector<std::size_t>& v) {
        return std::count_if(v.begin(), v.end(), [&](std::size_t i) { return labels[i] == Label::lesion; });
    };
    EXPECT_EQ(lesions(idx.train), 35);
    EXPECT_EQ(lesions(idx.val), 10);
    EXPECT_EQ(lesions(idx.test), 5);
}

TEST(Split, PartitionIsDisjointAndDeterministic) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::vector<Label> labels(37 + seed, Label::healthy);
        for (std::size_t i = 0; i < labels.size(); i += 3) labels[i] = Label::lesion;
        const auto a = split_indices(labels, SplitSpec{0.7, 0.2, 0.1, seed});
        const auto b = split_indices(labels, SplitSpec{0.7, 0.2, 0.1, seed});
        EXPECT_EQ(a.train, b.train);
        EXPECT_EQ(a.test, b.test);
        std::vector<std::size_t> all;
        for (const auto* part : {&a.train, &a.val, &a.test}) all.insert(all.end(), part->begin(), part->end());
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> expected(labels.size());
        std::iota(expected.begin(), expected.end(), std::size_t{0});
        EXPECT_EQ(all, expected);
    }
}

TEST(Split, Preconditions) {
    EXPECT_THROW(split_indices(balanced_labels(4), SplitSpec{}), ConfigError);
    EXPECT_THROW(split_indices(balanced_labels(10), SplitSpec{0.5, 0.2, 0.1, 0}), ConfigError);
    EXPECT_THROW(split_indices(balanced_labels(10), SplitSpec{0.8, 0.2, 0.0, 0}), ConfigError);
}

TEST(KFold, ElevenIntoFive) {
    std::vector<Label> labels(11, Label::healthy);
    for (std::size_t i = 0; i < 5; ++i) labels[i] = Label::lesion;
    const auto folds = kfold_labels(labels, 5, 4);
    EXPECT_EQ(folds.sizes(), (std::vector<std::size_t>{3, 2, 2, 2, 2}));
}

TEST(KFold, EverySampleInExactlyOneFoldAndStratified) {
    for (std::size_t k : {5u, 6u, 7u}) {
        const auto labels = balanced_labels(100);
        const auto folds = kfold_labels(labels, k, 99);
        std::vector<int> seen(labels.size(), 0);
        for (std::size_t f = 0; f < k; ++f) {
            const auto m = folds.members(f);
            const auto lesions = std::count_if(m.begin(), m.end(), [&](auto i) { return labels[i] == Label::lesion; });
            const auto healthy = static_cast<std::ptrdiff_t>(m.size()) - lesions;
            EXPECT_LE(std::abs(lesions - healthy), 1) << "k=" << k << " fold " << f;
            for (auto i : m) ++seen[i];
        }
        EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
        const auto sizes = folds.sizes();
        EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1u);
    }
}

TEST(KFold, Preconditions) {
    EXPECT_THROW(kfold_labels(balanced_labels(3), 1, 0), ConfigError);
    EXPECT_THROW(kfold_labels(balanced_labels(3), 7, 0), ConfigError);
}

TEST(Synth, DeterministicAndBalanced) {
    const auto a = synth::synth_patches(40, 0.5, 17);
    const auto b = synth::synth_patches(40, 0.5, 17);
    ASSERT_EQ(a.size(), 40u);
    EXPECT_EQ(a.count(Label::lesion), 20u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.samples[i].pixels, b.samples[i].pixels);
        EXPECT_EQ(a.samples[i].label, b.samples[i].label);
        EXPECT_EQ(a.samples[i].pixels.shape(), (Shape{50, 50, 3}));
    }
    const auto c = synth::synth_patches(40, 0.5, 18);
    EXPECT_NE(a.samples[0].pixels, c.samples[0].pixels);
}

TEST(Synth, LesionsAreDarkerOnAverage) {
    const auto ds = synth::synth_patches(200, 0.5, 5);
    double lesion = 0.0, healthy = 0.0;
    for (const auto& s : ds.samples) (s.label == Label::lesion ? lesion : healthy) += mean_green(s.pixels);
    EXPECT_LT(lesion / 100.0, healthy / 100.0);
}

TEST(Synth, BlobDarkensItsCore) {
    Rng rng(1);
    RgbImage img = synth::render_skin(60, 60, rng);
    const RgbImage before = img;
    synth::plant_blob(img, synth::Blob{30, 30, 8, 8, 0.0, 0.4});
    EXPECT_LT(img.at(30, 30)[1], before.at(30, 30)[1] * 0.7);
    EXPECT_EQ(img.at(2, 2)[1], before.at(2, 2)[1]);
}

TEST(Synth, SkinWindowMatchesFullRenderLighting) {
    for (std::uint64_t seed : {3u, 4u, 5u}) {
        Rng full_rng(seed), window_rng(seed);
        const RgbImage full = synth::render_skin(200, 120, full_rng);
        const synth::SkinWindow w{140, 60, 50, 50};
        const RgbImage part = synth::render_skin_window(200, 120, w, window_rng);
        ASSERT_EQ(part.width, 50u);
        for (int c = 0; c < 3; ++c) {
            // Noise draws differ, so compare region means.
            double a = 0.0, b = 0.0;
            for (std::size_t y = 0; y < 50; ++y)
                for (std::size_t x = 0; x < 50; ++x) {
                    a += full.at(w.x + x, w.y + y)[c];
                    b += part.at(x, y)[c];
                }
            EXPECT_NEAR(a / 2500.0, b / 2500.0, 0.5) << "seed " << seed << " channel " << c;
        }
    }
    Rng rng(1);
    EXPECT_THROW(synth::render_skin_window(100, 100, synth::SkinWindow{60, 0, 50, 50}, rng), ParamError);
}

TEST(Synth, FaceKeepsLesionsInside) {
    const auto face = synth::synth_face(300, 240, 3, 8);
    EXPECT_EQ(face.image.width, 300u);
    ASSERT_EQ(face.lesions.size(), 3u);
    for (const auto& b : face.lesions) {
        EXPECT_GE(b.cx - std::max(b.rx, b.ry), 0.0);
        EXPECT_LE(b.cx + std::max(b.rx, b.ry), 300.0);
        EXPECT_LE(b.cy + std::max(b.rx, b.ry), 240.0);
    }
}

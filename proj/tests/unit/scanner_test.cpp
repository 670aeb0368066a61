#include <gtest/gtest.h>

#include <set>

#include "disordernet/error.hpp"
#include "disordernet/rng.hpp"
#include "disordernet/scanner.hpp"
#include "disordernet/synth.hpp"
#include "tempdir.hpp"

using namespace dnet;
using dnet::testing::TempDir;

namespace {

Scorer constant(double p) {
    return [p](const Tensor& batch) { return std::vector<double>(batch.shape()[0], p); };
}

RgbImage plain(std::size_t w, std::size_t h) { return RgbImage(w, h, 180); }

std::size_t changed_pixels(const RgbImage& a, const RgbImage& b) {
    std::size_t n = 0;
    for (std::size_t y = 0; y < a.height; ++y)
        for (std::size_t x = 0; x < a.width; ++x)
            n += !std::equal(a.at(x, y), a.at(x, y) + 3, b.at(x, y));
    return n;
}

// Exhaustive enumeration for comparison with windows().
std::size_t brute_force_count(const Roi& roi, std::size_t stride) {
    std::set<std::size_t> xs, ys;
    for (std::size_t x = roi.x; x + 50 <= roi.x + roi.width; x += stride) xs.insert(x);
    xs.insert(roi.x + roi.width - 50);
    for (std::size_t y = roi.y; y + 50 <= roi.y + roi.height; y += stride) ys.insert(y);
    ys.insert(roi.y + roi.height - 50);
    return xs.size() * ys.size();
}

}  // namespace

TEST(Windows, GridSizes) {
    EXPECT_EQ(windows(Roi{0, 0, 200, 200}, 25).size(), 49u);
    EXPECT_EQ(windows(Roi{3, 4, 50, 50}, 25).size(), 1u);
    EXPECT_EQ(windows(Roi{3, 4, 50, 50}, 25)[0], (WindowOrigin{3, 4}));
    EXPECT_THROW(windows(Roi{0, 0, 49, 80}, 25), ParamError);
}

TEST(Windows, FlushEdgeColumn) {
    const auto w = windows(Roi{10, 0, 110, 50}, 25);
    ASSERT_EQ(w.size(), 4u);
    EXPECT_EQ(w[0].x, 10u);
    EXPECT_EQ(w[2].x, 60u);
    EXPECT_EQ(w[3].x, 70u);  // flush with the right edge at 120
}

TEST(Windows, CoverageAndCountForRandomRois) {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const Roi roi{rng.below(40), rng.below(40), 50 + rng.below(200), 50 + rng.below(200)};
        const std::size_t stride = 1 + rng.below(50);
        const auto w = windows(roi, stride);
        EXPECT_EQ(w.size(), brute_force_count(roi, stride));
        EXPECT_EQ(w.size(), window_count(roi, stride));
        std::vector<int> covered(roi.width * roi.height, 0);
        for (const auto& o : w) {
            ASSERT_GE(o.x, roi.x);
            ASSERT_LE(o.x + 50, roi.x + roi.width);
            ASSERT_LE(o.y + 50, roi.y + roi.height);
            for (std::size_t y = 0; y < 50; ++y)
                for (std::size_t x = 0; x < 50; ++x) covered[(o.y - roi.y + y) * roi.width + (o.x - roi.x + x)] = 1;
        }
        EXPECT_TRUE(std::all_of(covered.begin(), covered.end(), [](int c) { return c == 1; })) << "trial " << trial;
    }
}

TEST(Mark, ZeroDetectionsIsIdentity) {
    const auto img = synth::synth_face(120, 90, 1, 3).image;
    EXPECT_EQ(mark(img, {}, Merge::none), img);
    EXPECT_EQ(mark(img, {}, Merge::union_boxes), img);
}

TEST(Mark, SingleBorderPixelCount) {
    const auto img = plain(100, 100);
    const auto out = mark(img, {{10, 10, 0.9}}, Merge::none);
    EXPECT_EQ(changed_pixels(img, out), 2u * (2 * 50 + 2 * 50) - 16u);
    EXPECT_EQ(out.at(10, 10)[0], 255);
    EXPECT_EQ(out.at(10, 10)[1], 0);
    EXPECT_EQ(out.at(59, 59)[2], 0);
    EXPECT_EQ(out.at(12, 12)[0], 180);
    EXPECT_EQ(out.at(60, 60)[0], 180);
}

TEST(Mark, UnionMergesOverlappingWindows) {
    const std::vector<Detection> dets{{0, 0, 0.9}, {25, 0, 0.8}};
    const auto boxes = detection_boxes(dets, Merge::union_boxes);
    ASSERT_EQ(boxes.size(), 1u);
    EXPECT_EQ(boxes[0], (Box{0, 0, 75, 50}));
    EXPECT_EQ(detection_boxes(dets, Merge::none).size(), 2u);
    // Touching edges do not overlap.
    EXPECT_EQ(detection_boxes({{0, 0, 0.9}, {50, 0, 0.9}}, Merge::union_boxes).size(), 2u);
    // Transitive chain.
    const auto chain = detection_boxes({{0, 0, 0.9}, {100, 0, 0.9}, {40, 30, 0.9}, {80, 10, 0.9}}, Merge::union_boxes);
    ASSERT_EQ(chain.size(), 1u);
    EXPECT_EQ(chain[0], (Box{0, 0, 150, 80}));
}

TEST(Mark, Idempotent) {
    const auto img = plain(150, 120);
    const std::vector<Detection> dets{{0, 0, 0.9}, {25, 25, 0.7}, {100, 70, 0.6}};
    for (Merge m : {Merge::none, Merge::union_boxes}) {
        const auto once = mark(img, dets, m);
        EXPECT_EQ(mark(once, dets, m), once);
    }
}

TEST(Scan, StubNetworks) {
    const auto img = synth::synth_face(200, 200, 1, 4).image;
    const Roi roi{0, 0, 200, 200};
    const auto all = scan(img, roi, constant(0.9));
    EXPECT_EQ(all.windows_scanned, 49u);
    EXPECT_EQ(all.detections.size(), 49u);
    const auto none = scan(img, roi, constant(0.1));
    EXPECT_TRUE(none.detections.empty());
    EXPECT_EQ(none.marked, img);
}

TEST(Scan, ThresholdSweep) {
    const auto img = plain(130, 100);
    const double eps = 1e-9;
    for (double p : {0.05, 0.3, 0.5, 0.77, 0.95}) {
        ScanConfig lo;
        lo.threshold = eps;
        EXPECT_EQ(scan(img, full_roi(img), constant(p), lo).detections.size(), window_count(full_roi(img), 25));
        ScanConfig hi;
        hi.threshold = 1.0 - eps;
        EXPECT_TRUE(scan(img, full_roi(img), constant(p), hi).detections.empty());
    }
}

TEST(Scan, WindowsSeeTheirOwnPixels) {
    RgbImage img = plain(100, 50);
    img.at(60, 10)[0] = 0;  // only windows covering x = 60 see this
    const Scorer scorer = [](const Tensor& batch) {
        std::vector<double> out;
        const std::size_t per = 50 * 50 * 3;
        for (std::size_t n = 0; n < batch.shape()[0]; ++n) {
            double lowest = 1.0;
            for (std::size_t i = 0; i < per; i += 3) lowest = std::min(lowest, batch[n * per + i]);
            out.push_back(lowest == 0.0 ? 0.9 : 0.1);
        }
        return out;
    };
    const auto r = scan(img, full_roi(img), scorer);
    ASSERT_EQ(r.detections.size(), 2u);
    EXPECT_EQ(r.windows_scanned, 3u);
    EXPECT_EQ(r.detections[0].x, 25u);
    EXPECT_EQ(r.detections[1].x, 50u);
}

TEST(Scan, Errors) {
    const auto img = plain(80, 80);
    EXPECT_THROW(scan(img, Roi{40, 0, 50, 50}, constant(0.5)), ParamError);
    EXPECT_THROW(scan(img, Roi{0, 0, 49, 60}, constant(0.5)), ParamError);
    ScanConfig bad;
    bad.stride = 51;
    EXPECT_THROW(scan(img, full_roi(img), constant(0.5), bad), ParamError);
    bad.stride = 0;
    EXPECT_THROW(bad.validate(), ParamError);
}

TEST(Sidecar, RoundTrip) {
    TempDir dir;
    const auto img = plain(120, 80);
    const Scorer scorer = [](const Tensor& batch) {
        std::vector<double> out;
        for (std::size_t n = 0; n < batch.shape()[0]; ++n) out.push_back(n % 2 ? 0.1 : 0.6 + 0.1 / 3.0);
        return out;
    };
    const auto r = scan(img, Roi{5, 5, 110, 70}, scorer);
    write_sidecar(r, dir / "d.json");
    const auto s = read_sidecar(dir / "d.json");
    EXPECT_EQ(s.windows_scanned, r.windows_scanned);
    EXPECT_EQ(s.detections, r.detections);
    EXPECT_EQ(s.roi, r.roi);
    EXPECT_EQ(s.stride, 25u);
}

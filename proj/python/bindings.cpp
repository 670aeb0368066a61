#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <iostream>

#include "disordernet/cli.hpp"
#include "disordernet/dataset.hpp"
#include "disordernet/error.hpp"
#include "disordernet/metrics.hpp"
#include "disordernet/network.hpp"
#include "disordernet/scanner.hpp"
#include "disordernet/synth.hpp"
#include "disordernet/training.hpp"

namespace py = pybind11;
using namespace dnet;

namespace {

using Doubles = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Bytes = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Doubles& a) {
    std::vector<std::size_t> dims(a.shape(), a.shape() + a.ndim());
    return Tensor(Shape(std::move(dims)), std::vector<double>(a.data(), a.data() + a.size()));
}

Doubles to_array(const Tensor& t) {
    Doubles out(t.shape().dims());
    std::memcpy(out.mutable_data(), t.data().data(), t.size() * sizeof(double));
    return out;
}

RgbImage to_image(const Bytes& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("image array must be (height, width, 3) uint8");
    RgbImage img(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
    std::memcpy(img.pixels.data(), a.data(), img.pixels.size());
    return img;
}

Bytes to_array(const RgbImage& img) {
    Bytes out({img.height, img.width, std::size_t{3}});
    std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size());
    return out;
}

std::vector<Scored> scored_from(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
    std::vector<Scored> out;
    for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({scores[i], labels[i] ? Label::lesion : Label::healthy});
    return out;
}

py::dict history_dict(const EpochRecord& r) {
    py::dict d;
    d["epoch"] = r.epoch;
    d["train_loss"] = r.train_loss;
    d["train_acc"] = r.train_acc;
    d["val_loss"] = r.val_loss;
    d["val_acc"] = r.val_acc;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    auto base = py::register_exception<Error>(m, "Error");
    py::register_exception<ShapeError>(m, "ShapeError", base);
    py::register_exception<ParamError>(m, "ParamError", base);
    py::register_exception<ConfigError>(m, "ConfigError", base);
    py::register_exception<DivergenceError>(m, "DivergenceError", base);
    py::register_exception<FormatError>(m, "FormatError", base);
    py::register_exception<LoadError>(m, "LoadError", base);
    py::register_exception<IoError>(m, "IoError", base);

    m.attr("PATCH_SIZE") = kPatchSize;

    py::class_<Network>(m, "Network")
        .def_property_readonly("parameter_count", &Network::parameter_count)
        .def("layer_shapes",
             [](const Network& n) {
                 std::vector<std::vector<std::size_t>> out;
                 for (const auto& s : n.spec().output_shapes()) out.push_back(s.dims());
                 return out;
             })
        .def("layer_parameter_counts", [](const Network& n) { return n.spec().parameter_counts(); })
        .def(
            "predict_scores", [](const Network& n, const Doubles& x) { return to_array(n.predict_scores(to_tensor(x))); },
            py::arg("patches"), "Lesion probabilities for a (50, 50, 3) patch or an (N, 50, 50, 3) batch.")
        .def(
            "save",
            [](const Network& n, const std::filesystem::path& path, const std::string& dtype) {
                save_model(n, path, dtype == "f32" ? WeightType::f32 : WeightType::f64);
            },
            py::arg("path"), py::arg("dtype") = "f64")
        .def("__eq__", [](const Network& a, const Network& b) { return a == b; });

    m.def("build_disordernet", &build_disordernet, py::arg("seed"), py::arg("dropout_rate") = 0.5);
    m.def("load_model", &load_model, py::arg("path"));

    py::class_<PatchDataset>(m, "PatchDataset")
        .def("__len__", &PatchDataset::size)
        .def_property_readonly("labels",
                               [](const PatchDataset& ds) {
                                   std::vector<int> out;
                                   for (const auto& s : ds.samples) out.push_back(s.label == Label::lesion ? 1 : 0);
                                   return out;
                               })
        .def_property_readonly("source_ids",
                               [](const PatchDataset& ds) {
                                   std::vector<std::string> out;
                                   for (const auto& s : ds.samples) out.push_back(s.source_id);
                                   return out;
                               })
        .def("pixels", [](const PatchDataset& ds, std::size_t i) { return to_array(ds.samples.at(i).pixels); });

    m.def("synth_patches", &synth::synth_patches, py::arg("n"), py::arg("lesion_fraction") = 0.5, py::arg("seed") = 2024);
    m.def("load_dataset", &load_dataset, py::arg("manifest"));
    m.def("write_dataset", &write_dataset, py::arg("dataset"), py::arg("dir"));
    m.def(
        "split",
        [](const PatchDataset& ds, double train, double val, double test, std::uint64_t seed) {
            auto r = split(ds, SplitSpec{train, val, test, seed});
            return py::make_tuple(std::move(r.train), std::move(r.val), std::move(r.test));
        },
        py::arg("dataset"), py::arg("train") = 0.7, py::arg("val") = 0.2, py::arg("test") = 0.1, py::arg("seed") = 0);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("momentum", &TrainConfig::momentum)
        .def_readwrite("dropout_rate", &TrainConfig::dropout_rate)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("threshold", &TrainConfig::threshold);

    m.def(
        "train",
        [](Network& net, const PatchDataset& train_set, std::optional<PatchDataset> val_set, const TrainConfig& cfg) {
            py::list out;
            const auto h = train(net, train_set, val_set.value_or(PatchDataset{}), cfg);
            for (const auto& r : h.epochs) out.append(history_dict(r));
            return out;
        },
        py::arg("net"), py::arg("train_set"), py::arg("val_set") = py::none(), py::arg("config") = TrainConfig{});
    m.def(
        "score_dataset", [](const Network& n, const PatchDataset& ds) { return score_dataset(n, ds); }, py::arg("net"),
        py::arg("dataset"));

    m.def(
        "confusion",
        [](const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
            const auto c = confusion(scored_from(scores, labels), threshold);
            return py::dict(py::arg("tp") = c.tp, py::arg("fp") = c.fp, py::arg("tn") = c.tn, py::arg("fn") = c.fn);
        },
        py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);
    m.def(
        "report",
        [](std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
            const auto r = report(ConfusionCounts{tp, fp, tn, fn});
            return py::dict(py::arg("sensitivity") = r.sensitivity, py::arg("specificity") = r.specificity,
                            py::arg("precision") = r.precision, py::arg("accuracy") = r.accuracy,
                            py::arg("recall") = r.recall, py::arg("f1") = r.f1);
        },
        py::arg("tp"), py::arg("fp"), py::arg("tn"), py::arg("fn"));
    m.def(
        "roc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
            const auto c = roc(scored_from(scores, labels));
            std::vector<double> fpr, tpr;
            for (const auto& p : c.points) {
                fpr.push_back(p.fpr);
                tpr.push_back(p.tpr);
            }
            return py::make_tuple(fpr, tpr, c.auc);
        },
        py::arg("scores"), py::arg("labels"));

    m.def("synth_face",
          [](std::size_t width, std::size_t height, std::size_t lesions, std::uint64_t seed) {
              const auto face = synth::synth_face(width, height, lesions, seed);
              py::list blobs;
              for (const auto& b : face.lesions)
                  blobs.append(py::dict(py::arg("cx") = b.cx, py::arg("cy") = b.cy, py::arg("rx") = b.rx,
                                        py::arg("ry") = b.ry, py::arg("angle") = b.angle,
                                        py::arg("contrast") = b.contrast));
              return py::make_tuple(to_array(face.image), blobs);
          },
          py::arg("width"), py::arg("height"), py::arg("lesions") = 1, py::arg("seed") = 0);
    m.def(
        "scan",
        [](const Bytes& image, const Network& net, std::optional<std::vector<std::size_t>> roi, std::size_t stride,
           double threshold, const std::string& merge) {
            const RgbImage img = to_image(image);
            Roi r = full_roi(img);
            if (roi) {
                if (roi->size() != 4) throw ParamError("roi must be (x, y, width, height)");
                r = Roi{(*roi)[0], (*roi)[1], (*roi)[2], (*roi)[3]};
            }
            ScanConfig cfg;
            cfg.stride = stride;
            cfg.threshold = threshold;
            const auto parsed = parse_merge(merge);
            if (!parsed) throw ParamError("merge must be none or union");
            cfg.merge = *parsed;
            const auto result = scan(img, r, net, cfg);
            py::list dets;
            for (const auto& d : result.detections)
                dets.append(py::dict(py::arg("x") = d.x, py::arg("y") = d.y, py::arg("score") = d.score));
            return py::make_tuple(dets, to_array(result.marked), result.windows_scanned);
        },
        py::arg("image"), py::arg("net"), py::arg("roi") = py::none(), py::arg("stride") = 25,
        py::arg("threshold") = 0.5, py::arg("merge") = "none");

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "dnet");
            py::gil_scoped_release release;
            return cli::run(args, std::cout, std::cerr);
        },
        py::arg("args"), "Runs a dnet subcommand in-process and returns its exit code.");
}

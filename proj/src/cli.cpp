#include "disordernet/cli.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "disordernet/dataset.hpp"
#include "disordernet/error.hpp"
#include "disordernet/metrics.hpp"
#include "disordernet/scanner.hpp"
#include "disordernet/service.hpp"
#include "disordernet/synth.hpp"
#include "disordernet/training.hpp"

namespace dnet::cli {

namespace fs = std::filesystem;

namespace {

struct TrainFlags {
    TrainConfig cfg;
    std::vector<double> split{0.7, 0.2, 0.1};
    std::string weights = "f64";
    bool quiet = false;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--epochs", f.cfg.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch", f.cfg.batch_size, "Mini-batch size")->capture_default_str();
    cmd->add_option("--lr", f.cfg.learning_rate, "Learning rate")->capture_default_str();
    cmd->add_option("--momentum", f.cfg.momentum, "Momentum coefficient")->capture_default_str();
    cmd->add_option("--dropout", f.cfg.dropout_rate, "Dropout rate")->capture_default_str();
    cmd->add_option("--seed", f.cfg.seed, "Seed for initialization, splitting and shuffling")->capture_default_str();
    cmd->add_option("--threshold", f.cfg.threshold, "Decision threshold")->capture_default_str();
    cmd->add_flag("--quiet", f.quiet, "Suppress per-epoch progress");
}

WeightType parse_weights(const std::string& s) {
    if (s == "f64") return WeightType::f64;
    if (s == "f32") return WeightType::f32;
    throw ConfigError("--weights must be f32 or f64");
}

std::string sibling(const fs::path& out, const std::string& suffix) {
    fs::path base = out;
    base.replace_extension();
    return base.string() + suffix;
}

EpochCallback progress(std::ostream& err, bool quiet, std::size_t epochs) {
    if (quiet) return {};
    return [&err, epochs](const EpochRecord& r) {
        err << "epoch " << r.epoch << "/" << epochs << "  loss " << r.train_loss << "  acc " << r.train_acc;
        if (r.val_loss) err << "  val_loss " << *r.val_loss << "  val_acc " << *r.val_acc;
        err << '\n';
    };
}

nlohmann::json evaluation_json(const std::vector<Scored>& scored, double threshold, RocCurve* curve_out) {
    const auto counts = confusion(scored, threshold);
    nlohmann::json j{{"threshold", threshold}, {"samples", scored.size()}, {"counts", to_json(counts)},
                     {"metrics", to_json(report(counts))}};
    bool both = std::any_of(scored.begin(), scored.end(), [](auto& s) { return s.label == Label::lesion; }) &&
                std::any_of(scored.begin(), scored.end(), [](auto& s) { return s.label == Label::healthy; });
    if (both) {
        RocCurve curve = roc(scored);
        j["auc"] = curve.auc;
        if (curve_out) *curve_out = std::move(curve);
    } else {
        j["auc"] = nullptr;
    }
    return j;
}

Roi parse_roi(const std::string& text) {
    std::vector<std::size_t> v;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        try {
            std::size_t used = 0;
            const long long n = std::stoll(part, &used);
            if (used != part.size() || n < 0) throw std::invalid_argument(part);
            v.push_back(static_cast<std::size_t>(n));
        } catch (const std::exception&) {
            throw ParamError("--roi must be x,y,width,height with non-negative integers, got \"" + text + "\"");
        }
    }
    if (v.size() != 4) throw ParamError("--roi must be x,y,width,height, got \"" + text + "\"");
    return Roi{v[0], v[1], v[2], v[3]};
}

int cmd_train(const std::string& data, const fs::path& out_model, const TrainFlags& f, std::ostream& out,
              std::ostream& err) {
    f.cfg.validate();
    if (f.split.size() != 3) throw ConfigError("--split needs three fractions");
    const WeightType dtype = parse_weights(f.weights);
    const PatchDataset ds = load_dataset(data);
    const auto parts = split(ds, SplitSpec{f.split[0], f.split[1], f.split[2], f.cfg.seed});
    err << "train " << parts.train.size() << ", validation " << parts.val.size() << ", test " << parts.test.size()
        << " patches\n";

    Network net = build_disordernet(f.cfg.seed, f.cfg.dropout_rate);
    const TrainHistory history = train(net, parts.train, parts.val, f.cfg, progress(err, f.quiet, f.cfg.epochs));

    if (out_model.has_parent_path()) fs::create_directories(out_model.parent_path());
    save_model(net, out_model, dtype);
    const std::string history_path = sibling(out_model, ".history.csv");
    export_history(history, history_path);

    RocCurve curve;
    const auto scored = zip_scores(score_dataset(net, parts.test), parts.test);
    nlohmann::json rep = evaluation_json(scored, f.cfg.threshold, &curve);
    rep["split"] = {{"train", parts.train.size()}, {"validation", parts.val.size()}, {"test", parts.test.size()}};
    rep["epochs"] = f.cfg.epochs;
    rep["seed"] = f.cfg.seed;
    const std::string report_path = sibling(out_model, ".report.json");
    write_json(rep, report_path);

    out << out_model.string() << '\n' << history_path << '\n' << report_path << '\n';
    if (!curve.points.empty()) {
        const std::string roc_path = sibling(out_model, ".roc.csv");
        export_roc(curve, roc_path);
        out << roc_path << '\n';
    }
    return kExitOk;
}

int cmd_eval(const std::string& data, const std::string& model, double threshold, std::string report_path,
             std::string roc_path, std::ostream& out) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("--threshold must be in (0, 1)");
    const Network net = load_model(model);
    const PatchDataset ds = load_dataset(data);
    if (ds.empty()) throw LoadError(data + ": manifest lists no patches");
    RocCurve curve;
    const auto j = evaluation_json(zip_scores(score_dataset(net, ds), ds), threshold, &curve);
    if (report_path.empty()) report_path = sibling(model, ".eval.json");
    write_json(j, report_path);
    out << report_path << '\n';
    if (!curve.points.empty()) {
        if (roc_path.empty()) roc_path = sibling(model, ".eval.roc.csv");
        export_roc(curve, roc_path);
        out << roc_path << '\n';
    }
    return kExitOk;
}

int cmd_crossval(const std::string& data, const std::vector<std::size_t>& ks, const fs::path& out_dir,
                 const TrainFlags& f, std::ostream& out, std::ostream& err) {
    f.cfg.validate();
    for (auto k : ks)
        if (k < 2) throw ConfigError("--k must be at least 2, got " + std::to_string(k));
    const PatchDataset ds = load_dataset(data);
    fs::create_directories(out_dir);
    for (auto k : ks) {
        const auto on_round = [&](const CrossValRound& r) {
            if (!f.quiet) err << "k=" << k << " round " << r.round << ": test fold " << r.test_fold << ", AUC " << r.auc << '\n';
            const fs::path roc_path = out_dir / ("roc_k" + std::to_string(k) + "_round" + std::to_string(r.round) + ".csv");
            export_roc(r.curve, roc_path);
            out << roc_path.string() << '\n';
        };
        const auto report = cross_validate(ds, k, f.cfg, on_round);
        const fs::path path = out_dir / ("crossval_k" + std::to_string(k) + ".json");
        auto j = to_json(report);
        j["mean_auc_2dp"] = round_half_up(report.mean_auc, 2);
        write_json(j, path);
        out << path.string() << '\n';
    }
    return kExitOk;
}

int cmd_scan(const fs::path& image_path, const std::string& model, const std::string& roi_text, const ScanConfig& cfg,
             const std::string& merge_text, fs::path out_dir, std::ostream& out) {
    ScanConfig c = cfg;
    const auto merge = parse_merge(merge_text);
    if (!merge) throw ParamError("--merge must be none or union");
    c.merge = *merge;
    c.validate();
    const RgbImage image = read_png(image_path);
    const Roi roi = roi_text.empty() ? full_roi(image) : parse_roi(roi_text);
    check_roi(roi, image.width, image.height);
    const Network net = load_model(model);
    const ScanResult result = scan(image, roi, net, c);

    if (out_dir.empty()) out_dir = image_path.has_parent_path() ? image_path.parent_path() : fs::path(".");
    fs::create_directories(out_dir);
    const std::string stem = image_path.stem().string();
    const fs::path marked = out_dir / (stem + ".marked.png");
    const fs::path sidecar = out_dir / (stem + ".detections.json");
    write_png(result.marked, marked);
    write_sidecar(result, sidecar);
    out << marked.string() << '\n' << sidecar.string() << '\n';
    return kExitOk;
}

int cmd_synth(const fs::path& out_dir, std::size_t n, double fraction, std::uint64_t seed, std::size_t faces,
              std::size_t face_w, std::size_t face_h, std::size_t lesions, std::ostream& out) {
    if (n > 0) {
        const auto ds = synth::synth_patches(n, fraction, seed);
        out << write_dataset(ds, out_dir).string() << '\n';
    }
    for (std::size_t i = 0; i < faces; ++i) {
        fs::create_directories(out_dir);
        const auto face = synth::synth_face(face_w, face_h, lesions, derive_seed(seed, 1000 + i));
        char name[32];
        std::snprintf(name, sizeof name, "face_%03zu", i);
        const fs::path png = out_dir / (std::string(name) + ".png");
        const fs::path truth = out_dir / (std::string(name) + ".lesions.json");
        write_png(face.image, png);
        nlohmann::json blobs = nlohmann::json::array();
        for (const auto& b : face.lesions) {
            blobs.push_back({{"cx", b.cx}, {"cy", b.cy}, {"rx", b.rx}, {"ry", b.ry}, {"angle", b.angle}, {"contrast", b.contrast}});
        }
        write_json({{"width", face_w}, {"height", face_h}, {"lesions", blobs}}, truth);
        out << png.string() << '\n' << truth.string() << '\n';
    }
    return kExitOk;
}

int cmd_serve(const std::string& host, int port, const std::string& images, const std::string& patches,
              const std::string& static_dir, std::ostream& out, std::ostream& err) {
    ServiceConfig cfg{images, patches, std::nullopt};
    if (!static_dir.empty()) cfg.static_dir = fs::path(static_dir);
    AnnotationService service(std::move(cfg));
    int bound = port;
    if (port == 0) {
        bound = service.bind_any_port(host);
        if (bound < 0) throw IoError("cannot bind " + host);
    }
    out << "http://" << host << ':' << bound << '\n' << std::flush;
    const bool ok = port == 0 ? service.listen_after_bind() : service.listen(host, port);
    if (!ok) {
        err << "cannot listen on " << host << ':' << port << '\n';
        return kExitData;
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Facial skin-lesion patch classifier"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "dnet 0.1.0");

    TrainFlags tf;
    std::string data, model, roc_path, report_path, roi_text, merge_text = "none", out_dir;
    fs::path out_model;

    auto* train_cmd = app.add_subcommand("train", "Split a labelled patch set 70/20/10, train and report");
    train_cmd->add_option("--data", data, "Manifest CSV")->required();
    train_cmd->add_option("--out", out_model, "Model file to write")->required();
    train_cmd->add_option("--split", tf.split, "Train, validation and test fractions")->expected(3)->delimiter(',');
    train_cmd->add_option("--weights", tf.weights, "Stored weight precision: f64 or f32")->capture_default_str();
    add_train_flags(train_cmd, tf);

    double eval_threshold = 0.5;
    auto* eval_cmd = app.add_subcommand("eval", "Score a labelled patch set with a saved model");
    eval_cmd->add_option("--data", data, "Manifest CSV")->required();
    eval_cmd->add_option("--model", model, "Model file")->required();
    eval_cmd->add_option("--threshold", eval_threshold, "Decision threshold")->capture_default_str();
    eval_cmd->add_option("--report", report_path, "Report JSON path");
    eval_cmd->add_option("--roc", roc_path, "ROC CSV path");

    std::vector<std::size_t> ks{5};
    TrainFlags cf;
    std::string cv_out = ".";
    auto* cv_cmd = app.add_subcommand("crossval", "Stratified k-fold cross-validation");
    cv_cmd->add_option("--data", data, "Manifest CSV")->required();
    cv_cmd->add_option("--k", ks, "Fold count; repeat or comma-separate for several runs")->delimiter(',');
    cv_cmd->add_option("--out-dir", cv_out, "Directory for reports and ROC curves")->capture_default_str();
    add_train_flags(cv_cmd, cf);

    ScanConfig sc;
    fs::path image_path;
    auto* scan_cmd = app.add_subcommand("scan", "Slide a 50x50 window over an image region and mark detections");
    scan_cmd->add_option("--image", image_path, "PNG image")->required();
    scan_cmd->add_option("--model", model, "Model file")->required();
    scan_cmd->add_option("--roi", roi_text, "Region x,y,width,height (default: whole image)");
    scan_cmd->add_option("--stride", sc.stride, "Window stride in pixels")->capture_default_str();
    scan_cmd->add_option("--threshold", sc.threshold, "Detection threshold")->capture_default_str();
    scan_cmd->add_option("--merge", merge_text, "none or union")->capture_default_str();
    scan_cmd->add_option("--border", sc.border, "Outline width in pixels")->capture_default_str();
    scan_cmd->add_option("--out-dir", out_dir, "Output directory (default: next to the image)");

    std::size_t synth_n = 2000, faces = 0, face_w = 400, face_h = 400, lesions = 1;
    double fraction = 0.5;
    std::uint64_t synth_seed = 2024;
    fs::path synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic patch set and face images");
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--n", synth_n, "Number of patches (0 for none)")->capture_default_str();
    synth_cmd->add_option("--lesion-fraction", fraction, "Share of lesion patches")->capture_default_str();
    synth_cmd->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
    synth_cmd->add_option("--faces", faces, "Number of face images")->capture_default_str();
    synth_cmd->add_option("--face-width", face_w, "Face image width")->capture_default_str();
    synth_cmd->add_option("--face-height", face_h, "Face image height")->capture_default_str();
    synth_cmd->add_option("--lesions", lesions, "Lesions planted per face")->capture_default_str();

    std::string host = "127.0.0.1", images, patches, static_dir;
    int port = 8080;
    auto* serve_cmd = app.add_subcommand("serve", "Run the annotation HTTP service");
    serve_cmd->add_option("--host", host, "Bind address")->capture_default_str();
    serve_cmd->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
    serve_cmd->add_option("--images", images, "Directory of source PNG images")->required();
    serve_cmd->add_option("--patches", patches, "Directory for labelled patches and manifest.csv")->required();
    serve_cmd->add_option("--static", static_dir, "Annotation UI assets served at /");

    std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << "dnet 0.1.0\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        const auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << "run with --help for usage of " << (sub == &app ? std::string("dnet") : sub->get_name()) << '\n';
        return kExitUsage;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(data, out_model, tf, out, err);
        if (eval_cmd->parsed()) return cmd_eval(data, model, eval_threshold, report_path, roc_path, out);
        if (cv_cmd->parsed()) return cmd_crossval(data, ks, cv_out, cf, out, err);
        if (scan_cmd->parsed()) return cmd_scan(image_path, model, roi_text, sc, merge_text, out_dir, out);
        if (synth_cmd->parsed()) {
            return cmd_synth(synth_out, synth_n, fraction, synth_seed, faces, face_w, face_h, lesions, out);
        }
        if (serve_cmd->parsed()) return cmd_serve(host, port, images, patches, static_dir, out, err);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParamError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DivergenceError& e) {
        err << "error: training diverged: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const Error& e) {
        // LoadError, FormatError, IoError, ShapeError: the inputs are at fault.
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitUsage;
}

}  // namespace dnet::cli

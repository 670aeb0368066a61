#include "disordernet/service.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "disordernet/dataset.hpp"
#include "disordernet/error.hpp"
#include "disordernet/image.hpp"

namespace dnet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", message}}.dump(), "application/json");
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// CSV fields must not break the row grammar.
bool is_plain_field(const std::string& s) {
    return s.find_first_of(",\r\n") == std::string::npos;
}

}  // namespace

std::string patch_file_name(const std::string& image_id, std::size_t x, std::size_t y) {
    return image_id + "_x" + std::to_string(x) + "_y" + std::to_string(y) + ".png";
}

bool is_safe_name(const std::string& name) {
    if (name.empty() || name.front() == '.') return false;
    return std::all_of(name.begin(), name.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '-' || c == '.';
    });
}

struct AnnotationService::Impl {
    ServiceConfig cfg;
    httplib::Server server;
    std::mutex manifest_mutex;

    explicit Impl(ServiceConfig c) : cfg(std::move(c)) {
        if (!fs::is_directory(cfg.image_dir)) throw IoError("image directory " + cfg.image_dir.string() + " does not exist");
        fs::create_directories(cfg.patch_dir);
        if (cfg.static_dir) {
            if (!fs::is_directory(*cfg.static_dir)) {
                throw IoError("static directory " + cfg.static_dir->string() + " does not exist");
            }
            server.set_mount_point("/", cfg.static_dir->string());
        }
        routes();
    }

    fs::path manifest() const { return cfg.patch_dir / "manifest.csv"; }

    fs::path image_path(const std::string& id) const { return cfg.image_dir / (id + ".png"); }

    void routes() {
        server.Get("/api/images", [this](const httplib::Request&, httplib::Response& res) { list_images(res); });
        server.Get(R"(/api/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            get_image(req.matches[1], res);
        });
        server.Post("/api/patches", [this](const httplib::Request& req, httplib::Response& res) { post_patch(req, res); });
        server.Get("/api/manifest", [this](const httplib::Request&, httplib::Response& res) { get_manifest(res); });
        server.Delete(R"(/api/patches/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            delete_patch(req.matches[1], res);
        });
        server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                send_error(res, 500, e.what());
            } catch (...) {
                send_error(res, 500, "unknown error");
            }
        });
    }

    void list_images(httplib::Response& res) const {
        std::vector<std::string> ids;
        for (const auto& entry : fs::directory_iterator(cfg.image_dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".png") ids.push_back(entry.path().stem().string());
        }
        std::sort(ids.begin(), ids.end());
        res.set_content(json{{"images", ids}}.dump(), "application/json");
    }

    void get_image(const std::string& id, httplib::Response& res) const {
        if (!is_safe_name(id) || !fs::is_regular_file(image_path(id))) {
            send_error(res, 404, "unknown image id \"" + id + "\"");
            return;
        }
        const auto bytes = read_file(image_path(id));
        res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    }

    void post_patch(const httplib::Request& req, httplib::Response& res) {
        json body;
        try {
            body = json::parse(req.body);
        } catch (const json::exception& e) {
            send_error(res, 400, std::string("invalid JSON: ") + e.what());
            return;
        }
        std::string id, label_text, annotator, timestamp;
        long long x = 0, y = 0;
        try {
            id = body.at("id").get<std::string>();
            x = body.at("x").get<long long>();
            y = body.at("y").get<long long>();
            label_text = body.at("label").get<std::string>();
            annotator = body.value("annotator", std::string{});
            timestamp = body.value("timestamp", std::string{});
        } catch (const json::exception& e) {
            send_error(res, 400, std::string("expected {id, x, y, label}: ") + e.what());
            return;
        }
        const auto label = parse_label(label_text);
        if (!label) {
            send_error(res, 400, "label must be healthy or lesion, got \"" + label_text + "\"");
            return;
        }
        if (!is_plain_field(annotator) || !is_plain_field(timestamp)) {
            send_error(res, 400, "annotator and timestamp must not contain commas or newlines");
            return;
        }
        if (!is_safe_name(id) || !fs::is_regular_file(image_path(id))) {
            send_error(res, 404, "unknown image id \"" + id + "\"");
            return;
        }
        RgbImage source;
        try {
            source = read_png(image_path(id));
        } catch (const Error& e) {
            send_error(res, 500, e.what());
            return;
        }
        if (x < 0 || y < 0 || static_cast<std::size_t>(x) + kPatchSize > source.width ||
            static_cast<std::size_t>(y) + kPatchSize > source.height) {
            send_error(res, 400, "50x50 crop at (" + std::to_string(x) + ", " + std::to_string(y) + ") leaves the " +
                                     std::to_string(source.width) + "x" + std::to_string(source.height) + " image");
            return;
        }
        const auto ux = static_cast<std::size_t>(x), uy = static_cast<std::size_t>(y);
        const std::string name = patch_file_name(id, ux, uy);
        const std::string rel = std::string(label_name(*label)) + "/" + name;
        if (timestamp.empty()) timestamp = utc_now();

        std::lock_guard lock(manifest_mutex);
        for (Label l : {Label::healthy, Label::lesion}) {
            if (fs::exists(cfg.patch_dir / label_name(l) / name)) {
                send_error(res, 409, "patch " + name + " already exists");
                return;
            }
        }
        fs::create_directories(cfg.patch_dir / label_name(*label));
        write_png(crop(source, ux, uy, kPatchSize, kPatchSize), cfg.patch_dir / rel);
        const bool fresh = !fs::exists(manifest());
        std::ofstream out(manifest(), std::ios::app);
        if (fresh) out << kManifestHeader << '\n';
        out << format_manifest_row(ManifestRow{rel, *label, annotator, timestamp}) << '\n';
        out.flush();
        if (!out) {
            send_error(res, 500, "failed appending to " + manifest().string());
            return;
        }
        res.status = 201;
        res.set_content(json{{"name", name}, {"path", rel}, {"label", label_name(*label)}}.dump(), "application/json");
    }

    void get_manifest(httplib::Response& res) {
        std::lock_guard lock(manifest_mutex);
        std::string text(kManifestHeader);
        text += '\n';
        if (fs::exists(manifest())) {
            std::ifstream in(manifest());
            std::stringstream ss;
            ss << in.rdbuf();
            text = ss.str();
        }
        res.set_content(text, "text/csv");
    }

    void delete_patch(const std::string& name, httplib::Response& res) {
        if (!is_safe_name(name)) {
            send_error(res, 404, "unknown patch \"" + name + "\"");
            return;
        }
        std::lock_guard lock(manifest_mutex);
        bool removed = false;
        for (Label l : {Label::healthy, Label::lesion}) removed |= fs::remove(cfg.patch_dir / label_name(l) / name);
        if (!removed) {
            send_error(res, 404, "unknown patch \"" + name + "\"");
            return;
        }
        std::size_t dropped = 0;
        if (fs::exists(manifest())) {
            std::vector<std::string> kept;
            {
                std::ifstream in(manifest());
                std::string line;
                while (std::getline(in, line)) {
                    const std::string path = line.substr(0, line.find(','));
                    if (fs::path(path).filename() == name) {
                        ++dropped;
                        continue;
                    }
                    kept.push_back(line);
                }
            }
            const fs::path tmp = manifest().string() + ".tmp";
            {
                std::ofstream out(tmp, std::ios::trunc);
                for (const auto& line : kept) out << line << '\n';
            }
            fs::rename(tmp, manifest());
        }
        res.set_content(json{{"deleted", name}, {"manifest_rows_removed", dropped}}.dump(), "application/json");
    }
};

AnnotationService::AnnotationService(ServiceConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}
AnnotationService::~AnnotationService() { stop(); }

bool AnnotationService::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }
int AnnotationService::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool AnnotationService::listen_after_bind() { return impl_->server.listen_after_bind(); }
void AnnotationService::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}
bool AnnotationService::running() const { return impl_->server.is_running(); }
void AnnotationService::wait_until_ready() const { impl_->server.wait_until_ready(); }
fs::path AnnotationService::manifest_path() const { return impl_->manifest(); }

}  // namespace dnet

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace dnet {

struct ServiceConfig {
    std::filesystem::path image_dir;   // source images, `<id>.png`
    std::filesystem::path patch_dir;   // `<label>/<id>_x<X>_y<Y>.png` plus manifest.csv
    std::optional<std::filesystem::path> static_dir;  // annotation UI assets, served at /
};

// HTTP backend for the annotation tool.
//
//   GET    /api/images          {"images": [ids]}
//   GET    /api/images/{id}     PNG bytes
//   POST   /api/patches         {"id", "x", "y", "label"[, "annotator", "timestamp"]}
//                               201 created, 400 bad request / out of bounds,
//                               404 unknown image, 409 patch already exists
//   GET    /api/manifest        manifest CSV
//   DELETE /api/patches/{name}  removes the patch file and its manifest row
class AnnotationService {
public:
    explicit AnnotationService(ServiceConfig cfg);
    ~AnnotationService();
    AnnotationService(const AnnotationService&) = delete;
    AnnotationService& operator=(const AnnotationService&) = delete;

    // Binds and serves until stop(); returns false if the port cannot be bound.
    bool listen(const std::string& host, int port);
    // Binds an ephemeral port and returns it; serve with listen_after_bind().
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();
    bool running() const;
    void wait_until_ready() const;

    std::filesystem::path manifest_path() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// `<id>_x<X>_y<Y>.png`
std::string patch_file_name(const std::string& image_id, std::size_t x, std::size_t y);
// Letters, digits, '_', '-' and '.', not starting with '.'.
bool is_safe_name(const std::string& name);

}  // namespace dnet

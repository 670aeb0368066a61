#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>

#include "disordernet/error.hpp"
#include "disordernet/network.hpp"

namespace dnet {

namespace {

constexpr char kMagic[4] = {'D', 'N', 'E', 'T'};
constexpr std::uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
    }

    void put_bytes(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }

    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    template <typename T>
    T get(const char* what) {
        require(sizeof(T), what);
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, bytes_.data() + offset_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        offset_ += sizeof(T);
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }

    void require(std::size_t n, const char* what) const {
        if (bytes_.size() - offset_ < n) {
            throw FormatError("truncated model file: needed " + std::to_string(n) + " bytes for " + what + ", " +
                                  std::to_string(bytes_.size() - offset_) + " remain",
                              offset_);
        }
    }

    std::size_t offset() const noexcept { return offset_; }
    std::size_t remaining() const noexcept { return bytes_.size() - offset_; }
    const std::uint8_t* cursor() const noexcept { return bytes_.data() + offset_; }
    void skip(std::size_t n) { offset_ += n; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t offset_ = 0;
};

void write_tensor(ByteWriter& w, const Tensor& t, WeightType dtype) {
    for (double v : t.data()) {
        if (dtype == WeightType::f32) {
            w.put(static_cast<float>(v));
        } else {
            w.put(v);
        }
    }
}

void read_tensor(ByteReader& r, Tensor& t, WeightType dtype) {
    const std::size_t width = dtype == WeightType::f32 ? 4 : 8;
    r.require(t.size() * width, "weights");
    for (auto& v : t.data()) {
        const std::size_t at = r.offset();
        v = dtype == WeightType::f32 ? static_cast<double>(r.get<float>("weight")) : r.get<double>("weight");
        if (!std::isfinite(v)) throw FormatError("non-finite weight", at);
    }
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const Network& net, WeightType dtype) {
    const auto& spec = net.spec();
    if (spec.input.rank() != 3) throw ShapeError("model format stores (H, W, C) inputs only");
    ByteWriter w;
    w.put_bytes(kMagic, 4);
    w.put<std::uint16_t>(kVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(dtype));
    w.put<std::uint8_t>(0);
    for (std::size_t i = 0; i < 3; ++i) w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.input[i]));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(spec.layers.size()));
    for (const auto& layer : spec.layers) {
        w.put<std::uint8_t>(static_cast<std::uint8_t>(layer.kind));
        w.put<std::uint8_t>(static_cast<std::uint8_t>(layer.activation));
        w.put<std::uint16_t>(0);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(layer.units));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(layer.kernel));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(layer.stride));
        w.put<double>(layer.rate);
    }
    w.put<std::uint64_t>(net.parameter_count());
    w.put<std::uint64_t>(net.seed());
    for (const auto* t : net.parameters()) write_tensor(w, *t, dtype);
    return w.take();
}

Network deserialize_model(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    r.require(4, "magic");
    if (std::memcmp(r.cursor(), kMagic, 4) != 0) {
        throw FormatError("bad magic: expected \"DNET\"", 0);
    }
    r.skip(4);
    const std::size_t version_at = r.offset();
    const auto version = r.get<std::uint16_t>("version");
    if (version != kVersion) {
        throw FormatError("unsupported model version " + std::to_string(version) + ", expected " +
                              std::to_string(kVersion),
                          version_at);
    }
    const std::size_t dtype_at = r.offset();
    const auto dtype_raw = r.get<std::uint8_t>("weight type");
    if (dtype_raw != static_cast<std::uint8_t>(WeightType::f32) &&
        dtype_raw != static_cast<std::uint8_t>(WeightType::f64)) {
        throw FormatError("unknown weight type " + std::to_string(dtype_raw), dtype_at);
    }
    const auto dtype = static_cast<WeightType>(dtype_raw);
    r.get<std::uint8_t>("reserved");

    std::vector<std::size_t> input_dims;
    for (int i = 0; i < 3; ++i) {
        const std::size_t at = r.offset();
        const auto d = r.get<std::uint32_t>("input shape");
        if (d == 0) throw FormatError("zero input dimension", at);
        input_dims.push_back(d);
    }
    const std::size_t count_at = r.offset();
    const auto layer_count = r.get<std::uint32_t>("layer count");
    constexpr std::size_t kLayerRecord = 24;
    if (layer_count == 0 || r.remaining() / kLayerRecord < layer_count) {
        throw FormatError("layer count " + std::to_string(layer_count) + " is inconsistent with file length",
                          count_at);
    }

    NetworkSpec spec{Shape(input_dims), {}};
    for (std::uint32_t i = 0; i < layer_count; ++i) {
        const std::size_t at = r.offset();
        LayerSpec layer;
        const auto kind = r.get<std::uint8_t>("layer kind");
        const auto act = r.get<std::uint8_t>("activation");
        r.get<std::uint16_t>("reserved");
        layer.units = r.get<std::uint32_t>("units");
        layer.kernel = r.get<std::uint32_t>("kernel");
        layer.stride = r.get<std::uint32_t>("stride");
        layer.rate = r.get<double>("dropout rate");
        if (kind < 1 || kind > 5) throw FormatError("unknown layer kind " + std::to_string(kind), at);
        if (act > 2) throw FormatError("unknown activation " + std::to_string(act), at + 1);
        layer.kind = static_cast<LayerKind>(kind);
        layer.activation = static_cast<Activation>(act);
        spec.layers.push_back(layer);
    }

    const std::size_t total_at = r.offset();
    const auto declared_total = r.get<std::uint64_t>("parameter count");
    const auto seed = r.get<std::uint64_t>("seed");

    std::size_t computed_total = 0;
    try {
        computed_total = spec.total_parameters();
    } catch (const Error& e) {
        throw FormatError(std::string("invalid layer table: ") + e.what(), total_at);
    }
    if (declared_total != computed_total) {
        throw FormatError("parameter count " + std::to_string(declared_total) + " does not match layer table (" +
                              std::to_string(computed_total) + ")",
                          total_at);
    }

    const std::size_t width = dtype == WeightType::f32 ? 4 : 8;
    if (r.remaining() / width < computed_total) {
        throw FormatError("truncated model file: " + std::to_string(computed_total) + " weights declared, " +
                              std::to_string(r.remaining()) + " bytes remain",
                          r.offset());
    }

    std::optional<Network> built;
    try {
        built.emplace(spec, seed);
    } catch (const Error& e) {
        throw FormatError(std::string("invalid layer table: ") + e.what(), total_at);
    }
    Network& net = *built;
    for (auto* t : net.parameters()) read_tensor(r, *t, dtype);
    if (r.remaining() != 0) {
        throw FormatError(std::to_string(r.remaining()) + " trailing bytes after weights", r.offset());
    }
    return std::move(net);
}

void save_model(const Network& net, const std::filesystem::path& path, WeightType dtype) {
    const auto bytes = serialize_model(net, dtype);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

Network load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

}  // namespace dnet

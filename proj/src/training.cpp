#include "disordernet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "disordernet/detail/text.hpp"
#include "disordernet/error.hpp"
#include "disordernet/rng.hpp"

namespace dnet {

namespace {

// Streams derived from the training seed.
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kDropoutStream = 2;

struct Totals {
    double loss = 0.0;
    std::size_t correct = 0;
    std::size_t count = 0;
};

void accumulate(Totals& t, double score, Label label, double threshold) {
    t.loss += bce_loss(score, label);
    t.correct += classify(score, threshold) == label;
    ++t.count;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0, 1)");
}

MomentumState MomentumState::zeros_like(const std::vector<Tensor*>& params) {
    MomentumState state;
    state.velocity.reserve(params.size());
    for (const auto* p : params) state.velocity.emplace_back(p->shape());
    return state;
}

double bce_loss(double score, Label label) {
    const double p = std::clamp(score, kProbabilityClamp, 1.0 - kProbabilityClamp);
    return label == Label::lesion ? -std::log(p) : -std::log(1.0 - p);
}

void sgd_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, MomentumState& state,
              double learning_rate, double momentum) {
    if (params.size() != grads.size() || params.size() != state.velocity.size()) {
        throw ShapeError("sgd_step: parameter, gradient and velocity counts differ");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k]->shape() != grads[k].shape() || params[k]->shape() != state.velocity[k].shape()) {
            throw ShapeError("sgd_step: shape mismatch at parameter " + std::to_string(k));
        }
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto w = params[k]->data();
        auto v = state.velocity[k].data();
        const auto g = grads[k].data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            v[i] = momentum * v[i] + g[i];
            w[i] -= learning_rate * v[i];
        }
    }
}

Tensor stack_batch(std::span<const PatchSample> samples, std::span<const std::size_t> indices) {
    if (indices.empty()) throw ShapeError("cannot stack an empty batch");
    const Shape& item = samples[indices[0]].pixels.shape();
    std::vector<std::size_t> dims{indices.size()};
    dims.insert(dims.end(), item.dims().begin(), item.dims().end());
    Tensor batch{Shape(dims)};
    const std::size_t per = item.elements();
    double* dst = batch.data().data();
    for (auto i : indices) {
        const auto& px = samples[i].pixels;
        if (px.shape() != item) throw ShapeError("batch samples have differing shapes");
        std::memcpy(dst, px.data().data(), per * sizeof(double));
        dst += per;
    }
    return batch;
}

std::vector<double> score_dataset(const Network& net, const PatchDataset& ds, std::size_t batch_size) {
    std::vector<double> scores;
    scores.reserve(ds.size());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < ds.size(); start += batch_size) {
        idx.clear();
        for (std::size_t i = start; i < std::min(ds.size(), start + batch_size); ++i) idx.push_back(i);
        const Tensor s = net.predict_scores(stack_batch(ds.samples, idx));
        scores.insert(scores.end(), s.data().begin(), s.data().end());
    }
    return scores;
}

TrainHistory train(Network& net, const PatchDataset& train_set, const PatchDataset& val_set, const TrainConfig& cfg,
                   const EpochCallback& on_epoch) {
    cfg.validate();
    if (train_set.empty()) throw ConfigError("training set is empty");
    if (train_set.count(Label::lesion) == 0 || train_set.count(Label::healthy) == 0) {
        throw ConfigError("training set must contain both healthy and lesion samples");
    }

    auto params = net.parameters();
    MomentumState momentum = MomentumState::zeros_like(params);
    Rng dropout_rng(derive_seed(cfg.seed, kDropoutStream));
    std::vector<std::size_t> order(train_set.size());
    TrainHistory history;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(derive_seed(cfg.seed, kShuffleStream), epoch));
        shuffle_rng.shuffle(order.begin(), order.end());

        Totals totals;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::span<const std::size_t> idx(order.data() + start,
                                                   std::min(cfg.batch_size, order.size() - start));
            auto pass = net.run(stack_batch(train_set.samples, idx), layers::Mode::train, &dropout_rng);

            Tensor logit_grad(Shape{idx.size()});
            double batch_loss = 0.0;
            for (std::size_t b = 0; b < idx.size(); ++b) {
                const auto& sample = train_set.samples[idx[b]];
                const double p = pass.scores[b];
                const double y = sample.label == Label::lesion ? 1.0 : 0.0;
                batch_loss += bce_loss(p, sample.label);
                accumulate(totals, p, sample.label, cfg.threshold);
                logit_grad[b] = (p - y) / static_cast<double>(idx.size());
            }
            if (!std::isfinite(batch_loss) || !pass.scores.all_finite()) {
                throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                          std::to_string(batch_index),
                                      epoch, batch_index);
            }
            const auto grads = net.backward(*pass.cache, logit_grad);
            for (std::size_t k = 0; k < grads.size(); ++k) {
                if (!grads[k].all_finite()) {
                    throw DivergenceError("non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                                              std::to_string(batch_index),
                                          epoch, batch_index);
                }
            }
            sgd_step(params, grads, momentum, cfg.learning_rate, cfg.momentum);
        }

        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = totals.loss / static_cast<double>(totals.count);
        record.train_acc = static_cast<double>(totals.correct) / static_cast<double>(totals.count);
        if (!val_set.empty()) {
            const auto scores = score_dataset(net, val_set);
            Totals val;
            for (std::size_t i = 0; i < scores.size(); ++i) accumulate(val, scores[i], val_set.samples[i].label, cfg.threshold);
            record.val_loss = val.loss / static_cast<double>(val.count);
            record.val_acc = static_cast<double>(val.correct) / static_cast<double>(val.count);
        }
        history.epochs.push_back(record);
        if (on_epoch) on_epoch(record);
    }
    return history;
}

void export_history(const TrainHistory& history, const std::filesystem::path& path) {
    if (history.epochs.empty()) throw ConfigError("cannot export an empty training history");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    using detail::format_real;
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (const auto& r : history.epochs) {
        out << r.epoch << ',' << format_real(r.train_loss) << ',' << format_real(r.train_acc) << ','
            << (r.val_loss ? format_real(*r.val_loss) : "") << ',' << (r.val_acc ? format_real(*r.val_acc) : "")
            << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

TrainHistory read_history(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "epoch,train_loss,train_acc,val_loss,val_acc") {
        throw LoadError(path.string() + ": missing history header");
    }
    TrainHistory h;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) f.push_back(field);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        const auto bad = [&] { return LoadError(path.string() + " line " + std::to_string(line_no) + ": malformed row"); };
        if (f.size() != 5) throw bad();
        EpochRecord r;
        const auto epoch = detail::parse_real(f[0]);
        const auto tl = detail::parse_real(f[1]);
        const auto ta = detail::parse_real(f[2]);
        if (!epoch || !tl || !ta) throw bad();
        r.epoch = static_cast<std::size_t>(*epoch);
        r.train_loss = *tl;
        r.train_acc = *ta;
        if (!f[3].empty()) {
            r.val_loss = detail::parse_real(f[3]);
            if (!r.val_loss) throw bad();
        }
        if (!f[4].empty()) {
            r.val_acc = detail::parse_real(f[4]);
            if (!r.val_acc) throw bad();
        }
        h.epochs.push_back(r);
    }
    return h;
}

}  // namespace dnet

#include "disordernet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "disordernet/detail/text.hpp"
#include "disordernet/error.hpp"
#include "disordernet/rng.hpp"

namespace dnet {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> optional_from_json(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

constexpr std::uint64_t kRoundStream = 0x5EED;

}  // namespace

ConfusionCounts confusion(std::span<const Scored> scored, double threshold) {
    if (scored.empty()) throw ConfigError("confusion needs at least one scored sample");
    ConfusionCounts c;
    for (const auto& s : scored) {
        const bool predicted = s.score >= threshold;
        if (s.label == Label::lesion) {
            predicted ? ++c.tp : ++c.fn;
        } else {
            predicted ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

MetricReport report(const ConfusionCounts& c) {
    if (c.total() == 0) throw ConfigError("metric report needs non-zero counts");
    MetricReport r;
    r.sensitivity = ratio(c.tp, c.tp + c.fn);
    r.specificity = ratio(c.tn, c.tn + c.fp);
    r.precision = ratio(c.tp, c.tp + c.fp);
    r.accuracy = ratio(c.tp + c.tn, c.total());
    r.recall = r.sensitivity;
    if (r.precision && r.recall && *r.precision + *r.recall > 0.0) {
        r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
    }
    return r;
}

RocCurve roc(std::span<const Scored> scored) {
    std::size_t positives = 0, negatives = 0;
    for (const auto& s : scored) (s.label == Label::lesion ? positives : negatives)++;
    if (positives == 0 || negatives == 0) {
        throw ConfigError("ROC needs at least one lesion and one healthy sample (AUC undefined)");
    }
    std::vector<Scored> sorted(scored.begin(), scored.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    const double P = static_cast<double>(positives), N = static_cast<double>(negatives);
    for (std::size_t i = 0; i < sorted.size();) {
        const double threshold = sorted[i].score;
        while (i < sorted.size() && sorted[i].score == threshold) {
            (sorted[i].label == Label::lesion ? tp : fp)++;
            ++i;
        }
        const RocPoint next{static_cast<double>(fp) / N, static_cast<double>(tp) / P};
        const RocPoint& prev = curve.points.back();
        curve.auc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) / 2.0;
        curve.points.push_back(next);
        curve.thresholds.push_back(threshold);
    }
    return curve;
}

std::vector<Scored> zip_scores(const std::vector<double>& scores, const PatchDataset& ds) {
    if (scores.size() != ds.size()) throw ShapeError("score count does not match dataset size");
    std::vector<Scored> out;
    out.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({scores[i], ds.samples[i].label});
    return out;
}

double round_half_up(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    // The small nudge keeps values like 0.985 (stored as 0.98499999...) rounding up.
    return std::floor(value * scale + 0.5 + 1e-9) / scale;
}

void export_roc(const RocCurve& curve, const std::filesystem::path& path) {
    if (curve.points.size() < 2) throw ConfigError("cannot export an empty ROC curve");
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    using detail::format_real;
    out << "fpr,tpr\n";
    for (const auto& p : curve.points) out << format_real(p.fpr) << ',' << format_real(p.tpr) << '\n';
    out << "# auc=" << format_real(curve.auc) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

RocCurve read_roc(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "fpr,tpr") throw LoadError(path.string() + ": missing `fpr,tpr` header");
    RocCurve curve;
    bool have_auc = false;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto bad = [&] { return LoadError(path.string() + " line " + std::to_string(line_no) + ": malformed"); };
        if (line.rfind("# auc=", 0) == 0) {
            const auto v = detail::parse_real(std::string_view(line).substr(6));
            if (!v) throw bad();
            curve.auc = *v;
            have_auc = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw bad();
        const auto fpr = detail::parse_real(std::string_view(line).substr(0, comma));
        const auto tpr = detail::parse_real(std::string_view(line).substr(comma + 1));
        if (!fpr || !tpr) throw bad();
        curve.points.push_back({*fpr, *tpr});
    }
    if (!have_auc) throw LoadError(path.string() + ": missing `# auc=` line");
    if (curve.points.size() < 2) throw LoadError(path.string() + ": curve has fewer than two points");
    return curve;
}

double mean(const std::vector<double>& values) {
    if (values.empty()) throw ConfigError("mean of an empty list");
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

std::size_t rotation_test_fold(std::size_t k, std::size_t round) { return k - 1 - (round % k); }

std::vector<std::size_t> rotation_train_folds(std::size_t k, std::size_t round) {
    const std::size_t test = rotation_test_fold(k, round);
    std::vector<std::size_t> folds;
    for (std::size_t step = 1; step < k; ++step) folds.push_back((test + step) % k);
    return folds;
}

CrossValReport cross_validate(const PatchDataset& ds, std::size_t k, const TrainConfig& cfg,
                              const RoundCallback& on_round) {
    return cross_validate(ds, k, cfg, disordernet_spec(cfg.dropout_rate), on_round);
}

CrossValReport cross_validate(const PatchDataset& ds, std::size_t k, const TrainConfig& cfg,
                              const NetworkSpec& spec, const RoundCallback& on_round) {
    cfg.validate();
    const FoldAssignment folds = kfold(ds, k, cfg.seed);
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t f = 0; f < k; ++f) {
        members[f] = folds.members(f);
        const auto sub = subset(ds, members[f]);
        if (sub.count(Label::lesion) == 0 || sub.count(Label::healthy) == 0) {
            throw ConfigError("fold " + std::to_string(f + 1) + " of " + std::to_string(k) +
                              " lacks one of the classes; try a different seed or a smaller k");
        }
    }

    CrossValReport out;
    out.k = k;
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t test_fold = rotation_test_fold(k, r);
        const auto train_folds = rotation_train_folds(k, r);
        std::vector<std::size_t> train_idx;
        for (auto f : train_folds) train_idx.insert(train_idx.end(), members[f].begin(), members[f].end());
        const PatchDataset train_set = subset(ds, train_idx);
        const PatchDataset test_set = subset(ds, members[test_fold]);

        TrainConfig round_cfg = cfg;
        round_cfg.seed = derive_seed(cfg.seed, kRoundStream + r);
        Network net(spec, derive_seed(round_cfg.seed, 0));
        train(net, train_set, PatchDataset{}, round_cfg);

        const auto scored = zip_scores(score_dataset(net, test_set), test_set);
        CrossValRound round;
        round.round = r + 1;
        round.test_fold = test_fold + 1;
        for (auto f : train_folds) round.train_folds.push_back(f + 1);
        round.curve = roc(scored);
        round.auc = round.curve.auc;
        round.counts = confusion(scored, cfg.threshold);
        out.round_aucs.push_back(round.auc);
        if (on_round) on_round(round);
        out.rounds.push_back(std::move(round));
    }
    out.mean_auc = mean(out.round_aucs);
    return out;
}

nlohmann::json to_json(const ConfusionCounts& c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

nlohmann::json to_json(const MetricReport& r) {
    return {
        {"sensitivity", optional_json(r.sensitivity)}, {"specificity", optional_json(r.specificity)},
        {"precision", optional_json(r.precision)},     {"accuracy", optional_json(r.accuracy)},
        {"recall", optional_json(r.recall)},           {"f1", optional_json(r.f1)},
    };
}

nlohmann::json to_json(const CrossValReport& r) {
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& round : r.rounds) {
        rounds.push_back({{"round", round.round},
                          {"test_fold", round.test_fold},
                          {"train_folds", round.train_folds},
                          {"auc", round.auc},
                          {"counts", to_json(round.counts)}});
    }
    return {{"k", r.k}, {"round_aucs", r.round_aucs}, {"mean_auc", r.mean_auc}, {"rounds", rounds}};
}

ConfusionCounts counts_from_json(const nlohmann::json& j) {
    return ConfusionCounts{j.at("tp").get<std::size_t>(), j.at("fp").get<std::size_t>(),
                           j.at("tn").get<std::size_t>(), j.at("fn").get<std::size_t>()};
}

MetricReport report_from_json(const nlohmann::json& j) {
    MetricReport r;
    r.sensitivity = optional_from_json(j, "sensitivity");
    r.specificity = optional_from_json(j, "specificity");
    r.precision = optional_from_json(j, "precision");
    r.accuracy = optional_from_json(j, "accuracy");
    r.recall = optional_from_json(j, "recall");
    r.f1 = optional_from_json(j, "f1");
    return r;
}

CrossValReport crossval_from_json(const nlohmann::json& j) {
    CrossValReport r;
    r.k = j.at("k").get<std::size_t>();
    r.round_aucs = j.at("round_aucs").get<std::vector<double>>();
    r.mean_auc = j.at("mean_auc").get<double>();
    if (j.contains("rounds")) {
        for (const auto& jr : j.at("rounds")) {
            CrossValRound round;
            round.round = jr.at("round").get<std::size_t>();
            round.test_fold = jr.at("test_fold").get<std::size_t>();
            round.train_folds = jr.at("train_folds").get<std::vector<std::size_t>>();
            round.auc = jr.at("auc").get<double>();
            round.counts = counts_from_json(jr.at("counts"));
            r.rounds.push_back(std::move(round));
        }
    }
    if (r.round_aucs.size() != r.k) throw LoadError("cross-validation report: round_aucs length differs from k");
    return r;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
}

}  // namespace dnet

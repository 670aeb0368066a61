#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "disordernet/dataset.hpp"
#include "disordernet/network.hpp"
#include "disordernet/training.hpp"

namespace dnet {

struct Scored {
    double score = 0.0;
    Label label = Label::healthy;
};

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Each indicator is nullopt ("undefined") when its denominator is zero.
struct MetricReport {
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::optional<double> precision;
    std::optional<double> accuracy;
    std::optional<double> recall;
    std::optional<double> f1;

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
    std::vector<RocPoint> points;  // (0,0) first, (1,1) last
    std::vector<double> thresholds;  // thresholds[i] yields points[i + 1]
    double auc = 0.0;
};

// Positive class is lesion; a sample is predicted lesion iff score >= threshold.
ConfusionCounts confusion(std::span<const Scored> scored, double threshold);
MetricReport report(const ConfusionCounts& c);

// Threshold sweep over distinct scores in descending order, one point per
// distinct score (ties form a diagonal step); AUC by the trapezoidal rule.
RocCurve roc(std::span<const Scored> scored);

std::vector<Scored> zip_scores(const std::vector<double>& scores, const PatchDataset& ds);

// Half-up rounding for display.
double round_half_up(double value, int decimals);

// CSV `fpr,tpr` rows followed by `# auc=<value>`.
void export_roc(const RocCurve& curve, const std::filesystem::path& path);
RocCurve read_roc(const std::filesystem::path& path);

struct CrossValRound {
    std::size_t round = 0;       // 1-based
    std::size_t test_fold = 0;   // 1-based
    std::vector<std::size_t> train_folds;  // 1-based, in rotation order
    double auc = 0.0;
    RocCurve curve;
    ConfusionCounts counts;
};

struct CrossValReport {
    std::size_t k = 0;
    std::vector<double> round_aucs;
    double mean_auc = 0.0;
    std::vector<CrossValRound> rounds;
};

double mean(const std::vector<double>& values);

// Fold used as the test set in `round` (both 0-based): the last fold first,
// then stepping backwards; the training folds follow cyclically after it.
std::size_t rotation_test_fold(std::size_t k, std::size_t round);
std::vector<std::size_t> rotation_train_folds(std::size_t k, std::size_t round);

using RoundCallback = std::function<void(const CrossValRound&)>;

// Trains a fresh seeded network per round on k-1 folds and scores the
// held-out fold.
CrossValReport cross_validate(const PatchDataset& ds, std::size_t k, const TrainConfig& cfg,
                              const RoundCallback& on_round = {});
CrossValReport cross_validate(const PatchDataset& ds, std::size_t k, const TrainConfig& cfg,
                              const NetworkSpec& spec, const RoundCallback& on_round = {});

nlohmann::json to_json(const ConfusionCounts& c);
nlohmann::json to_json(const MetricReport& r);
nlohmann::json to_json(const CrossValReport& r);  // keys: k, round_aucs, mean_auc (+ rounds detail)
ConfusionCounts counts_from_json(const nlohmann::json& j);
MetricReport report_from_json(const nlohmann::json& j);
CrossValReport crossval_from_json(const nlohmann::json& j);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace dnet

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "lccde/core.hpp"

namespace lccde {

// ----------------------------------------------------------------------------
// Confusion matrix and derived metrics
// ----------------------------------------------------------------------------

// counts[t][p] = number of samples with true class t predicted as p.
struct ConfusionMatrix {
    std::vector<std::vector<std::int64_t>> counts;

    std::size_t n_classes() const { return counts.size(); }

    std::int64_t total() const {
        std::int64_t t = 0;
        for (const auto& row : counts)
            for (auto v : row) t += v;
        return t;
    }
};

struct ClassMetrics {
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    std::vector<std::int64_t> support;  // row sums (true-class counts)
};

struct AggregateMetrics {
    double accuracy = 0.0;
    double weighted_precision = 0.0;
    double weighted_recall = 0.0;
    double weighted_f1 = 0.0;
    double macro_f1 = 0.0;
};

inline ConfusionMatrix confusion(std::span<const ClassId> y_true,
                                 std::span<const ClassId> y_pred,
                                 std::size_t n_classes) {
    if (y_true.size() != y_pred.size())
        throw DimensionMismatchError("confusion: y_true has " + std::to_string(y_true.size()) +
                                     " entries, y_pred has " + std::to_string(y_pred.size()));
    ConfusionMatrix cm;
    cm.counts.assign(n_classes, std::vector<std::int64_t>(n_classes, 0));
    for (std::size_t i = 0; i < y_true.size(); ++i)
        ++cm.counts[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])];
    return cm;
}

/// Per class c: precision = counts[c][c] / column sum, recall = counts[c][c] /
/// row sum, F1 = 2PR/(P+R). Zero denominators yield 0.
inline ClassMetrics per_class_metrics(const ConfusionMatrix& cm) {
    const std::size_t n = cm.n_classes();
    ClassMetrics m;
    m.precision.resize(n);
    m.recall.resize(n);
    m.f1.resize(n);
    m.support.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::int64_t col = 0, row = 0;
        for (std::size_t k = 0; k < n; ++k) {
            col += cm.counts[k][c];
            row += cm.counts[c][k];
        }
        const double tp = static_cast<double>(cm.counts[c][c]);
        const double p = col > 0 ? tp / static_cast<double>(col) : 0.0;
        const double r = row > 0 ? tp / static_cast<double>(row) : 0.0;
        m.precision[c] = p;
        m.recall[c] = r;
        m.f1[c] = (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
        m.support[c] = row;
    }
    return m;
}

inline AggregateMetrics aggregate_metrics(const ConfusionMatrix& cm) {
    const std::int64_t total = cm.total();
    if (total == 0) throw InvalidDatasetError("aggregate_metrics: empty confusion matrix");

    const ClassMetrics per = per_class_metrics(cm);
    AggregateMetrics agg;
    std::int64_t trace = 0;
    for (std::size_t c = 0; c < cm.n_classes(); ++c) trace += cm.counts[c][c];
    agg.accuracy = static_cast<double>(trace) / static_cast<double>(total);

    double macro = 0.0;
    for (std::size_t c = 0; c < cm.n_classes(); ++c) {
        const double w = static_cast<double>(per.support[c]) / static_cast<double>(total);
        agg.weighted_precision += w * per.precision[c];
        agg.weighted_recall += w * per.recall[c];
        agg.weighted_f1 += w * per.f1[c];
        macro += per.f1[c];
    }
    agg.macro_f1 = macro / static_cast<double>(cm.n_classes());
    return agg;
}

// ----------------------------------------------------------------------------
// Stratified splitting
// ----------------------------------------------------------------------------

// k test folds partitioning 0..N-1; per-class fold counts differ by at most 1,
// and so do overall fold sizes.
struct FoldPlan {
    std::vector<std::vector<int>> test_folds;
    std::vector<std::string> warnings;

    std::size_t n_folds() const { return test_folds.size(); }

    std::vector<int> train_indices(std::size_t fold, std::size_t n_rows) const {
        std::vector<char> in_test(n_rows, 0);
        for (int i : test_folds[fold]) in_test[static_cast<std::size_t>(i)] = 1;
        std::vector<int> train;
        train.reserve(n_rows - test_folds[fold].size());
        for (std::size_t i = 0; i < n_rows; ++i)
            if (!in_test[i]) train.push_back(static_cast<int>(i));
        return train;
    }
};

/// Deterministic stratified k-fold plan. Within each class the per-sample fold
/// is assigned round-robin over a seeded shuffle; the round-robin offset
/// carries across classes, which keeps overall fold sizes within +-1 as well.
inline FoldPlan stratified_kfold(std::span<const ClassId> labels, std::size_t k,
                                 std::uint64_t seed) {
    if (k < 2) throw ConfigError("stratified_kfold: k must be >= 2, got " + std::to_string(k));
    if (labels.size() < k)
        throw ConfigError("stratified_kfold: N = " + std::to_string(labels.size()) +
                          " smaller than k = " + std::to_string(k));

    ClassId max_label = 0;
    for (ClassId l : labels) max_label = std::max(max_label, l);
    const std::size_t n_classes = static_cast<std::size_t>(max_label) + 1;

    std::vector<std::vector<int>> by_class(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i));

    FoldPlan plan;
    plan.test_folds.assign(k, {});
    std::mt19937_64 rng(seed);
    std::size_t offset = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        auto& idx = by_class[c];
        if (!idx.empty() && idx.size() < k)
            plan.warnings.push_back("class " + std::to_string(c) + " has " +
                                    std::to_string(idx.size()) + " samples, fewer than " +
                                    std::to_string(k) + " folds; it will be absent from some folds");
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i = 0; i < idx.size(); ++i)
            plan.test_folds[(offset + i) % k].push_back(idx[i]);
        offset = (offset + idx.size()) % k;
    }
    for (auto& fold : plan.test_folds) std::sort(fold.begin(), fold.end());
    return plan;
}

struct HoldoutSplit {
    Dataset train;
    Dataset test;
    std::vector<std::string> warnings;
};

/// Stratified train/test split. Per class, round(test_fraction * count) rows go
/// to test, but at least one row always stays in train; a singleton class goes
/// entirely to train with a warning.
inline HoldoutSplit holdout_split(const Dataset& d, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("holdout_split: test_fraction must be in (0, 1), got " +
                          std::to_string(test_fraction));

    const std::size_t n_classes = d.n_classes();
    std::vector<std::vector<int>> by_class(n_classes);
    for (std::size_t i = 0; i < d.labels.size(); ++i)
        by_class[static_cast<std::size_t>(d.labels[i])].push_back(static_cast<int>(i));

    HoldoutSplit split;
    std::mt19937_64 rng(seed);
    std::vector<int> train_idx, test_idx;
    for (std::size_t c = 0; c < n_classes; ++c) {
        auto& idx = by_class[c];
        std::shuffle(idx.begin(), idx.end(), rng);
        std::size_t n_test = static_cast<std::size_t>(
            std::lround(test_fraction * static_cast<double>(idx.size())));
        if (!idx.empty() && n_test >= idx.size()) {
            n_test = idx.size() - 1;
            split.warnings.push_back("class \"" + d.class_names[c] +
                                     "\" too small for the requested test fraction; keeping one sample in train");
        }
        if (idx.size() == 1)
            split.warnings.push_back("class \"" + d.class_names[c] +
                                     "\" has a single sample; it goes to train");
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < n_test ? test_idx : train_idx).push_back(idx[i]);
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    split.train = subset_rows(d, train_idx);
    split.test = subset_rows(d, test_idx);
    return split;
}

}  // namespace lccde

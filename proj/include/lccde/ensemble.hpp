#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lccde/core.hpp"
#include "lccde/eval.hpp"
#include "lccde/learners.hpp"

namespace lccde {

// ----------------------------------------------------------------------------
// Leader selection
// ----------------------------------------------------------------------------

struct LeaderSelectionEvidence {
    std::array<std::vector<double>, kNumBaseModels> f1;  // [model][class], cross-validated
    std::array<double, kNumBaseModels> fit_seconds{};    // total CV training wall time
};

struct SelectionReport {
    LeaderSelectionEvidence evidence;
    std::size_t folds = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

struct LccdeModel {
    std::array<TrainedForest, kNumBaseModels> forests;
    LeaderMap leader_map;
    std::vector<std::string> class_names;
    SelectionReport selection_report;

    std::size_t n_classes() const { return class_names.size(); }
    std::size_t n_features() const { return static_cast<std::size_t>(forests[0].n_features); }
};

/// Picks the leader model per class: the unique argmax of the class's F1
/// column when unique within 1e-6; among tied maxima the model with the
/// smallest fit_seconds; among timing ties the smallest model index.
inline LeaderMap select_leaders(const LeaderSelectionEvidence& evidence) {
    const std::size_t n = evidence.f1[0].size();
    for (int j = 1; j < kNumBaseModels; ++j)
        if (evidence.f1[static_cast<std::size_t>(j)].size() != n)
            throw ConfigError("select_leaders: ragged F1 matrix");

    constexpr double kF1Tolerance = 1e-6;
    LeaderMap map;
    map.leaders.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        double best_f1 = evidence.f1[0][c];
        for (int j = 1; j < kNumBaseModels; ++j)
            best_f1 = std::max(best_f1, evidence.f1[static_cast<std::size_t>(j)][c]);

        ModelIndex leader = -1;
        for (int j = 0; j < kNumBaseModels; ++j) {
            if (evidence.f1[static_cast<std::size_t>(j)][c] < best_f1 - kF1Tolerance) continue;
            if (leader < 0 ||
                evidence.fit_seconds[static_cast<std::size_t>(j)] <
                    evidence.fit_seconds[static_cast<std::size_t>(leader)])
                leader = j;
        }
        map.leaders[c] = leader;
    }
    return map;
}

// ----------------------------------------------------------------------------
// Arbitrated prediction
// ----------------------------------------------------------------------------

enum class ArbitrationBranch {
    Unanimous,
    AllDifferentSingleMatch,
    AllDifferentConfidence,
    TwoAgree,
};

inline const char* branch_name(ArbitrationBranch b) {
    switch (b) {
        case ArbitrationBranch::Unanimous: return "unanimous";
        case ArbitrationBranch::AllDifferentSingleMatch: return "all_different_single_match";
        case ArbitrationBranch::AllDifferentConfidence: return "all_different_confidence";
        case ArbitrationBranch::TwoAgree: return "two_agree";
    }
    return "unknown";
}

struct ArbitrationTrace {
    ArbitrationBranch branch = ArbitrationBranch::Unanimous;
    std::vector<ModelIndex> matched_models;      // all-different branch only
    std::optional<ModelIndex> chosen_model;      // model that decided the class, if arbitrated
    ClassId final_class = 0;
};

/// Resolves three base predictions into the ensemble prediction:
///  - unanimous: keep the agreed class;
///  - three distinct classes: prefer the single model that is the leader of
///    its own predicted class; with zero or multiple such matches take the
///    highest confidence (over all models, resp. the matched ones);
///  - exactly two agree: the leader model of the majority class decides with
///    its own predicted class (which may differ from the majority class).
/// Confidence ties fall to the smallest model index. The returned Prediction
/// is the full prediction of the model that determined the final class (the
/// leader of the agreed class in the unanimous branch).
inline std::pair<Prediction, ArbitrationTrace> arbitrate(
    const std::array<Prediction, kNumBaseModels>& preds, const LeaderMap& leader_map) {
    const ClassId l0 = preds[0].class_id;
    const ClassId l1 = preds[1].class_id;
    const ClassId l2 = preds[2].class_id;

    ArbitrationTrace trace;
    ModelIndex source = 0;

    if (l0 == l1 && l1 == l2) {
        trace.branch = ArbitrationBranch::Unanimous;
        trace.final_class = l0;
        source = leader_map.leader_of(l0);
    } else if (l0 != l1 && l1 != l2 && l0 != l2) {
        for (ModelIndex j = 0; j < kNumBaseModels; ++j)
            if (leader_map.leader_of(preds[static_cast<std::size_t>(j)].class_id) == j)
                trace.matched_models.push_back(j);

        if (trace.matched_models.size() == 1) {
            trace.branch = ArbitrationBranch::AllDifferentSingleMatch;
            source = trace.matched_models.front();
        } else {
            trace.branch = ArbitrationBranch::AllDifferentConfidence;
            std::vector<ModelIndex> pool = trace.matched_models;
            if (pool.empty()) pool = {0, 1, 2};
            source = pool.front();
            for (ModelIndex j : pool)
                if (preds[static_cast<std::size_t>(j)].confidence >
                    preds[static_cast<std::size_t>(source)].confidence)
                    source = j;
        }
        trace.chosen_model = source;
        trace.final_class = preds[static_cast<std::size_t>(source)].class_id;
    } else {
        trace.branch = ArbitrationBranch::TwoAgree;
        const ClassId majority = (l0 == l1 || l0 == l2) ? l0 : l1;
        source = leader_map.leader_of(majority);
        trace.chosen_model = source;
        trace.final_class = preds[static_cast<std::size_t>(source)].class_id;
    }

    return {preds[static_cast<std::size_t>(source)], trace};
}

inline std::pair<Prediction, ArbitrationTrace> predict_sample(const LccdeModel& m,
                                                              std::span<const double> x) {
    std::array<Prediction, kNumBaseModels> preds = {
        predict_proba(m.forests[0], x),
        predict_proba(m.forests[1], x),
        predict_proba(m.forests[2], x),
    };
    return arbitrate(preds, m.leader_map);
}

/// Row-order-preserving batch prediction; rows may be processed in parallel
/// (each row is an independent pure function of the model).
inline std::vector<Prediction> predict_batch(const LccdeModel& m, const Matrix& rows,
                                             bool parallel = true) {
    std::vector<Prediction> out(rows.rows());
    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) out[i] = predict_sample(m, rows.row(i)).first;
    };

    const unsigned hw = std::thread::hardware_concurrency();
    if (!parallel || rows.rows() < 256 || hw < 2) {
        run(0, rows.rows());
        return out;
    }
    const std::size_t n_threads = std::min<std::size_t>(hw, 8);
    const std::size_t chunk = (rows.rows() + n_threads - 1) / n_threads;
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < n_threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(rows.rows(), begin + chunk);
        if (begin >= end) break;
        workers.emplace_back(run, begin, end);
    }
    for (auto& w : workers) w.join();
    return out;
}

inline std::vector<Prediction> predict_batch(const LccdeModel& m, const Dataset& d_test,
                                             bool parallel = true) {
    return predict_batch(m, d_test.features, parallel);
}

// ----------------------------------------------------------------------------
// Training (cross-validated leader selection + full refit)
// ----------------------------------------------------------------------------

/// Trains the three base variants with stratified k-fold cross-validation,
/// scores each model's pooled out-of-fold predictions per class, selects the
/// per-class leaders, then refits all three variants on the full training set.
inline LccdeModel train_lccde(const Dataset& d_train,
                              const std::array<BoosterConfig, kNumBaseModels>& configs,
                              std::size_t folds, std::uint64_t seed) {
    {
        const auto violations = validate_dataset(d_train);
        if (!violations.empty())
            throw InvalidDatasetError("invalid dataset: " + violations.front());
    }
    if (folds < 2) throw ConfigError("train_lccde: folds must be >= 2");

    const std::size_t n_rows = d_train.n_rows();
    const std::size_t n_classes = d_train.n_classes();
    {
        std::vector<char> seen(n_classes, 0);
        std::size_t distinct = 0;
        for (ClassId l : d_train.labels)
            if (!seen[static_cast<std::size_t>(l)]) {
                seen[static_cast<std::size_t>(l)] = 1;
                ++distinct;
            }
        if (distinct < 2)
            throw InvalidDatasetError("degenerate labels: training data contains a single class");
    }

    FoldPlan plan = stratified_kfold(d_train.labels, folds, seed);

    LccdeModel model;
    model.class_names = d_train.class_names;
    model.selection_report.folds = folds;
    model.selection_report.seed = seed;
    model.selection_report.warnings = plan.warnings;

    std::array<std::vector<ClassId>, kNumBaseModels> oof;
    for (auto& v : oof) v.assign(n_rows, -1);
    std::array<double, kNumBaseModels> cv_seconds{};

    for (std::size_t fold = 0; fold < folds; ++fold) {
        const std::vector<int> train_idx = plan.train_indices(fold, n_rows);
        const Dataset fold_train = subset_rows(d_train, train_idx);

        std::size_t distinct = 0;
        {
            std::vector<char> seen(n_classes, 0);
            for (ClassId l : fold_train.labels)
                if (!seen[static_cast<std::size_t>(l)]) {
                    seen[static_cast<std::size_t>(l)] = 1;
                    ++distinct;
                }
        }
        if (distinct < 2) {
            model.selection_report.warnings.push_back(
                "fold " + std::to_string(fold) +
                " skipped: its training split contains a single class");
            continue;
        }

        for (ModelIndex j = 0; j < kNumBaseModels; ++j) {
            const TrainedForest forest =
                fit_forest(configs[static_cast<std::size_t>(j)], variant_of_slot(j), fold_train);
            cv_seconds[static_cast<std::size_t>(j)] += forest.fit_seconds;
            for (int row : plan.test_folds[fold])
                oof[static_cast<std::size_t>(j)][static_cast<std::size_t>(row)] =
                    predict_proba(forest, d_train.features.row(static_cast<std::size_t>(row)))
                        .class_id;
        }
    }

    // Pool out-of-fold predictions into one confusion matrix per model.
    std::vector<ClassId> scored_truth;
    for (std::size_t i = 0; i < n_rows; ++i)
        if (oof[0][i] >= 0) scored_truth.push_back(d_train.labels[i]);
    if (scored_truth.empty())
        throw InvalidDatasetError("train_lccde: no out-of-fold predictions (all folds skipped)");

    for (ModelIndex j = 0; j < kNumBaseModels; ++j) {
        std::vector<ClassId> pred;
        pred.reserve(scored_truth.size());
        for (std::size_t i = 0; i < n_rows; ++i)
            if (oof[static_cast<std::size_t>(j)][i] >= 0)
                pred.push_back(oof[static_cast<std::size_t>(j)][i]);
        const ConfusionMatrix cm = confusion(scored_truth, pred, n_classes);
        model.selection_report.evidence.f1[static_cast<std::size_t>(j)] =
            per_class_metrics(cm).f1;
        model.selection_report.evidence.fit_seconds[static_cast<std::size_t>(j)] =
            std::max(cv_seconds[static_cast<std::size_t>(j)], 1e-9);
    }

    model.leader_map = select_leaders(model.selection_report.evidence);

    for (ModelIndex j = 0; j < kNumBaseModels; ++j)
        model.forests[static_cast<std::size_t>(j)] =
            fit_forest(configs[static_cast<std::size_t>(j)], variant_of_slot(j), d_train);

    return model;
}

}  // namespace lccde

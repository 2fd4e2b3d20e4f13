// lccde: train / evaluate / predict for the LCCDE intrusion-detection ensemble.
//
// Exit codes: 0 success, 2 bad flags, 3 ingest or data errors, 4 training errors.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lccde/lccde.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;

struct CommonDataFlags {
    std::string data;
    std::string format;  // can-hex | numeric-csv
    std::string label_col;
};

struct TrainFlags {
    CommonDataFlags in;
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    std::string out;
    // hyperparameter overrides shared by the three variants
    std::optional<int> rounds;
    std::optional<double> learning_rate;
    std::optional<int> max_depth;
    std::optional<double> l2_reg;
    std::optional<double> min_child_hessian;
    std::optional<int> max_leaves;
    std::optional<double> goss_top;
    std::optional<double> goss_rand;
};

struct EvaluateFlags {
    std::string model;
    CommonDataFlags in;
};

struct PredictFlags {
    std::string model;
    CommonDataFlags in;
    bool trace = false;
};

std::pair<lccde::Dataset, lccde::IngestReport> ingest_labeled(const CommonDataFlags& f) {
    if (f.format == "can-hex") return lccde::load_can_hex_csv(f.data);
    return lccde::load_numeric_csv(f.data, f.label_col);
}

void print_ingest_report(const lccde::IngestReport& r) {
    if (r.rows_dropped_malformed || r.rows_dropped_nonfinite)
        std::fprintf(stderr, "ingest: read %zu rows, kept %zu (dropped %zu malformed, %zu non-finite)\n",
                     r.rows_read, r.rows_kept, r.rows_dropped_malformed, r.rows_dropped_nonfinite);
}

int run_train(const TrainFlags& f) {
    lccde::Dataset data;
    try {
        auto [d, report] = ingest_labeled(f.in);
        print_ingest_report(report);
        data = std::move(d);
    } catch (const lccde::IngestError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }

    std::array<lccde::BoosterConfig, lccde::kNumBaseModels> configs;
    for (auto& c : configs) {
        if (f.rounds) c.rounds = *f.rounds;
        if (f.learning_rate) c.learning_rate = *f.learning_rate;
        if (f.max_depth) c.max_depth = *f.max_depth;
        if (f.l2_reg) c.l2_reg = *f.l2_reg;
        if (f.min_child_hessian) c.min_child_hessian = *f.min_child_hessian;
        if (f.max_leaves) c.max_leaves = *f.max_leaves;
        if (f.goss_top) c.goss_top_fraction = *f.goss_top;
        if (f.goss_rand) c.goss_rand_fraction = *f.goss_rand;
        c.seed = f.seed;
    }

    lccde::LccdeModel model;
    try {
        model = lccde::train_lccde(data, configs, f.folds, f.seed);
    } catch (const lccde::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const lccde::Error& e) {
        std::fprintf(stderr, "training error: %s\n", e.what());
        return kExitTraining;
    }

    for (const auto& w : model.selection_report.warnings)
        std::fprintf(stderr, "warning: %s\n", w.c_str());

    try {
        lccde::save_model(model, f.out);
    } catch (const lccde::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitTraining;
    }

    const auto& ev = model.selection_report.evidence;
    std::printf("%-24s %-26s %12s %12s %12s\n", "class", "leader", "f1[goss]", "f1[depth]",
                "f1[obliv]");
    for (std::size_t c = 0; c < model.class_names.size(); ++c) {
        const lccde::ModelIndex j = model.leader_map.leaders[c];
        const std::string leader =
            lccde::variant_name(lccde::variant_of_slot(j)) + " (" + std::to_string(j) + ")";
        std::printf("%-24s %-26s %12.6f %12.6f %12.6f\n", model.class_names[c].c_str(),
                    leader.c_str(), ev.f1[0][c], ev.f1[1][c], ev.f1[2][c]);
    }
    std::printf("cv fit seconds: goss_leafwise %.3f, depthwise %.3f, oblivious %.3f\n",
                ev.fit_seconds[0], ev.fit_seconds[1], ev.fit_seconds[2]);
    std::printf("model written to %s\n", f.out.c_str());
    return kExitOk;
}

int run_evaluate(const EvaluateFlags& f) {
    try {
        const lccde::LccdeModel model = lccde::load_model(f.model);
        auto [raw, report] = ingest_labeled(f.in);
        print_ingest_report(report);
        const lccde::Dataset test = lccde::relabel_to_reference(raw, model.class_names);

        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<lccde::Prediction> preds = lccde::predict_batch(model, test);
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        std::vector<lccde::ClassId> y_pred;
        y_pred.reserve(preds.size());
        for (const auto& p : preds) y_pred.push_back(p.class_id);
        const lccde::ConfusionMatrix cm =
            lccde::confusion(test.labels, y_pred, model.n_classes());
        const lccde::ClassMetrics per = lccde::per_class_metrics(cm);
        const lccde::AggregateMetrics agg = lccde::aggregate_metrics(cm);

        std::printf("%-24s %12s %12s %12s %10s\n", "class", "precision", "recall", "f1",
                    "support");
        for (std::size_t c = 0; c < model.n_classes(); ++c)
            std::printf("%-24s %12.6f %12.6f %12.6f %10lld\n", model.class_names[c].c_str(),
                        per.precision[c], per.recall[c], per.f1[c],
                        static_cast<long long>(per.support[c]));

        std::printf("\nconfusion matrix (rows = true class, columns = predicted):\n");
        for (std::size_t t = 0; t < model.n_classes(); ++t) {
            std::printf("%-24s", model.class_names[t].c_str());
            for (std::size_t p = 0; p < model.n_classes(); ++p)
                std::printf(" %10lld", static_cast<long long>(cm.counts[t][p]));
            std::printf("\n");
        }

        std::printf("\naccuracy           %.6f\n", agg.accuracy);
        std::printf("weighted precision %.6f\n", agg.weighted_precision);
        std::printf("weighted recall    %.6f\n", agg.weighted_recall);
        std::printf("weighted f1        %.6f\n", agg.weighted_f1);
        std::printf("macro f1           %.6f\n", agg.macro_f1);
        std::printf("prediction time    %.3f s for %zu rows\n", seconds, preds.size());
        return kExitOk;
    } catch (const lccde::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
}

void print_predict_header(bool trace) {
    std::printf("row,predicted_class,confidence");
    if (trace)
        std::printf(",branch,model0_class,model0_confidence,model1_class,model1_confidence,"
                    "model2_class,model2_confidence");
    std::printf("\n");
}

int run_predict(const PredictFlags& f) {
    try {
        const lccde::LccdeModel model = lccde::load_model(f.model);

        lccde::Matrix rows;
        try {
            std::ifstream in(f.in.data);
            if (!in) throw lccde::IngestError("cannot open \"" + f.in.data + "\" for reading");
            if (f.in.format == "can-hex") {
                auto [m, report] = lccde::load_can_hex_features(in);
                rows = std::move(m);
            } else {
                std::optional<std::string> label;
                if (!f.in.label_col.empty()) label = f.in.label_col;
                auto [m, report] = lccde::load_numeric_features(in, label);
                rows = std::move(m);
            }
        } catch (const lccde::EmptyInputError&) {
            print_predict_header(f.trace);
            return kExitOk;
        }

        print_predict_header(f.trace);
        for (std::size_t i = 0; i < rows.rows(); ++i) {
            const auto [pred, trace] = lccde::predict_sample(model, rows.row(i));
            std::printf("%zu,%s,%.6f", i,
                        model.class_names[static_cast<std::size_t>(pred.class_id)].c_str(),
                        pred.confidence);
            if (f.trace) {
                std::printf(",%s", lccde::branch_name(trace.branch));
                for (int j = 0; j < lccde::kNumBaseModels; ++j) {
                    const lccde::Prediction pj =
                        lccde::predict_proba(model.forests[static_cast<std::size_t>(j)],
                                             rows.row(i));
                    std::printf(",%s,%.6f",
                                model.class_names[static_cast<std::size_t>(pj.class_id)].c_str(),
                                pj.confidence);
                }
            }
            std::printf("\n");
        }
        return kExitOk;
    } catch (const lccde::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LCCDE: leader-class / confidence-decision ensemble IDS"};
    app.require_subcommand(1);

    TrainFlags tf;
    EvaluateFlags ef;
    PredictFlags pf;

    const auto format_check = CLI::IsMember({"can-hex", "numeric-csv"});

    CLI::App* train = app.add_subcommand("train", "train the three base learners and select leaders");
    train->add_option("--data", tf.in.data, "input CSV path")->required();
    train->add_option("--format", tf.in.format, "input format")->required()->check(format_check);
    train->add_option("--label-col", tf.in.label_col, "label column name (numeric-csv)");
    train->add_option("--folds", tf.folds, "cross-validation folds")->default_val(5);
    train->add_option("--seed", tf.seed, "random seed")->default_val(0);
    train->add_option("--out", tf.out, "output model path")->required();
    train->add_option("--rounds", tf.rounds, "boosting rounds (all variants)");
    train->add_option("--learning-rate", tf.learning_rate, "shrinkage (all variants)");
    train->add_option("--max-depth", tf.max_depth, "depth cap (depthwise/oblivious)");
    train->add_option("--l2-reg", tf.l2_reg, "L2 leaf regularization");
    train->add_option("--min-child-hessian", tf.min_child_hessian, "minimum child hessian sum");
    train->add_option("--max-leaves", tf.max_leaves, "leaf cap (goss-leafwise)");
    train->add_option("--goss-top", tf.goss_top, "GOSS large-gradient fraction a");
    train->add_option("--goss-rand", tf.goss_rand, "GOSS random fraction b");

    CLI::App* evaluate = app.add_subcommand("evaluate", "score a trained model on labeled data");
    evaluate->add_option("--model", ef.model, "model file")->required();
    evaluate->add_option("--data", ef.in.data, "input CSV path")->required();
    evaluate->add_option("--format", ef.in.format, "input format")->required()->check(format_check);
    evaluate->add_option("--label-col", ef.in.label_col, "label column name (numeric-csv)");

    CLI::App* predict = app.add_subcommand("predict", "emit per-row predictions as CSV");
    predict->add_option("--model", pf.model, "model file")->required();
    predict->add_option("--data", pf.in.data, "input CSV path")->required();
    predict->add_option("--format", pf.in.format, "input format")->required()->check(format_check);
    predict->add_option("--label-col", pf.in.label_col,
                        "label column to drop (numeric-csv, optional)");
    predict->add_flag("--trace", pf.trace, "add arbitration branch and per-model predictions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        std::cerr << app.help() << "\n";
        return kExitUsage;
    }

    if (train->parsed()) {
        if (tf.folds < 2) {
            std::fprintf(stderr, "error: --folds must be >= 2\n%s\n", app.help().c_str());
            return kExitUsage;
        }
        if (tf.in.format == "numeric-csv" && tf.in.label_col.empty()) {
            std::fprintf(stderr, "error: --label-col is required with --format numeric-csv\n");
            return kExitUsage;
        }
        return run_train(tf);
    }
    if (evaluate->parsed()) {
        if (ef.in.format == "numeric-csv" && ef.in.label_col.empty()) {
            std::fprintf(stderr, "error: --label-col is required with --format numeric-csv\n");
            return kExitUsage;
        }
        return run_evaluate(ef);
    }
    return run_predict(pf);
}

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "lccde/ensemble.hpp"
#include "support/decision_oracle.hpp"
#include "support/synthetic.hpp"

using namespace lccde;

namespace {

LeaderSelectionEvidence evidence_from_columns(
    const std::vector<std::array<double, 3>>& columns, const std::array<double, 3>& seconds) {
    LeaderSelectionEvidence ev;
    ev.fit_seconds = seconds;
    for (const auto& col : columns)
        for (std::size_t j = 0; j < 3; ++j) ev.f1[j].push_back(col[j]);
    return ev;
}

// Prediction with a given argmax class and confidence; the remaining mass is
// spread evenly so the probability vector stays valid.
Prediction pred_of(ClassId cls, double conf, std::size_t n_classes) {
    std::vector<double> probs(n_classes, (1.0 - conf) / static_cast<double>(n_classes - 1));
    probs[static_cast<std::size_t>(cls)] = conf;
    return make_prediction(std::move(probs));
}

}  // namespace

// ---------------------------------------------------------------------------
// select_leaders
// ---------------------------------------------------------------------------

TEST_CASE("select_leaders: strict maximum wins") {
    const auto ev = evidence_from_columns({{99.222, 99.351, 99.094}}, {14.3, 44.7, 73.7});
    CHECK(select_leaders(ev).leaders == std::vector<ModelIndex>{1});
}

TEST_CASE("select_leaders: ties fall to the fastest model") {
    const auto ev = evidence_from_columns({{100.0, 100.0, 100.0}}, {10.7, 45.3, 88.6});
    CHECK(select_leaders(ev).leaders == std::vector<ModelIndex>{0});

    const auto ev2 = evidence_from_columns({{100.0, 100.0, 100.0}}, {45.3, 10.7, 88.6});
    CHECK(select_leaders(ev2).leaders == std::vector<ModelIndex>{1});
}

TEST_CASE("select_leaders: full ties fall to the lowest model index") {
    const auto ev = evidence_from_columns({{50.0, 50.0, 50.0}}, {1.0, 1.0, 1.0});
    CHECK(select_leaders(ev).leaders == std::vector<ModelIndex>{0});
}

TEST_CASE("select_leaders reproduces the Car-Hacking leader map") {
    // Published per-class F1 (percent) for the three base models as fractions,
    // plus the published execution times.
    const auto ev = evidence_from_columns({{0.999998, 0.999996, 0.999996},   // Normal
                                           {1.0, 1.0, 1.0},                  // DoS
                                           {0.99995, 0.99990, 0.99990},      // Fuzzy
                                           {1.0, 1.0, 1.0},                  // Gear
                                           {1.0, 1.0, 1.0}},                 // RPM
                                          {10.7, 45.3, 88.6});
    CHECK(select_leaders(ev).leaders == std::vector<ModelIndex>{0, 0, 0, 0, 0});
}

TEST_CASE("select_leaders reproduces the CICIDS2017 leader map") {
    const auto ev = evidence_from_columns({{0.99863, 0.99863, 0.99794},    // Normal
                                           {1.0, 1.0, 0.99754},            // DoS
                                           {0.99889, 0.99889, 0.99557},    // Sniffing
                                           {0.99222, 0.99351, 0.99094},    // Brute-Force
                                           {0.99354, 0.99137, 0.99354},    // Web Attack
                                           {1.0, 1.0, 1.0},                // Botnets
                                           {0.85714, 0.85714, 0.85714}},   // Infiltration
                                          {14.3, 44.7, 73.7});
    CHECK(select_leaders(ev).leaders == std::vector<ModelIndex>{0, 0, 0, 1, 0, 0, 0});
}

TEST_CASE("select_leaders: identical evidence and timings give model 0 everywhere") {
    const auto ev = evidence_from_columns({{0.9, 0.9, 0.9}, {0.8, 0.8, 0.8}, {1.0, 1.0, 1.0}},
                                          {3.0, 3.0, 3.0});
    CHECK(select_leaders(ev).leaders == std::vector<ModelIndex>{0, 0, 0});
}

TEST_CASE("select_leaders is invariant to scaling all timings") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        LeaderSelectionEvidence ev;
        const std::size_t n = 1 + rng() % 6;
        for (std::size_t j = 0; j < 3; ++j) {
            ev.fit_seconds[j] = 0.5 + uni(rng);
            for (std::size_t c = 0; c < n; ++c)
                ev.f1[j].push_back(rng() % 3 == 0 ? 1.0 : uni(rng));  // force some ties
        }
        const LeaderMap base = select_leaders(ev);
        LeaderSelectionEvidence scaled = ev;
        const double k = 7.25;
        for (auto& s : scaled.fit_seconds) s *= k;
        CHECK(select_leaders(scaled).leaders == base.leaders);
    }
}

TEST_CASE("raising one model's whole F1 row only moves leadership toward it") {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> uni(0.0, 0.9);
    for (int trial = 0; trial < 50; ++trial) {
        LeaderSelectionEvidence ev;
        const std::size_t n = 1 + rng() % 6;
        for (std::size_t j = 0; j < 3; ++j) {
            ev.fit_seconds[j] = 0.5 + uni(rng);
            for (std::size_t c = 0; c < n; ++c) ev.f1[j].push_back(uni(rng));
        }
        const auto boosted = static_cast<ModelIndex>(rng() % 3);
        const LeaderMap before = select_leaders(ev);
        LeaderSelectionEvidence raised = ev;
        for (auto& v : raised.f1[static_cast<std::size_t>(boosted)]) v += 0.05;
        const LeaderMap after = select_leaders(raised);
        for (std::size_t c = 0; c < n; ++c) {
            if (after.leaders[c] != before.leaders[c]) CHECK(after.leaders[c] == boosted);
            if (before.leaders[c] == boosted) CHECK(after.leaders[c] == boosted);
        }
    }
}

// ---------------------------------------------------------------------------
// arbitrate
// ---------------------------------------------------------------------------

TEST_CASE("arbitrate: unanimous predictions pass through") {
    const std::array<Prediction, 3> preds{pred_of(2, 0.9, 4), pred_of(2, 0.7, 4),
                                          pred_of(2, 0.6, 4)};
    LeaderMap lm{{1, 1, 1, 1}};
    const auto [pred, trace] = arbitrate(preds, lm);
    CHECK(pred.class_id == 2);
    CHECK(trace.branch == ArbitrationBranch::Unanimous);
    CHECK(trace.matched_models.empty());
    CHECK_FALSE(trace.chosen_model.has_value());
    CHECK(trace.final_class == 2);
    // confidence/probabilities come from the leader of the agreed class
    CHECK(pred.confidence == 0.7);
}

TEST_CASE("arbitrate: all-different with two matches uses matched confidences") {
    // classes (A,B,C) = (0,1,2); leaders: LM_A=1, LM_B=1, LM_C=2
    // model 1 predicted B and leads B (match); model 2 predicted C and leads C
    // (match); model 0 predicted A but A's leader is 1 (no match).
    const std::array<Prediction, 3> preds{pred_of(0, 0.5, 3), pred_of(1, 0.9, 3),
                                          pred_of(2, 0.7, 3)};
    LeaderMap lm{{1, 1, 2}};
    const auto [pred, trace] = arbitrate(preds, lm);
    CHECK(pred.class_id == 1);
    CHECK(trace.branch == ArbitrationBranch::AllDifferentConfidence);
    CHECK(trace.matched_models == std::vector<ModelIndex>{1, 2});
    REQUIRE(trace.chosen_model.has_value());
    CHECK(*trace.chosen_model == 1);
}

TEST_CASE("arbitrate: all-different with zero matches falls back to all confidences") {
    // leaders point B and C at model 0 and A at model 1: no model leads its own
    // predicted class.
    const std::array<Prediction, 3> preds{pred_of(0, 0.4, 3), pred_of(1, 0.8, 3),
                                          pred_of(2, 0.6, 3)};
    LeaderMap lm{{1, 0, 0}};
    const auto [pred, trace] = arbitrate(preds, lm);
    CHECK(pred.class_id == 1);  // global max confidence
    CHECK(trace.branch == ArbitrationBranch::AllDifferentConfidence);
    CHECK(trace.matched_models.empty());
    REQUIRE(trace.chosen_model.has_value());
    CHECK(*trace.chosen_model == 1);
}

TEST_CASE("arbitrate: all-different with a single match ignores confidences") {
    const std::array<Prediction, 3> preds{pred_of(0, 0.34, 3), pred_of(1, 0.99, 3),
                                          pred_of(2, 0.98, 3)};
    LeaderMap lm{{0, 2, 1}};  // only model 0 leads its own class
    const auto [pred, trace] = arbitrate(preds, lm);
    CHECK(pred.class_id == 0);
    CHECK(trace.branch == ArbitrationBranch::AllDifferentSingleMatch);
    CHECK(trace.matched_models == std::vector<ModelIndex>{0});
}

TEST_CASE("arbitrate: two-agree follows the majority-class leader, even dissenting") {
    // classes (A,A,B); leader of A is model 2, which predicted B.
    const std::array<Prediction, 3> preds{pred_of(0, 0.9, 3), pred_of(0, 0.8, 3),
                                          pred_of(1, 0.6, 3)};
    LeaderMap lm{{2, 0, 0}};
    const auto [pred, trace] = arbitrate(preds, lm);
    CHECK(pred.class_id == 1);  // the dissenting leader wins
    CHECK(trace.branch == ArbitrationBranch::TwoAgree);
    REQUIRE(trace.chosen_model.has_value());
    CHECK(*trace.chosen_model == 2);
    CHECK(pred.confidence == 0.6);
}

TEST_CASE("arbitrate: confidence ties fall to the smallest model index") {
    const std::array<Prediction, 3> preds{pred_of(0, 0.8, 3), pred_of(1, 0.8, 3),
                                          pred_of(2, 0.5, 3)};
    LeaderMap lm{{1, 0, 0}};  // zero matches
    const auto [pred, trace] = arbitrate(preds, lm);
    CHECK(pred.class_id == 0);
    REQUIRE(trace.chosen_model.has_value());
    CHECK(*trace.chosen_model == 0);
}

TEST_CASE("arbitrate matches the straight-line reference on exhaustive n=3 cases") {
    const std::size_t n = 3;
    const std::vector<std::array<double, 3>> confidence_grid{
        {0.9, 0.7, 0.5}, {0.5, 0.9, 0.7}, {0.7, 0.5, 0.9}, {0.8, 0.8, 0.5},
        {0.5, 0.8, 0.8}, {0.8, 0.5, 0.8}, {0.7, 0.7, 0.7},
    };
    std::vector<ModelIndex> leader_of(n);
    for (int lm_code = 0; lm_code < 27; ++lm_code) {
        int code = lm_code;
        for (std::size_t c = 0; c < n; ++c) {
            leader_of[c] = code % 3;
            code /= 3;
        }
        const LeaderMap lm{leader_of};
        for (ClassId l0 = 0; l0 < static_cast<ClassId>(n); ++l0)
            for (ClassId l1 = 0; l1 < static_cast<ClassId>(n); ++l1)
                for (ClassId l2 = 0; l2 < static_cast<ClassId>(n); ++l2)
                    for (const auto& conf : confidence_grid) {
                        const std::array<Prediction, 3> preds{pred_of(l0, conf[0], n),
                                                              pred_of(l1, conf[1], n),
                                                              pred_of(l2, conf[2], n)};
                        const ClassId expected = testsupport::decide_reference(
                            {l0, l1, l2}, conf, leader_of);
                        const auto [pred, trace] = arbitrate(preds, lm);
                        REQUIRE(pred.class_id == expected);
                        REQUIRE(trace.final_class == expected);
                    }
    }
}

TEST_CASE("unanimity dominates regardless of leader map and confidences") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 4;
        const ClassId c = static_cast<ClassId>(rng() % n);
        std::vector<ModelIndex> leaders(n);
        for (auto& l : leaders) l = static_cast<ModelIndex>(rng() % 3);
        std::uniform_real_distribution<double> uni(0.55, 0.99);
        const std::array<Prediction, 3> preds{pred_of(c, uni(rng), n), pred_of(c, uni(rng), n),
                                              pred_of(c, uni(rng), n)};
        const auto [pred, trace] = arbitrate(preds, LeaderMap{leaders});
        CHECK(pred.class_id == c);
        CHECK(trace.branch == ArbitrationBranch::Unanimous);
    }
}

// ---------------------------------------------------------------------------
// train_lccde / predict_sample / predict_batch
// ---------------------------------------------------------------------------

namespace {

std::array<BoosterConfig, 3> quick_configs(std::uint64_t seed, int rounds = 10) {
    std::array<BoosterConfig, 3> configs;
    for (auto& c : configs) {
        c.rounds = rounds;
        c.max_depth = 4;
        c.seed = seed;
    }
    return configs;
}

}  // namespace

TEST_CASE("train_lccde produces a total leader map and sound evidence") {
    const Dataset blobs = testsupport::four_blob_dataset(60, 19);
    const LccdeModel model = train_lccde(blobs, quick_configs(3), 5, 3);

    REQUIRE(model.leader_map.n_classes() == 4);
    for (ModelIndex j : model.leader_map.leaders) {
        CHECK(j >= 0);
        CHECK(j < 3);
    }
    for (std::size_t j = 0; j < 3; ++j) {
        REQUIRE(model.selection_report.evidence.f1[j].size() == 4);
        for (double f : model.selection_report.evidence.f1[j]) {
            CHECK(f >= 0.0);
            CHECK(f <= 1.0);
        }
        CHECK(model.selection_report.evidence.fit_seconds[j] > 0.0);
    }
    // the selected leader attains the maximum of its class's F1 column
    for (std::size_t c = 0; c < 4; ++c) {
        const auto leader = static_cast<std::size_t>(model.leader_map.leaders[c]);
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(model.selection_report.evidence.f1[leader][c] >=
                  model.selection_report.evidence.f1[j][c] - 1e-6);
    }
    CHECK(model.class_names == blobs.class_names);
}

TEST_CASE("train_lccde is deterministic apart from measured timings") {
    const Dataset blobs = testsupport::four_blob_dataset(40, 23);
    const LccdeModel a = train_lccde(blobs, quick_configs(5, 6), 3, 5);
    const LccdeModel b = train_lccde(blobs, quick_configs(5, 6), 3, 5);
    CHECK(a.selection_report.evidence.f1 == b.selection_report.evidence.f1);
    for (std::size_t j = 0; j < 3; ++j) CHECK(a.forests[j].trees == b.forests[j].trees);
}

TEST_CASE("train_lccde rejects bad inputs") {
    const Dataset blobs = testsupport::four_blob_dataset(30, 2);
    CHECK_THROWS_AS(train_lccde(blobs, quick_configs(1), 1, 1), ConfigError);

    Dataset single = blobs;
    for (auto& l : single.labels) l = 0;
    CHECK_THROWS_WITH(train_lccde(single, quick_configs(1), 3, 1),
                      Catch::Matchers::ContainsSubstring("degenerate labels"));
}

TEST_CASE("train_lccde warns when a class has fewer samples than folds") {
    Dataset blobs = testsupport::make_blobs(
        {{{0.0, 0.0}, 0.5, 40}, {{5.0, 5.0}, 0.5, 40}, {{-5.0, 5.0}, 0.5, 3}}, 6);
    const LccdeModel model = train_lccde(blobs, quick_configs(4, 4), 5, 4);
    REQUIRE_FALSE(model.selection_report.warnings.empty());
    CHECK(model.selection_report.warnings[0].find("class 2") != std::string::npos);
    CHECK(model.leader_map.n_classes() == 3);
}

TEST_CASE("predict_sample composes predict_proba and arbitrate") {
    const Dataset blobs = testsupport::four_blob_dataset(50, 29);
    const LccdeModel model = train_lccde(blobs, quick_configs(11, 6), 3, 11);
    std::mt19937_64 rng(57);
    std::uniform_real_distribution<double> uni(-3.0, 7.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::vector<double> x{uni(rng), uni(rng)};
        const std::array<Prediction, 3> base{predict_proba(model.forests[0], x),
                                             predict_proba(model.forests[1], x),
                                             predict_proba(model.forests[2], x)};
        const auto direct = arbitrate(base, model.leader_map);
        const auto via_sample = predict_sample(model, x);
        CHECK(via_sample.first == direct.first);
        CHECK(via_sample.second.final_class == direct.second.final_class);
        CHECK(via_sample.second.branch == direct.second.branch);
    }
}

TEST_CASE("predict_batch: empty input, single-call equivalence, parallel equality") {
    const Dataset blobs = testsupport::four_blob_dataset(50, 37);
    const LccdeModel model = train_lccde(blobs, quick_configs(13, 6), 3, 13);

    CHECK(predict_batch(model, Matrix(0, 2)).empty());

    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> uni(-3.0, 7.0);
    Matrix rows(1000, 2);
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        rows(i, 0) = uni(rng);
        rows(i, 1) = uni(rng);
    }

    const std::vector<Prediction> sequential = predict_batch(model, rows, false);
    const std::vector<Prediction> parallel = predict_batch(model, rows, true);
    REQUIRE(sequential.size() == rows.rows());
    CHECK(sequential == parallel);

    for (std::size_t i = 0; i < rows.rows(); i += 97)
        CHECK(sequential[i] == predict_sample(model, rows.row(i)).first);
}

TEST_CASE("predict_sample rejects dimension mismatches") {
    const Dataset blobs = testsupport::four_blob_dataset(30, 41);
    const LccdeModel model = train_lccde(blobs, quick_configs(17, 4), 3, 17);
    CHECK_THROWS_AS(predict_sample(model, std::vector<double>{1.0, 2.0, 3.0}),
                    DimensionMismatchError);
}

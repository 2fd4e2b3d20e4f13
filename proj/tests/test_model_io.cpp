#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "lccde/ensemble.hpp"
#include "lccde/model_io.hpp"
#include "support/synthetic.hpp"

using namespace lccde;
namespace fs = std::filesystem;

namespace {

LccdeModel trained_model(std::uint64_t seed = 3, int rounds = 6) {
    // include a tiny class so the model carries warnings through the file
    const Dataset blobs = testsupport::make_blobs(
        {{{0.0, 0.0}, 0.7, 50}, {{5.0, 0.0}, 0.9, 45}, {{0.0, 5.0}, 1.1, 4}}, seed);
    std::array<BoosterConfig, 3> configs;
    for (auto& c : configs) {
        c.rounds = rounds;
        c.max_depth = 4;
        c.seed = seed;
    }
    return train_lccde(blobs, configs, 5, seed);
}

std::string serialized(const LccdeModel& m) {
    std::ostringstream out;
    save_model(m, out);
    return out.str();
}

LccdeModel parsed(const std::string& text) {
    std::istringstream in(text);
    return load_model(in);
}

}  // namespace

TEST_CASE("save/load round-trip: predictions are bitwise identical") {
    const LccdeModel model = trained_model();
    const LccdeModel loaded = parsed(serialized(model));

    CHECK(loaded.leader_map == model.leader_map);
    CHECK(loaded.class_names == model.class_names);
    CHECK(loaded.selection_report.evidence.f1 == model.selection_report.evidence.f1);
    CHECK(loaded.selection_report.evidence.fit_seconds ==
          model.selection_report.evidence.fit_seconds);
    CHECK(loaded.selection_report.folds == model.selection_report.folds);
    CHECK(loaded.selection_report.seed == model.selection_report.seed);
    CHECK(loaded.selection_report.warnings == model.selection_report.warnings);
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(loaded.forests[j].variant == model.forests[j].variant);
        CHECK(loaded.forests[j].base_score == model.forests[j].base_score);
        CHECK(loaded.forests[j].config == model.forests[j].config);
        REQUIRE(loaded.forests[j].trees.size() == model.forests[j].trees.size());
        for (std::size_t t = 0; t < model.forests[j].trees.size(); ++t)
            CHECK(loaded.forests[j].trees[t].nodes == model.forests[j].trees[t].nodes);
    }

    std::mt19937_64 rng(404);
    std::uniform_real_distribution<double> uni(-4.0, 9.0);
    Matrix rows(1000, 2);
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        rows(i, 0) = uni(rng);
        rows(i, 1) = uni(rng);
    }
    const auto a = predict_batch(model, rows);
    const auto b = predict_batch(loaded, rows);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == b[i]);
}

TEST_CASE("serialization is stable: save(load(save(m))) == save(m)") {
    const LccdeModel model = trained_model(11, 4);
    const std::string once = serialized(model);
    CHECK(serialized(parsed(once)) == once);
}

TEST_CASE("any single-byte corruption is rejected") {
    const LccdeModel model = trained_model(5, 3);
    const std::string text = serialized(model);
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 25; ++trial) {
        std::string bad = text;
        const std::size_t pos = rng() % bad.size();
        char replacement = static_cast<char>('0' + rng() % 10);
        if (bad[pos] == replacement) replacement = 'q';
        bad[pos] = replacement;
        INFO("mutated byte " << pos);
        CHECK_THROWS_AS(parsed(bad), ModelParseError);
    }
}

TEST_CASE("unsupported format versions are reported with found/supported") {
    try {
        std::istringstream in("lccde_model\nformat_version 2\n");
        // make the checksum valid so the version check is what fires
        const std::string body = "lccde_model\nformat_version 2\n";
        std::ostringstream full;
        full << body << "checksum " << lccde::detail::format_hex64(lccde::detail::fnv1a64(body))
             << "\n";
        parsed(full.str());
        FAIL("expected ModelParseError");
    } catch (const ModelParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2") != std::string::npos);
        CHECK(msg.find("1") != std::string::npos);
    }
}

TEST_CASE("truncated files fail with a byte offset") {
    const LccdeModel model = trained_model(7, 3);
    const std::string text = serialized(model);
    const std::string truncated = text.substr(0, text.size() / 2);
    try {
        parsed(truncated);
        FAIL("expected ModelParseError");
    } catch (const ModelParseError& e) {
        CHECK(std::string(e.what()).find("byte") != std::string::npos);
        CHECK(e.byte_offset <= truncated.size());
    }
}

TEST_CASE("junk input is not an lccde model") {
    const std::string body = "something else\n";
    std::ostringstream full;
    full << body << "checksum " << lccde::detail::format_hex64(lccde::detail::fnv1a64(body))
         << "\n";
    CHECK_THROWS_WITH(parsed(full.str()),
                      Catch::Matchers::ContainsSubstring("not an lccde model"));

    std::istringstream no_checksum("lccde_model\nformat_version 1\n");
    CHECK_THROWS_AS(load_model(no_checksum), ModelParseError);
}

TEST_CASE("save_model to a path is atomic") {
    const LccdeModel model = trained_model(13, 3);
    const fs::path dir = fs::temp_directory_path() / "lccde_model_io_test";
    fs::create_directories(dir);
    const fs::path target = dir / "model.txt";

    save_model(model, target.string());
    REQUIRE(fs::exists(target));
    CHECK_FALSE(fs::exists(target.string() + ".tmp"));
    const LccdeModel loaded = load_model(target.string());
    CHECK(loaded.leader_map == model.leader_map);

    // failure to write leaves nothing behind
    const fs::path missing = dir / "no_such_dir" / "model.txt";
    CHECK_THROWS(save_model(model, missing.string()));
    CHECK_FALSE(fs::exists(missing));

    fs::remove_all(dir);
}

TEST_CASE("load_model rejects unreadable paths") {
    CHECK_THROWS(load_model("/definitely/not/here.txt"));
}

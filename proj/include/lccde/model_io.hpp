#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lccde/core.hpp"
#include "lccde/ensemble.hpp"
#include "lccde/learners.hpp"

namespace lccde {

// Model files are a single self-describing text document (format_version 1):
// one key per line, %.17g floats (exact double round-trip), class names and
// warnings as rest-of-line strings, and an FNV-1a-64 checksum trailer so any
// byte corruption is detected at load time. CV timings live on the single
// `fit_seconds` line; nothing else in the file is run-dependent.

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

class ModelReader {
public:
    explicit ModelReader(std::string text) : text_(std::move(text)) {
        std::size_t pos = 0;
        while (pos < text_.size()) {
            std::size_t end = text_.find('\n', pos);
            if (end == std::string::npos) end = text_.size();
            std::string line = text_.substr(pos, end - pos);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines_.emplace_back(std::move(line), pos);
            pos = end + 1;
        }
    }

    const std::string& text() const { return text_; }

    std::size_t offset() const {
        return idx_ < lines_.size() ? lines_[idx_].second : text_.size();
    }

    [[noreturn]] void fail(const std::string& msg) const {
        const std::size_t off = offset();
        throw ModelParseError("model file parse error at byte " + std::to_string(off) + ": " + msg,
                              off);
    }

    bool at_end() const { return idx_ >= lines_.size(); }

    const std::string& peek() const {
        if (at_end()) fail("unexpected end of file");
        return lines_[idx_].first;
    }

    std::string take_line() {
        const std::string line = peek();
        ++idx_;
        return line;
    }

    // Consumes a line of the form "<key> <rest>" and returns rest verbatim.
    std::string expect(const std::string& key) {
        const std::string line = take_line();
        if (line == key) return "";
        if (line.size() > key.size() && line.compare(0, key.size(), key) == 0 &&
            line[key.size()] == ' ')
            return line.substr(key.size() + 1);
        --idx_;
        fail("expected \"" + key + "\", found \"" + line + "\"");
    }

    std::vector<std::string> expect_tokens(const std::string& key, std::size_t count) {
        const std::string rest = expect(key);
        std::vector<std::string> tokens;
        std::istringstream ss(rest);
        std::string tok;
        while (ss >> tok) tokens.push_back(tok);
        if (tokens.size() != count) {
            --idx_;
            fail("\"" + key + "\" expects " + std::to_string(count) + " fields, found " +
                 std::to_string(tokens.size()));
        }
        return tokens;
    }

    long long to_int(const std::string& tok) const {
        char* end = nullptr;
        const long long v = std::strtoll(tok.c_str(), &end, 10);
        if (tok.empty() || end != tok.c_str() + tok.size()) fail("not an integer: \"" + tok + "\"");
        return v;
    }

    std::uint64_t to_uint(const std::string& tok) const {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
        if (tok.empty() || end != tok.c_str() + tok.size())
            fail("not an unsigned integer: \"" + tok + "\"");
        return v;
    }

    double to_double(const std::string& tok) const {
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (tok.empty() || end != tok.c_str() + tok.size()) fail("not a number: \"" + tok + "\"");
        return v;
    }

private:
    std::string text_;
    std::vector<std::pair<std::string, std::size_t>> lines_;
    std::size_t idx_ = 0;
};

inline void write_forest(std::ostream& out, const TrainedForest& f, int slot) {
    out << "forest " << slot << '\n';
    out << "variant " << variant_name(f.variant) << '\n';
    const BoosterConfig& c = f.config;
    out << "config " << c.rounds << ' ' << format_double(c.learning_rate) << ' ' << c.max_depth
        << ' ' << format_double(c.l2_reg) << ' ' << format_double(c.min_child_hessian) << ' '
        << c.max_leaves << ' ' << format_double(c.goss_top_fraction) << ' '
        << format_double(c.goss_rand_fraction) << ' ' << c.seed << '\n';
    out << "n_features " << f.n_features << '\n';
    out << "rounds " << f.rounds << '\n';
    out << "base_score";
    for (double v : f.base_score) out << ' ' << format_double(v);
    out << '\n';
    out << "trees " << f.trees.size() << '\n';
    for (std::size_t t = 0; t < f.trees.size(); ++t) {
        out << "tree " << t << ' ' << f.trees[t].nodes.size() << '\n';
        for (const TreeNode& nd : f.trees[t].nodes)
            out << "node " << nd.feature << ' ' << format_double(nd.threshold) << ' ' << nd.left
                << ' ' << nd.right << ' ' << format_double(nd.leaf_weight) << '\n';
    }
}

inline TrainedForest read_forest(ModelReader& r, int slot, std::size_t n_classes) {
    if (r.to_int(r.expect("forest")) != slot) r.fail("forest slots out of order");
    TrainedForest f;
    const std::string vname = r.expect("variant");
    const auto variant = variant_from_name(vname);
    if (!variant) r.fail("unknown variant \"" + vname + "\"");
    f.variant = *variant;

    const auto cfg = r.expect_tokens("config", 9);
    f.config.rounds = static_cast<int>(r.to_int(cfg[0]));
    f.config.learning_rate = r.to_double(cfg[1]);
    f.config.max_depth = static_cast<int>(r.to_int(cfg[2]));
    f.config.l2_reg = r.to_double(cfg[3]);
    f.config.min_child_hessian = r.to_double(cfg[4]);
    f.config.max_leaves = static_cast<int>(r.to_int(cfg[5]));
    f.config.goss_top_fraction = r.to_double(cfg[6]);
    f.config.goss_rand_fraction = r.to_double(cfg[7]);
    f.config.seed = r.to_uint(cfg[8]);

    f.n_features = static_cast<int>(r.to_int(r.expect("n_features")));
    f.rounds = static_cast<int>(r.to_int(r.expect("rounds")));
    f.n_classes = static_cast<int>(n_classes);

    const auto base = r.expect_tokens("base_score", n_classes);
    for (const auto& tok : base) f.base_score.push_back(r.to_double(tok));

    const auto n_trees = static_cast<std::size_t>(r.to_int(r.expect("trees")));
    if (n_trees != static_cast<std::size_t>(f.rounds) * n_classes)
        r.fail("tree count " + std::to_string(n_trees) + " does not match rounds*classes");
    f.trees.reserve(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
        const auto head = r.expect_tokens("tree", 2);
        if (static_cast<std::size_t>(r.to_int(head[0])) != t) r.fail("tree indices out of order");
        const auto n_nodes = static_cast<std::size_t>(r.to_int(head[1]));
        Tree tree;
        tree.nodes.reserve(n_nodes);
        for (std::size_t k = 0; k < n_nodes; ++k) {
            const auto fields = r.expect_tokens("node", 5);
            TreeNode nd;
            nd.feature = static_cast<std::int32_t>(r.to_int(fields[0]));
            nd.threshold = r.to_double(fields[1]);
            nd.left = static_cast<std::int32_t>(r.to_int(fields[2]));
            nd.right = static_cast<std::int32_t>(r.to_int(fields[3]));
            nd.leaf_weight = r.to_double(fields[4]);
            if (!nd.is_leaf() &&
                (nd.left < 0 || nd.right < 0 || static_cast<std::size_t>(nd.left) >= n_nodes ||
                 static_cast<std::size_t>(nd.right) >= n_nodes))
                r.fail("node child index out of range");
            tree.nodes.push_back(nd);
        }
        f.trees.push_back(std::move(tree));
    }
    return f;
}

}  // namespace detail

inline void save_model(const LccdeModel& m, std::ostream& out) {
    std::ostringstream body;
    body << "lccde_model\n";
    body << "format_version " << kModelFormatVersion << '\n';
    body << "n_classes " << m.class_names.size() << '\n';
    for (std::size_t i = 0; i < m.class_names.size(); ++i)
        body << "class " << i << ' ' << m.class_names[i] << '\n';
    body << "folds " << m.selection_report.folds << '\n';
    body << "train_seed " << m.selection_report.seed << '\n';
    for (int j = 0; j < kNumBaseModels; ++j) {
        body << "cv_f1 " << j;
        for (double v : m.selection_report.evidence.f1[static_cast<std::size_t>(j)])
            body << ' ' << detail::format_double(v);
        body << '\n';
    }
    body << "fit_seconds";
    for (double v : m.selection_report.evidence.fit_seconds)
        body << ' ' << detail::format_double(v);
    body << '\n';
    body << "leaders";
    for (ModelIndex j : m.leader_map.leaders) body << ' ' << j;
    body << '\n';
    body << "warnings " << m.selection_report.warnings.size() << '\n';
    for (const auto& w : m.selection_report.warnings) body << "warning " << w << '\n';
    for (int j = 0; j < kNumBaseModels; ++j)
        detail::write_forest(body, m.forests[static_cast<std::size_t>(j)], j);
    body << "end\n";

    const std::string text = body.str();
    out << text << "checksum " << detail::format_hex64(detail::fnv1a64(text)) << '\n';
}

/// Writes the model atomically: serialize to a temporary file in the target
/// directory, then rename over the destination.
inline void save_model(const LccdeModel& m, const std::string& path) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open \"" + tmp.string() + "\" for writing");
        save_model(m, out);
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw Error("failed writing model to \"" + tmp.string() + "\"");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("failed to move model into place at \"" + path + "\": " + ec.message());
    }
}

inline LccdeModel load_model(std::istream& in) {
    std::ostringstream buf;
    buf << in.rdbuf();
    detail::ModelReader r(buf.str());

    // Verify the checksum trailer before interpreting anything else.
    const std::string& text = r.text();
    const std::size_t trailer_pos = text.rfind("checksum ");
    if (trailer_pos == std::string::npos || (trailer_pos != 0 && text[trailer_pos - 1] != '\n'))
        throw ModelParseError("model file parse error at byte " + std::to_string(text.size()) +
                                  ": missing checksum trailer (file truncated?)",
                              text.size());
    {
        std::string trailer = text.substr(trailer_pos + 9);
        while (!trailer.empty() && (trailer.back() == '\n' || trailer.back() == '\r'))
            trailer.pop_back();
        char* end = nullptr;
        const std::uint64_t stored = std::strtoull(trailer.c_str(), &end, 16);
        const std::uint64_t actual =
            detail::fnv1a64(std::string_view(text).substr(0, trailer_pos));
        if (trailer.empty() || end != trailer.c_str() + trailer.size() || stored != actual)
            throw ModelParseError("model file parse error at byte " +
                                      std::to_string(trailer_pos) +
                                      ": checksum mismatch (file corrupted)",
                                  trailer_pos);
    }

    if (r.take_line() != "lccde_model")
        throw ModelParseError("model file parse error at byte 0: not an lccde model file", 0);
    const long long version = r.to_int(r.expect("format_version"));
    if (version != kModelFormatVersion)
        throw ModelParseError("unsupported format_version " + std::to_string(version) +
                                  " (supported: " + std::to_string(kModelFormatVersion) + ")",
                              r.offset());

    LccdeModel m;
    const auto n_classes = static_cast<std::size_t>(r.to_int(r.expect("n_classes")));
    if (n_classes < 2) r.fail("n_classes must be >= 2");
    m.class_names.resize(n_classes);
    for (std::size_t i = 0; i < n_classes; ++i) {
        const std::string rest = r.expect("class");
        const std::size_t space = rest.find(' ');
        if (space == std::string::npos) r.fail("class line needs an index and a name");
        if (static_cast<std::size_t>(r.to_int(rest.substr(0, space))) != i)
            r.fail("class indices out of order");
        m.class_names[i] = rest.substr(space + 1);
        if (m.class_names[i].empty()) r.fail("empty class name");
    }

    m.selection_report.folds = static_cast<std::size_t>(r.to_int(r.expect("folds")));
    m.selection_report.seed = r.to_uint(r.expect("train_seed"));
    for (int j = 0; j < kNumBaseModels; ++j) {
        const auto tokens = r.expect_tokens("cv_f1", n_classes + 1);
        if (r.to_int(tokens[0]) != j) r.fail("cv_f1 rows out of order");
        for (std::size_t c = 0; c < n_classes; ++c)
            m.selection_report.evidence.f1[static_cast<std::size_t>(j)].push_back(
                r.to_double(tokens[c + 1]));
    }
    {
        const auto tokens = r.expect_tokens("fit_seconds", kNumBaseModels);
        for (int j = 0; j < kNumBaseModels; ++j)
            m.selection_report.evidence.fit_seconds[static_cast<std::size_t>(j)] =
                r.to_double(tokens[static_cast<std::size_t>(j)]);
    }
    {
        const auto tokens = r.expect_tokens("leaders", n_classes);
        m.leader_map.leaders.resize(n_classes);
        for (std::size_t c = 0; c < n_classes; ++c) {
            const long long v = r.to_int(tokens[c]);
            if (v < 0 || v >= kNumBaseModels) r.fail("leader index out of range");
            m.leader_map.leaders[c] = static_cast<ModelIndex>(v);
        }
    }
    const auto n_warnings = static_cast<std::size_t>(r.to_int(r.expect("warnings")));
    for (std::size_t i = 0; i < n_warnings; ++i)
        m.selection_report.warnings.push_back(r.expect("warning"));

    for (int j = 0; j < kNumBaseModels; ++j)
        m.forests[static_cast<std::size_t>(j)] = detail::read_forest(r, j, n_classes);

    for (int j = 1; j < kNumBaseModels; ++j)
        if (m.forests[static_cast<std::size_t>(j)].n_features != m.forests[0].n_features)
            r.fail("forests disagree on feature count");

    r.expect("end");
    return m;
}

inline LccdeModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open \"" + path + "\" for reading");
    return load_model(in);
}

}  // namespace lccde

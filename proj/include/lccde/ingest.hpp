#pragma once

#include <array>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "lccde/core.hpp"

namespace lccde {

// ----------------------------------------------------------------------------
// Records & reports
// ----------------------------------------------------------------------------

// One CAN frame row: timestamp, hex frame id, data-length code, up to eight
// data bytes (zero-padded below dlc), and an optional label field.
struct CanRecord {
    double timestamp = 0.0;
    int can_id = 0;
    int dlc = 0;
    std::array<int, 8> data{};
    std::optional<std::string> label;
};

struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t rows_kept = 0;
    std::size_t rows_dropped_nonfinite = 0;
    std::size_t rows_dropped_malformed = 0;
    std::vector<std::size_t> class_counts;  // aligned with the Dataset's class_names
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

inline std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<long> parse_hex(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 16);
    if (end != s.c_str() + s.size() || v < 0) return std::nullopt;
    return v;
}

inline std::optional<long> parse_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

// Parses "timestamp, can_id(hex), dlc, <dlc bytes>, [label]".
inline std::optional<CanRecord> parse_can_row(const std::vector<std::string>& fields) {
    if (fields.size() < 3) return std::nullopt;
    const auto ts = parse_double(fields[0]);
    if (!ts || !std::isfinite(*ts)) return std::nullopt;
    const auto id = parse_hex(fields[1]);
    if (!id) return std::nullopt;
    const auto dlc = parse_int(fields[2]);
    if (!dlc || *dlc < 0 || *dlc > 8) return std::nullopt;

    const std::size_t n_bytes = static_cast<std::size_t>(*dlc);
    const std::size_t without_label = 3 + n_bytes;
    if (fields.size() != without_label && fields.size() != without_label + 1)
        return std::nullopt;

    CanRecord rec;
    rec.timestamp = *ts;
    rec.can_id = static_cast<int>(*id);
    rec.dlc = static_cast<int>(*dlc);
    for (std::size_t b = 0; b < n_bytes; ++b) {
        const auto byte = parse_hex(fields[3 + b]);
        if (!byte || *byte > 255) return std::nullopt;
        rec.data[b] = static_cast<int>(*byte);
    }
    if (fields.size() == without_label + 1) {
        if (fields[without_label].empty()) return std::nullopt;
        rec.label = fields[without_label];
    }
    return rec;
}

struct LabelEncoder {
    std::vector<std::string> names;  // first-appearance order
    std::unordered_map<std::string, ClassId> ids;

    ClassId encode(const std::string& name) {
        const auto it = ids.find(name);
        if (it != ids.end()) return it->second;
        const ClassId id = static_cast<ClassId>(names.size());
        names.push_back(name);
        ids.emplace(name, id);
        return id;
    }
};

inline std::vector<std::string> can_feature_names() {
    std::vector<std::string> names{"can_id"};
    for (int b = 0; b < 8; ++b) names.push_back("data" + std::to_string(b));
    return names;
}

inline std::array<double, 9> can_features(const CanRecord& rec) {
    std::array<double, 9> f{};
    f[0] = static_cast<double>(rec.can_id);
    for (int b = 0; b < 8; ++b) f[static_cast<std::size_t>(b) + 1] = rec.data[static_cast<std::size_t>(b)];
    return f;
}

}  // namespace detail

// ----------------------------------------------------------------------------
// CAN hex CSV
// ----------------------------------------------------------------------------

/// Loads labeled CAN frames: features are [can_id, data0..data7] with short
/// frames zero-padded; labels are encoded in first-appearance order. Malformed
/// or unlabeled rows are dropped and counted.
inline std::pair<Dataset, IngestReport> load_can_hex_csv(std::istream& in) {
    Dataset d;
    d.feature_names = detail::can_feature_names();
    IngestReport report;
    detail::LabelEncoder encoder;

    std::string line;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++report.rows_read;
        const auto rec = detail::parse_can_row(detail::split_csv_line(line));
        if (!rec || !rec->label) {
            ++report.rows_dropped_malformed;
            continue;
        }
        d.features.push_row(detail::can_features(*rec));
        d.labels.push_back(encoder.encode(*rec->label));
        ++report.rows_kept;
    }
    if (report.rows_kept == 0) throw EmptyInputError("CAN CSV contains no usable rows");
    if (encoder.names.size() < 2)
        throw IngestError("CAN CSV contains a single distinct label (\"" + encoder.names[0] +
                          "\"); at least two classes are required");

    d.class_names = encoder.names;
    report.class_counts.assign(d.class_names.size(), 0);
    for (ClassId l : d.labels) ++report.class_counts[static_cast<std::size_t>(l)];
    return {std::move(d), report};
}

inline std::pair<Dataset, IngestReport> load_can_hex_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open \"" + path + "\" for reading");
    return load_can_hex_csv(in);
}

/// Feature-only CAN loader for prediction inputs; the label field is optional
/// and ignored when present.
inline std::pair<Matrix, IngestReport> load_can_hex_features(std::istream& in) {
    Matrix features(0, 9);
    IngestReport report;
    std::string line;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++report.rows_read;
        const auto rec = detail::parse_can_row(detail::split_csv_line(line));
        if (!rec) {
            ++report.rows_dropped_malformed;
            continue;
        }
        features.push_row(detail::can_features(*rec));
        ++report.rows_kept;
    }
    if (report.rows_kept == 0) throw EmptyInputError("CAN CSV contains no usable rows");
    return {std::move(features), report};
}

// ----------------------------------------------------------------------------
// Numeric (headered) CSV
// ----------------------------------------------------------------------------

namespace detail {

struct NumericCsv {
    Matrix features;
    std::vector<std::string> feature_names;
    std::vector<std::string> labels;  // raw strings; empty when no label column
    IngestReport report;
};

inline NumericCsv load_numeric(std::istream& in, const std::optional<std::string>& label_column) {
    std::string header_line;
    if (!std::getline(in, header_line) || trim(header_line).empty())
        throw EmptyInputError("numeric CSV is empty (no header row)");

    const std::vector<std::string> header = split_csv_line(header_line);
    std::size_t label_idx = header.size();
    if (label_column) {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == *label_column) label_idx = i;
        if (label_idx == header.size()) {
            std::string available;
            for (std::size_t i = 0; i < header.size(); ++i)
                available += (i ? ", " : "") + header[i];
            throw IngestError("label column \"" + *label_column +
                              "\" not found; available columns: " + available);
        }
    }

    NumericCsv out;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (i != label_idx) out.feature_names.push_back(header[i]);
    if (out.feature_names.empty())
        throw IngestError("numeric CSV has no feature columns besides the label");

    std::vector<double> row(out.feature_names.size());
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++out.report.rows_read;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            ++out.report.rows_dropped_malformed;
            continue;
        }
        bool malformed = false, nonfinite = false;
        std::size_t col = 0;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i == label_idx) {
                if (fields[i].empty()) malformed = true;
                continue;
            }
            const auto v = parse_double(fields[i]);
            if (!v)
                malformed = true;
            else if (!std::isfinite(*v))
                nonfinite = true;
            else
                row[col] = *v;
            ++col;
        }
        if (malformed) {
            ++out.report.rows_dropped_malformed;
            continue;
        }
        if (nonfinite) {
            ++out.report.rows_dropped_nonfinite;
            continue;
        }
        out.features.push_row(row);
        if (label_column) out.labels.push_back(fields[label_idx]);
        ++out.report.rows_kept;
    }
    if (out.report.rows_kept == 0) throw EmptyInputError("numeric CSV contains no usable rows");
    return out;
}

}  // namespace detail

/// Loads a headered numeric CSV: the named column provides labels (encoded in
/// first-appearance order), every other column is parsed as a real feature.
/// Rows with non-finite values are dropped and counted separately from rows
/// that fail to parse.
inline std::pair<Dataset, IngestReport> load_numeric_csv(std::istream& in,
                                                         const std::string& label_column) {
    detail::NumericCsv raw = detail::load_numeric(in, label_column);

    Dataset d;
    d.features = std::move(raw.features);
    d.feature_names = std::move(raw.feature_names);
    detail::LabelEncoder encoder;
    d.labels.reserve(raw.labels.size());
    for (const auto& name : raw.labels) d.labels.push_back(encoder.encode(name));
    if (encoder.names.size() < 2)
        throw IngestError("numeric CSV contains a single distinct label (\"" + encoder.names[0] +
                          "\"); at least two classes are required");
    d.class_names = encoder.names;

    raw.report.class_counts.assign(d.class_names.size(), 0);
    for (ClassId l : d.labels) ++raw.report.class_counts[static_cast<std::size_t>(l)];
    return {std::move(d), raw.report};
}

inline std::pair<Dataset, IngestReport> load_numeric_csv(const std::string& path,
                                                         const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open \"" + path + "\" for reading");
    return load_numeric_csv(in, label_column);
}

/// Feature-only numeric loader for prediction inputs; when a label column is
/// named it is skipped, otherwise every column is a feature.
inline std::pair<Matrix, IngestReport> load_numeric_features(
    std::istream& in, const std::optional<std::string>& label_column = std::nullopt) {
    detail::NumericCsv raw = detail::load_numeric(in, label_column);
    return {std::move(raw.features), raw.report};
}

// ----------------------------------------------------------------------------
// Relabeling & writing
// ----------------------------------------------------------------------------

/// Re-encodes labels against a reference class-name list (typically a trained
/// model's), so test-set encoding lines up with the model's.
inline Dataset relabel_to_reference(const Dataset& d,
                                    const std::vector<std::string>& reference_names) {
    std::unordered_map<std::string, ClassId> ref_ids;
    for (std::size_t i = 0; i < reference_names.size(); ++i)
        ref_ids.emplace(reference_names[i], static_cast<ClassId>(i));

    std::vector<ClassId> mapping(d.class_names.size());
    for (std::size_t i = 0; i < d.class_names.size(); ++i) {
        const auto it = ref_ids.find(d.class_names[i]);
        if (it == ref_ids.end())
            throw IngestError("unknown class name \"" + d.class_names[i] +
                              "\" (not in the reference class list)");
        mapping[i] = it->second;
    }

    Dataset out;
    out.features = d.features;
    out.feature_names = d.feature_names;
    out.class_names = reference_names;
    out.labels.reserve(d.labels.size());
    for (ClassId l : d.labels) out.labels.push_back(mapping[static_cast<std::size_t>(l)]);
    return out;
}

/// Writes a Dataset as a headered numeric CSV; values use %.17g so reloading
/// reproduces the doubles exactly.
inline void save_numeric_csv(const Dataset& d, std::ostream& out,
                             const std::string& label_column = "label") {
    for (std::size_t i = 0; i < d.n_features(); ++i) {
        const std::string name =
            i < d.feature_names.size() ? d.feature_names[i] : "f" + std::to_string(i);
        out << name << ',';
    }
    out << label_column << '\n';
    char buf[40];
    for (std::size_t r = 0; r < d.n_rows(); ++r) {
        for (std::size_t c = 0; c < d.n_features(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", d.features(r, c));
            out << buf << ',';
        }
        out << d.class_names[static_cast<std::size_t>(d.labels[r])] << '\n';
    }
}

}  // namespace lccde

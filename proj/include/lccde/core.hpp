#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lccde {

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct InvalidDatasetError : Error {
    using Error::Error;
};

struct DimensionMismatchError : Error {
    using Error::Error;
};

struct IngestError : Error {
    using Error::Error;
};

// Input opened fine but yielded zero usable rows.
struct EmptyInputError : IngestError {
    using IngestError::IngestError;
};

struct ModelParseError : Error {
    std::size_t byte_offset;
    ModelParseError(const std::string& what, std::size_t offset)
        : Error(what), byte_offset(offset) {}
};

// ----------------------------------------------------------------------------
// Basic aliases
// ----------------------------------------------------------------------------

using ClassId = int;     // dense class label in [0, n_classes)
using ModelIndex = int;  // base-model slot in {0, 1, 2}

inline constexpr int kNumBaseModels = 3;

// ----------------------------------------------------------------------------
// Matrix: dense row-major double matrix
// ----------------------------------------------------------------------------

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<double> row(std::size_t r) {
        return {data_.data() + r * cols_, cols_};
    }

    void push_row(std::span<const double> values) {
        if (rows_ == 0 && cols_ == 0) cols_ = values.size();
        if (values.size() != cols_)
            throw DimensionMismatchError("push_row: expected " + std::to_string(cols_) +
                                         " columns, got " + std::to_string(values.size()));
        data_.insert(data_.end(), values.begin(), values.end());
        ++rows_;
    }

    const std::vector<double>& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ----------------------------------------------------------------------------
// Dataset
// ----------------------------------------------------------------------------

struct Dataset {
    Matrix features;                         // N x F
    std::vector<ClassId> labels;             // length N, values in [0, n_classes)
    std::vector<std::string> feature_names;  // length F
    std::vector<std::string> class_names;    // length n_classes, unique, non-empty

    std::size_t n_rows() const { return features.rows(); }
    std::size_t n_features() const { return features.cols(); }
    std::size_t n_classes() const { return class_names.size(); }
};

/// Checks every Dataset invariant; returns one message per violation, with
/// row/column coordinates where applicable. Empty result means the dataset
/// is well-formed.
inline std::vector<std::string> validate_dataset(const Dataset& d) {
    std::vector<std::string> violations;
    const std::size_t n = d.class_names.size();

    if (d.features.rows() == 0)
        violations.push_back("dataset has no rows (N >= 1 required)");
    if (n < 2)
        violations.push_back("fewer than two classes (n = " + std::to_string(n) + ")");
    if (d.labels.size() != d.features.rows())
        violations.push_back("labels has " + std::to_string(d.labels.size()) +
                             " entries, features have " + std::to_string(d.features.rows()) +
                             " rows");
    if (!d.feature_names.empty() && d.feature_names.size() != d.features.cols())
        violations.push_back("feature_names has " + std::to_string(d.feature_names.size()) +
                             " entries, features have " + std::to_string(d.features.cols()) +
                             " columns");

    for (std::size_t r = 0; r < d.features.rows(); ++r)
        for (std::size_t c = 0; c < d.features.cols(); ++c)
            if (!std::isfinite(d.features(r, c)))
                violations.push_back("non-finite feature value at row " + std::to_string(r) +
                                     ", column " + std::to_string(c));

    for (std::size_t r = 0; r < d.labels.size(); ++r)
        if (d.labels[r] < 0 || static_cast<std::size_t>(d.labels[r]) >= n)
            violations.push_back("label " + std::to_string(d.labels[r]) +
                                 " out of range [0, " + std::to_string(n) + ") at row " +
                                 std::to_string(r));

    for (std::size_t i = 0; i < n; ++i) {
        if (d.class_names[i].empty())
            violations.push_back("empty class name at index " + std::to_string(i));
        for (std::size_t j = i + 1; j < n; ++j)
            if (d.class_names[i] == d.class_names[j])
                violations.push_back("duplicate class name \"" + d.class_names[i] +
                                     "\" at indices " + std::to_string(i) + " and " +
                                     std::to_string(j));
    }
    return violations;
}

/// Copies the given rows into a new Dataset; feature and class names carry
/// over unchanged, so label encoding stays aligned with the parent.
inline Dataset subset_rows(const Dataset& d, std::span<const int> rows) {
    Dataset out;
    out.feature_names = d.feature_names;
    out.class_names = d.class_names;
    out.features = Matrix(rows.size(), d.features.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = d.features.row(static_cast<std::size_t>(rows[i]));
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        out.labels.push_back(d.labels[static_cast<std::size_t>(rows[i])]);
    }
    return out;
}

// ----------------------------------------------------------------------------
// Prediction
// ----------------------------------------------------------------------------

struct Prediction {
    ClassId class_id = 0;
    double confidence = 0.0;
    std::vector<double> probabilities;  // sums to 1, class_id = argmax

    bool operator==(const Prediction&) const = default;
};

/// Builds a Prediction from a probability vector; argmax ties resolve to the
/// lowest class index.
inline Prediction make_prediction(std::vector<double> probabilities) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probabilities.size(); ++i)
        if (probabilities[i] > probabilities[best]) best = i;
    Prediction p;
    p.class_id = static_cast<ClassId>(best);
    p.confidence = probabilities.empty() ? 0.0 : probabilities[best];
    p.probabilities = std::move(probabilities);
    return p;
}

// ----------------------------------------------------------------------------
// LeaderMap
// ----------------------------------------------------------------------------

// Total map class id -> base-model slot; leaders.size() == n_classes.
struct LeaderMap {
    std::vector<ModelIndex> leaders;

    ModelIndex leader_of(ClassId c) const { return leaders[static_cast<std::size_t>(c)]; }
    std::size_t n_classes() const { return leaders.size(); }

    bool operator==(const LeaderMap&) const = default;
};

// ----------------------------------------------------------------------------
// Small utilities shared across modules
// ----------------------------------------------------------------------------

namespace detail {

// splitmix64; used to derive independent deterministic seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    return mix_seed(mix_seed(mix_seed(a) ^ b) ^ c);
}

// In-place numerically stable softmax.
inline void softmax(std::span<double> scores) {
    if (scores.empty()) return;
    const double m = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double& s : scores) {
        s = std::exp(s - m);
        sum += s;
    }
    for (double& s : scores) s /= sum;
}

// Integer ceil(frac * n) tolerant of floating-point noise just above an
// exact integer product (e.g. 0.2 * 10 evaluating to 2.0000000000000004).
inline std::size_t ceil_fraction(double frac, std::size_t n) {
    const double v = frac * static_cast<double>(n);
    const double fl = std::floor(v);
    if (v - fl <= 1e-9) return static_cast<std::size_t>(fl);
    return static_cast<std::size_t>(fl) + 1;
}

}  // namespace detail

}  // namespace lccde

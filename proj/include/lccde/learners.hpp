#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lccde/core.hpp"

namespace lccde {

// ----------------------------------------------------------------------------
// Configuration and basic types
// ----------------------------------------------------------------------------

// Base-learner slots: 0 = goss-leafwise, 1 = depthwise second-order,
// 2 = oblivious (symmetric). Enum values double as ModelIndex.
enum class Variant : int {
    GossLeafwise = 0,
    Depthwise = 1,
    Oblivious = 2,
};

inline Variant variant_of_slot(ModelIndex j) { return static_cast<Variant>(j); }

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::GossLeafwise: return "goss_leafwise";
        case Variant::Depthwise: return "depthwise";
        case Variant::Oblivious: return "oblivious";
    }
    return "unknown";
}

inline std::optional<Variant> variant_from_name(const std::string& s) {
    if (s == "goss_leafwise") return Variant::GossLeafwise;
    if (s == "depthwise") return Variant::Depthwise;
    if (s == "oblivious") return Variant::Oblivious;
    return std::nullopt;
}

struct BoosterConfig {
    int rounds = 100;
    double learning_rate = 0.1;
    int max_depth = 6;
    double l2_reg = 1.0;
    double min_child_hessian = 1.0;
    int max_leaves = 31;             // leaf-wise variant only
    double goss_top_fraction = 0.2;  // a: kept large-gradient fraction
    double goss_rand_fraction = 0.1; // b: resampled small-gradient fraction
    std::uint64_t seed = 0;

    void validate() const {
        if (rounds < 1) throw ConfigError("rounds must be positive");
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
        if (max_depth < 1) throw ConfigError("max_depth must be positive");
        if (!(l2_reg >= 0.0)) throw ConfigError("l2_reg must be >= 0");
        if (!(min_child_hessian >= 0.0)) throw ConfigError("min_child_hessian must be >= 0");
        if (max_leaves < 2) throw ConfigError("max_leaves must be >= 2");
        if (!(goss_top_fraction >= 0.0 && goss_top_fraction <= 1.0))
            throw ConfigError("goss_top_fraction must be in [0, 1]");
        if (!(goss_rand_fraction >= 0.0 && goss_rand_fraction <= 1.0))
            throw ConfigError("goss_rand_fraction must be in [0, 1]");
        if (goss_top_fraction + goss_rand_fraction > 1.0 + 1e-12)
            throw ConfigError("goss_top_fraction + goss_rand_fraction must be <= 1");
    }

    bool operator==(const BoosterConfig&) const = default;
};

// First/second-order softmax cross-entropy gradients: g = p - y, h = p(1 - p).
struct GradientPair {
    double g = 0.0;
    double h = 0.0;
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double leaf_weight = 0.0;   // already scaled by learning_rate

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root when non-empty
    int samples_used = 0;         // build-time sample count (diagnostics, not persisted)

    double predict(std::span<const double> x) const {
        if (nodes.empty()) return 0.0;
        std::size_t i = 0;
        while (!nodes[i].is_leaf()) {
            const TreeNode& nd = nodes[i];
            i = static_cast<std::size_t>(x[static_cast<std::size_t>(nd.feature)] < nd.threshold
                                             ? nd.left
                                             : nd.right);
        }
        return nodes[i].leaf_weight;
    }

    bool operator==(const Tree&) const = default;
};

struct TrainedForest {
    Variant variant = Variant::Depthwise;
    int rounds = 0;
    int n_classes = 0;
    int n_features = 0;
    std::vector<Tree> trees;         // rounds * n_classes; tree for (round r, class c) at r*n+c
    std::vector<double> base_score;  // length n_classes
    BoosterConfig config;
    double fit_seconds = 0.0;
    std::vector<double> training_loss;  // mean softmax cross-entropy after each round

    const Tree& tree(int round, int cls) const {
        return trees[static_cast<std::size_t>(round * n_classes + cls)];
    }
};

// ----------------------------------------------------------------------------
// Split search
// ----------------------------------------------------------------------------

struct SplitResult {
    double threshold = 0.0;
    double gain = 0.0;
};

namespace detail {

inline double split_score(double g, double h, double l2_reg) {
    const double denom = h + l2_reg;
    return denom > 0.0 ? (g * g) / denom : 0.0;
}

struct ScanBest {
    double threshold = 0.0;
    double gain = 0.0;
    bool found = false;
};

// Exact greedy split scan over an ascending-ordered sequence. Candidate
// thresholds are midpoints between distinct adjacent values; both children
// must reach min_child_hessian; only strictly positive gain counts. Strict
// improvement keeps the lowest threshold among equal-gain candidates.
template <typename ValueAt, typename GradAt>
ScanBest scan_best_split(std::size_t count, ValueAt&& value_at, GradAt&& grad_at, double l2_reg,
                         double min_child_hessian) {
    ScanBest best;
    if (count < 2) return best;
    double g_total = 0.0, h_total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const GradientPair gp = grad_at(i);
        g_total += gp.g;
        h_total += gp.h;
    }
    const double parent = split_score(g_total, h_total, l2_reg);
    double g_left = 0.0, h_left = 0.0;
    for (std::size_t i = 0; i + 1 < count; ++i) {
        const GradientPair gp = grad_at(i);
        g_left += gp.g;
        h_left += gp.h;
        const double v = value_at(i);
        const double v_next = value_at(i + 1);
        if (!(v_next > v)) continue;
        const double g_right = g_total - g_left;
        const double h_right = h_total - h_left;
        if (h_left < min_child_hessian || h_right < min_child_hessian) continue;
        const double gain = 0.5 * (split_score(g_left, h_left, l2_reg) +
                                   split_score(g_right, h_right, l2_reg) - parent);
        if (gain > best.gain) {
            best.threshold = 0.5 * (v + v_next);
            best.gain = gain;
            best.found = true;
        }
    }
    return best;
}

}  // namespace detail

/// Exact greedy split over pre-sorted values. Returns the midpoint threshold
/// maximizing the second-order gain
///   1/2 [G_L^2/(H_L+l2) + G_R^2/(H_R+l2) - (G_L+G_R)^2/(H_L+H_R+l2)]
/// subject to both children reaching min_child_hessian, or nullopt when no
/// candidate has positive gain.
inline std::optional<SplitResult> find_best_split(std::span<const double> sorted_values,
                                                  std::span<const GradientPair> gradients,
                                                  double l2_reg, double min_child_hessian) {
    if (sorted_values.size() != gradients.size())
        throw DimensionMismatchError("find_best_split: " + std::to_string(sorted_values.size()) +
                                     " values vs " + std::to_string(gradients.size()) +
                                     " gradient pairs");
    const auto best = detail::scan_best_split(
        sorted_values.size(), [&](std::size_t i) { return sorted_values[i]; },
        [&](std::size_t i) { return gradients[i]; }, l2_reg, min_child_hessian);
    if (!best.found) return std::nullopt;
    return SplitResult{best.threshold, best.gain};
}

// ----------------------------------------------------------------------------
// GOSS sampling
// ----------------------------------------------------------------------------

struct GossSample {
    std::vector<int> indices;     // ascending
    std::vector<double> weights;  // aligned with indices
};

/// Gradient-based one-side sampling: keep the ceil(a*N) largest-magnitude
/// gradients at weight 1, then draw ceil(b*N) of the remainder uniformly
/// without replacement at weight (1-a)/b. Deterministic given seed.
inline GossSample goss_sample(std::span<const double> gradient_magnitudes, double top_fraction,
                              double rand_fraction, std::uint64_t seed) {
    if (!(top_fraction >= 0.0) || !(rand_fraction >= 0.0) ||
        top_fraction + rand_fraction > 1.0 + 1e-12)
        throw ConfigError("goss_sample: need a >= 0, b >= 0, a + b <= 1");

    const std::size_t n = gradient_magnitudes.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double ma = gradient_magnitudes[static_cast<std::size_t>(a)];
        const double mb = gradient_magnitudes[static_cast<std::size_t>(b)];
        if (ma != mb) return ma > mb;
        return a < b;
    });

    const std::size_t n_top = std::min(detail::ceil_fraction(top_fraction, n), n);
    std::size_t n_rand = std::min(detail::ceil_fraction(rand_fraction, n), n - n_top);

    std::vector<std::pair<int, double>> picked;
    picked.reserve(n_top + n_rand);
    for (std::size_t i = 0; i < n_top; ++i) picked.emplace_back(order[i], 1.0);

    if (n_rand > 0) {
        const double w = (1.0 - top_fraction) / rand_fraction;
        std::vector<int> rest(order.begin() + static_cast<std::ptrdiff_t>(n_top), order.end());
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < n_rand; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, rest.size() - 1);
            std::swap(rest[i], rest[pick(rng)]);
            picked.emplace_back(rest[i], w);
        }
    }

    std::sort(picked.begin(), picked.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    GossSample out;
    out.indices.reserve(picked.size());
    out.weights.reserve(picked.size());
    for (const auto& [idx, w] : picked) {
        out.indices.push_back(idx);
        out.weights.push_back(w);
    }
    return out;
}

// ----------------------------------------------------------------------------
// Tree growth
// ----------------------------------------------------------------------------

namespace detail {

// Per-node working state: the node's rows plus, per feature, the same rows
// sorted by that feature's value. Children inherit sorted order by stable
// partition, so sorting happens once per tree at the root.
struct NodeFrame {
    std::vector<int> rows;                 // ascending row ids
    std::vector<std::vector<int>> order;   // [feature] -> rows sorted by value asc, row id asc
    double g_sum = 0.0;
    double h_sum = 0.0;
    int depth = 0;
};

inline NodeFrame make_root_frame(const Matrix& x, const std::vector<GradientPair>& grads,
                                 std::span<const int> rows) {
    NodeFrame f;
    f.rows.assign(rows.begin(), rows.end());
    f.order.resize(x.cols());
    for (std::size_t k = 0; k < x.cols(); ++k) {
        auto& ord = f.order[k];
        ord.assign(rows.begin(), rows.end());
        std::sort(ord.begin(), ord.end(), [&](int a, int b) {
            const double va = x(static_cast<std::size_t>(a), k);
            const double vb = x(static_cast<std::size_t>(b), k);
            if (va != vb) return va < vb;
            return a < b;
        });
    }
    for (int r : f.rows) {
        f.g_sum += grads[static_cast<std::size_t>(r)].g;
        f.h_sum += grads[static_cast<std::size_t>(r)].h;
    }
    return f;
}

struct FrameSplit {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
    bool found = false;
};

// Best (feature, threshold) for one node; ties fall to the lowest feature
// index, then the lowest threshold.
inline FrameSplit best_frame_split(const Matrix& x, const std::vector<GradientPair>& grads,
                                   const NodeFrame& f, double l2_reg, double min_child_hessian) {
    FrameSplit best;
    for (std::size_t k = 0; k < f.order.size(); ++k) {
        const auto& ord = f.order[k];
        const ScanBest res = scan_best_split(
            ord.size(), [&](std::size_t i) { return x(static_cast<std::size_t>(ord[i]), k); },
            [&](std::size_t i) { return grads[static_cast<std::size_t>(ord[i])]; }, l2_reg,
            min_child_hessian);
        if (res.found && res.gain > best.gain) {
            best.feature = static_cast<int>(k);
            best.threshold = res.threshold;
            best.gain = res.gain;
            best.found = true;
        }
    }
    return best;
}

inline std::pair<NodeFrame, NodeFrame> split_frame(const Matrix& x,
                                                   const std::vector<GradientPair>& grads,
                                                   NodeFrame&& f, int feature, double threshold) {
    NodeFrame l, r;
    l.depth = r.depth = f.depth + 1;
    const std::size_t kf = static_cast<std::size_t>(feature);
    auto goes_left = [&](int row) { return x(static_cast<std::size_t>(row), kf) < threshold; };
    for (int row : f.rows) (goes_left(row) ? l.rows : r.rows).push_back(row);
    l.order.resize(f.order.size());
    r.order.resize(f.order.size());
    for (std::size_t k = 0; k < f.order.size(); ++k) {
        for (int row : f.order[k]) (goes_left(row) ? l.order[k] : r.order[k]).push_back(row);
        f.order[k].clear();
        f.order[k].shrink_to_fit();
    }
    for (int row : l.rows) {
        l.g_sum += grads[static_cast<std::size_t>(row)].g;
        l.h_sum += grads[static_cast<std::size_t>(row)].h;
    }
    r.g_sum = f.g_sum - l.g_sum;
    r.h_sum = f.h_sum - l.h_sum;
    return {std::move(l), std::move(r)};
}

inline TreeNode make_leaf(double g_sum, double h_sum, double l2_reg, double learning_rate) {
    TreeNode leaf;
    const double denom = h_sum + l2_reg;
    leaf.leaf_weight = denom > 0.0 ? -g_sum / denom * learning_rate : 0.0;
    return leaf;
}

// Level-wise growth to max_depth; every node splits independently when a
// positive-gain split exists.
inline Tree grow_depthwise(const Matrix& x, const std::vector<GradientPair>& grads,
                           std::span<const int> rows, const BoosterConfig& cfg) {
    Tree tree;
    tree.samples_used = static_cast<int>(rows.size());
    tree.nodes.emplace_back();

    struct Item {
        NodeFrame frame;
        std::size_t node_index;
    };
    std::vector<Item> frontier;
    frontier.push_back({make_root_frame(x, grads, rows), 0});

    while (!frontier.empty()) {
        std::vector<Item> next;
        for (auto& item : frontier) {
            NodeFrame& f = item.frame;
            FrameSplit s;
            if (f.depth < cfg.max_depth)
                s = best_frame_split(x, grads, f, cfg.l2_reg, cfg.min_child_hessian);
            if (!s.found) {
                tree.nodes[item.node_index] =
                    make_leaf(f.g_sum, f.h_sum, cfg.l2_reg, cfg.learning_rate);
                continue;
            }
            auto [l, r] = split_frame(x, grads, std::move(f), s.feature, s.threshold);
            TreeNode node;
            node.feature = s.feature;
            node.threshold = s.threshold;
            node.left = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            node.right = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes[item.node_index] = node;
            next.push_back({std::move(l), static_cast<std::size_t>(node.left)});
            next.push_back({std::move(r), static_cast<std::size_t>(node.right)});
        }
        frontier = std::move(next);
    }
    return tree;
}

// Best-first growth bounded by max_leaves (no depth cap). Gain ties fall to
// the earliest-created node.
inline Tree grow_leafwise(const Matrix& x, const std::vector<GradientPair>& grads,
                          std::span<const int> rows, const BoosterConfig& cfg) {
    Tree tree;
    tree.samples_used = static_cast<int>(rows.size());
    tree.nodes.emplace_back();

    struct Open {
        NodeFrame frame;
        std::size_t node_index;
        FrameSplit split;
        int created;
    };
    std::vector<Open> open;
    {
        NodeFrame root = make_root_frame(x, grads, rows);
        FrameSplit s = best_frame_split(x, grads, root, cfg.l2_reg, cfg.min_child_hessian);
        open.push_back({std::move(root), 0, s, 0});
    }

    int n_leaves = 1;
    int created = 0;
    while (n_leaves < cfg.max_leaves) {
        std::size_t pick = open.size();
        for (std::size_t i = 0; i < open.size(); ++i) {
            if (!open[i].split.found) continue;
            if (pick == open.size() || open[i].split.gain > open[pick].split.gain ||
                (open[i].split.gain == open[pick].split.gain &&
                 open[i].created < open[pick].created))
                pick = i;
        }
        if (pick == open.size()) break;

        Open cur = std::move(open[pick]);
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
        auto [l, r] =
            split_frame(x, grads, std::move(cur.frame), cur.split.feature, cur.split.threshold);

        TreeNode node;
        node.feature = cur.split.feature;
        node.threshold = cur.split.threshold;
        node.left = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        node.right = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[cur.node_index] = node;

        FrameSplit ls = best_frame_split(x, grads, l, cfg.l2_reg, cfg.min_child_hessian);
        FrameSplit rs = best_frame_split(x, grads, r, cfg.l2_reg, cfg.min_child_hessian);
        open.push_back({std::move(l), static_cast<std::size_t>(node.left), ls, ++created});
        open.push_back({std::move(r), static_cast<std::size_t>(node.right), rs, ++created});
        ++n_leaves;
    }

    for (auto& o : open)
        tree.nodes[o.node_index] =
            make_leaf(o.frame.g_sum, o.frame.h_sum, cfg.l2_reg, cfg.learning_rate);
    return tree;
}

// Symmetric growth: one shared (feature, threshold) per depth level, chosen to
// maximize the total gain summed across all current leaves, applied to every
// leaf. Stops early when no level split improves the total loss.
inline Tree grow_oblivious(const Matrix& x, const std::vector<GradientPair>& grads,
                           std::span<const int> rows, int max_depth, double l2_reg,
                           double learning_rate) {
    Tree tree;
    tree.samples_used = static_cast<int>(rows.size());
    tree.nodes.emplace_back();

    const std::size_t n_features = x.cols();
    std::vector<std::vector<int>> order(n_features);
    for (std::size_t k = 0; k < n_features; ++k) {
        auto& ord = order[k];
        ord.assign(rows.begin(), rows.end());
        std::sort(ord.begin(), ord.end(), [&](int a, int b) {
            const double va = x(static_cast<std::size_t>(a), k);
            const double vb = x(static_cast<std::size_t>(b), k);
            if (va != vb) return va < vb;
            return a < b;
        });
    }

    std::vector<int> leaf_of(x.rows(), 0);  // frontier slot of each row
    std::vector<std::size_t> frontier{0};
    std::vector<double> g(1, 0.0), h(1, 0.0);
    for (int row : rows) {
        g[0] += grads[static_cast<std::size_t>(row)].g;
        h[0] += grads[static_cast<std::size_t>(row)].h;
    }

    for (int depth = 0; depth < max_depth; ++depth) {
        const std::size_t n_leaves = frontier.size();
        double base = 0.0;
        for (std::size_t l = 0; l < n_leaves; ++l) base += split_score(g[l], h[l], l2_reg);

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 0.0;
        bool found = false;
        std::vector<double> gl(n_leaves), hl(n_leaves);

        for (std::size_t k = 0; k < n_features; ++k) {
            std::fill(gl.begin(), gl.end(), 0.0);
            std::fill(hl.begin(), hl.end(), 0.0);
            double total = base;  // all samples on the right initially
            const auto& ord = order[k];
            for (std::size_t i = 0; i < ord.size(); ++i) {
                const int row = ord[i];
                const auto l = static_cast<std::size_t>(leaf_of[static_cast<std::size_t>(row)]);
                total -= split_score(gl[l], hl[l], l2_reg) +
                         split_score(g[l] - gl[l], h[l] - hl[l], l2_reg);
                gl[l] += grads[static_cast<std::size_t>(row)].g;
                hl[l] += grads[static_cast<std::size_t>(row)].h;
                total += split_score(gl[l], hl[l], l2_reg) +
                         split_score(g[l] - gl[l], h[l] - hl[l], l2_reg);
                if (i + 1 < ord.size()) {
                    const double v = x(static_cast<std::size_t>(row), k);
                    const double v_next = x(static_cast<std::size_t>(ord[i + 1]), k);
                    if (v_next > v) {
                        const double gain = 0.5 * (total - base);
                        if (gain > best_gain) {
                            best_feature = static_cast<int>(k);
                            best_threshold = 0.5 * (v + v_next);
                            best_gain = gain;
                            found = true;
                        }
                    }
                }
            }
        }
        if (!found) break;

        std::vector<std::size_t> next(2 * n_leaves);
        for (std::size_t l = 0; l < n_leaves; ++l) {
            TreeNode node;
            node.feature = best_feature;
            node.threshold = best_threshold;
            node.left = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            node.right = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes[frontier[l]] = node;
            next[2 * l] = static_cast<std::size_t>(node.left);
            next[2 * l + 1] = static_cast<std::size_t>(node.right);
        }
        std::vector<double> g2(2 * n_leaves, 0.0), h2(2 * n_leaves, 0.0);
        for (int row : rows) {
            const auto ri = static_cast<std::size_t>(row);
            const auto l = static_cast<std::size_t>(leaf_of[ri]);
            const bool left = x(ri, static_cast<std::size_t>(best_feature)) < best_threshold;
            const std::size_t child = 2 * l + (left ? 0 : 1);
            leaf_of[ri] = static_cast<int>(child);
            g2[child] += grads[ri].g;
            h2[child] += grads[ri].h;
        }
        frontier = std::move(next);
        g = std::move(g2);
        h = std::move(h2);
    }

    for (std::size_t l = 0; l < frontier.size(); ++l)
        tree.nodes[frontier[l]] = make_leaf(g[l], h[l], l2_reg, learning_rate);
    return tree;
}

}  // namespace detail

/// Grows one symmetric tree over all rows of the feature matrix: every depth
/// level shares a single (feature, threshold) pair, the one minimizing the
/// total second-order loss across all current leaves.
inline Tree grow_oblivious_tree(const Matrix& features, std::span<const GradientPair> gradients,
                                int max_depth, double l2_reg, double learning_rate = 1.0) {
    if (gradients.size() != features.rows())
        throw DimensionMismatchError("grow_oblivious_tree: " + std::to_string(gradients.size()) +
                                     " gradient pairs for " + std::to_string(features.rows()) +
                                     " rows");
    std::vector<int> rows(features.rows());
    std::iota(rows.begin(), rows.end(), 0);
    std::vector<GradientPair> g(gradients.begin(), gradients.end());
    return detail::grow_oblivious(features, g, rows, max_depth, l2_reg, learning_rate);
}

// ----------------------------------------------------------------------------
// Boosting
// ----------------------------------------------------------------------------

/// Trains one boosted forest: one regression tree per class per round with a
/// softmax link. Deterministic given (config.seed, data).
inline TrainedForest fit_forest(const BoosterConfig& config, Variant variant, const Dataset& d) {
    config.validate();
    {
        const auto violations = validate_dataset(d);
        if (!violations.empty())
            throw InvalidDatasetError("invalid dataset: " + violations.front());
    }
    if (d.n_features() == 0) throw InvalidDatasetError("invalid dataset: no feature columns");

    const std::size_t n_rows = d.n_rows();
    const std::size_t n_classes = d.n_classes();
    {
        std::vector<char> seen(n_classes, 0);
        std::size_t distinct = 0;
        for (ClassId l : d.labels)
            if (!seen[static_cast<std::size_t>(l)]) {
                seen[static_cast<std::size_t>(l)] = 1;
                ++distinct;
            }
        if (distinct < 2)
            throw InvalidDatasetError("degenerate labels: training data contains a single class");
    }

    TrainedForest forest;
    forest.variant = variant;
    forest.rounds = config.rounds;
    forest.n_classes = static_cast<int>(n_classes);
    forest.n_features = static_cast<int>(d.n_features());
    forest.config = config;
    forest.base_score.assign(n_classes, 0.0);
    forest.trees.reserve(static_cast<std::size_t>(config.rounds) * n_classes);

    const auto t_start = std::chrono::steady_clock::now();

    std::vector<double> scores(n_rows * n_classes, 0.0);
    std::vector<double> probs(n_rows * n_classes);
    std::vector<GradientPair> grads(n_rows);
    std::vector<GradientPair> weighted(n_rows);
    std::vector<double> mags(n_rows);
    std::vector<int> all_rows(n_rows);
    std::iota(all_rows.begin(), all_rows.end(), 0);

    for (int round = 0; round < config.rounds; ++round) {
        probs = scores;
        for (std::size_t i = 0; i < n_rows; ++i)
            detail::softmax(std::span<double>(probs.data() + i * n_classes, n_classes));

        for (std::size_t c = 0; c < n_classes; ++c) {
            for (std::size_t i = 0; i < n_rows; ++i) {
                const double p = probs[i * n_classes + c];
                const double y = d.labels[i] == static_cast<ClassId>(c) ? 1.0 : 0.0;
                grads[i] = {p - y, p * (1.0 - p)};
            }

            Tree tree;
            switch (variant) {
                case Variant::Depthwise:
                    tree = detail::grow_depthwise(d.features, grads, all_rows, config);
                    break;
                case Variant::Oblivious:
                    tree = detail::grow_oblivious(d.features, grads, all_rows, config.max_depth,
                                                  config.l2_reg, config.learning_rate);
                    break;
                case Variant::GossLeafwise: {
                    for (std::size_t i = 0; i < n_rows; ++i) mags[i] = std::abs(grads[i].g);
                    const GossSample sample = goss_sample(
                        mags, config.goss_top_fraction, config.goss_rand_fraction,
                        detail::mix_seed(config.seed, static_cast<std::uint64_t>(round), c));
                    weighted = grads;
                    for (std::size_t i = 0; i < sample.indices.size(); ++i) {
                        auto& gp = weighted[static_cast<std::size_t>(sample.indices[i])];
                        gp.g *= sample.weights[i];
                        gp.h *= sample.weights[i];
                    }
                    tree = detail::grow_leafwise(d.features, weighted, sample.indices, config);
                    break;
                }
            }

            for (std::size_t i = 0; i < n_rows; ++i)
                scores[i * n_classes + c] += tree.predict(d.features.row(i));
            forest.trees.push_back(std::move(tree));
        }

        double loss = 0.0;
        std::vector<double> row(n_classes);
        for (std::size_t i = 0; i < n_rows; ++i) {
            std::copy_n(scores.data() + i * n_classes, n_classes, row.data());
            detail::softmax(row);
            loss -= std::log(std::max(row[static_cast<std::size_t>(d.labels[i])], 1e-15));
        }
        forest.training_loss.push_back(loss / static_cast<double>(n_rows));
    }

    forest.fit_seconds = std::max(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count(), 1e-9);
    return forest;
}

/// Softmax over per-class accumulated leaf scores for one feature row.
inline Prediction predict_proba(const TrainedForest& f, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(f.n_features))
        throw DimensionMismatchError("predict_proba: expected " + std::to_string(f.n_features) +
                                     " features, got " + std::to_string(x.size()));
    std::vector<double> scores(f.base_score.begin(), f.base_score.end());
    const std::size_t n = scores.size();
    for (std::size_t t = 0; t < f.trees.size(); ++t) scores[t % n] += f.trees[t].predict(x);
    detail::softmax(scores);
    return make_prediction(std::move(scores));
}

}  // namespace lccde

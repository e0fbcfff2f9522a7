#ifndef TRACKDIFF_GBDT_HPP_
#define TRACKDIFF_GBDT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "trackdiff/errors.hpp"
#include "trackdiff/features.hpp"

namespace trackdiff {

struct Dataset {
    std::vector<std::pair<FeatureVector, int>> rows;  // label in {0,1}
    std::string registry_id;

    void add(FeatureVector v, int label) {
        if (!registry_id.empty() && v.registry_id != registry_id)
            throw RegistryMismatch("row registry '" + v.registry_id + "' vs dataset '" + registry_id + "'");
        if (registry_id.empty()) registry_id = v.registry_id;
        rows.emplace_back(std::move(v), label ? 1 : 0);
    }

    std::size_t size() const { return rows.size(); }
    std::size_t width() const { return rows.empty() ? 0 : rows[0].first.values.size(); }
};

// One node of a regression tree; leaves have feature == -1.
// Traversal: x[feature] <= threshold goes left.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double leaf = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;  // node 0 is the root

    double score(const std::vector<double>& x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const TreeNode& n = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].leaf;
    }
};

// Boosted ensemble with logistic loss. Leaf values carry the learning
// rate already, so a prediction is sigmoid(base_score + sum of leaves).
struct Model {
    std::vector<Tree> trees;
    double learning_rate = 0.1;
    double base_score = 0.0;
    std::string registry_id;
    std::uint64_t seed = 0;
};

struct TrainParams {
    int trees = 200;
    int depth = 6;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace gbdt_detail {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

// Exact greedy split on squared-error gain of the Newton residuals.
// Ties resolve to the lowest feature index, then the smallest threshold,
// keeping training deterministic.
inline SplitChoice best_split(const std::vector<const std::vector<double>*>& x,
                              const std::vector<double>& grad, const std::vector<double>& hess,
                              const std::vector<int>& node_rows, std::size_t n_features) {
    SplitChoice best;
    double g_total = 0, h_total = 0;
    for (int row : node_rows) {
        g_total += grad[static_cast<std::size_t>(row)];
        h_total += hess[static_cast<std::size_t>(row)];
    }
    if (h_total <= 0) return best;
    double parent_score = g_total * g_total / h_total;

    std::vector<std::pair<double, int>> order;
    order.reserve(node_rows.size());
    for (std::size_t f = 0; f < n_features; ++f) {
        order.clear();
        for (int row : node_rows)
            order.emplace_back((*x[static_cast<std::size_t>(row)])[f], row);
        std::sort(order.begin(), order.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        double g_left = 0, h_left = 0;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
            int row = order[i].second;
            g_left += grad[static_cast<std::size_t>(row)];
            h_left += hess[static_cast<std::size_t>(row)];
            if (order[i].first == order[i + 1].first) continue;  // no cut between equals
            double g_right = g_total - g_left, h_right = h_total - h_left;
            if (h_left <= 0 || h_right <= 0) continue;
            double gain = g_left * g_left / h_left + g_right * g_right / h_right - parent_score;
            if (gain > best.gain + 1e-12) {
                best.feature = static_cast<int>(f);
                best.threshold = (order[i].first + order[i + 1].first) / 2.0;
                best.gain = gain;
            }
        }
    }
    return best;
}

inline int grow_node(Tree& tree, const std::vector<const std::vector<double>*>& x,
                     const std::vector<double>& grad, const std::vector<double>& hess,
                     std::vector<int> node_rows, int depth_left, double learning_rate) {
    double g = 0, h = 0;
    for (int row : node_rows) {
        g += grad[static_cast<std::size_t>(row)];
        h += hess[static_cast<std::size_t>(row)];
    }

    SplitChoice split;
    if (depth_left > 0 && node_rows.size() >= 2)
        split = best_split(x, grad, hess, node_rows, (*x[0]).size());

    int index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (split.feature < 0) {
        tree.nodes[static_cast<std::size_t>(index)].leaf = h > 0 ? learning_rate * g / h : 0.0;
        return index;
    }

    std::vector<int> left_rows, right_rows;
    for (int row : node_rows) {
        if ((*x[static_cast<std::size_t>(row)])[static_cast<std::size_t>(split.feature)] <= split.threshold)
            left_rows.push_back(row);
        else
            right_rows.push_back(row);
    }
    int left = grow_node(tree, x, grad, hess, std::move(left_rows), depth_left - 1, learning_rate);
    int right = grow_node(tree, x, grad, hess, std::move(right_rows), depth_left - 1, learning_rate);
    TreeNode& n = tree.nodes[static_cast<std::size_t>(index)];
    n.feature = split.feature;
    n.threshold = split.threshold;
    n.left = left;
    n.right = right;
    return index;
}

}  // namespace gbdt_detail

// Deterministic boosting: (data order, params, seed) fully determine the
// model. All rows are used every round; no subsampling.
inline Model train(const Dataset& data, const TrainParams& params = {}) {
    if (data.rows.size() < 2) throw DegenerateDataset("need at least 2 rows");
    std::size_t positives = 0;
    for (const auto& [v, label] : data.rows) positives += label;
    if (positives == 0 || positives == data.rows.size())
        throw DegenerateDataset("single-class dataset");

    const std::size_t n = data.rows.size();
    std::vector<const std::vector<double>*> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = &data.rows[i].first.values;
        y[i] = data.rows[i].second;
    }

    Model model;
    model.registry_id = data.registry_id;
    model.learning_rate = params.learning_rate;
    model.seed = params.seed;
    double prior = std::clamp(static_cast<double>(positives) / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
    model.base_score = std::log(prior / (1.0 - prior));

    std::vector<double> margin(n, model.base_score);
    std::vector<double> grad(n), hess(n);
    std::vector<int> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0);

    for (int round = 0; round < params.trees; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            double p = sigmoid(margin[i]);
            grad[i] = y[i] - p;         // negative gradient of log loss
            hess[i] = p * (1.0 - p);
        }
        Tree tree;
        gbdt_detail::grow_node(tree, x, grad, hess, all_rows, params.depth, params.learning_rate);
        for (std::size_t i = 0; i < n; ++i) margin[i] += tree.score(*x[i]);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

inline double predict(const Model& model, const FeatureVector& v) {
    if (v.registry_id != model.registry_id)
        throw RegistryMismatch("vector registry '" + v.registry_id + "' vs model '" +
                               model.registry_id + "'");
    double z = model.base_score;
    for (const Tree& tree : model.trees) z += tree.score(v.values);
    return sigmoid(z);
}

namespace gbdt_detail {

inline double f1_score(const std::vector<int>& truth, const std::vector<int>& predicted) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        tp += truth[i] == 1 && predicted[i] == 1;
        fp += truth[i] == 0 && predicted[i] == 1;
        fn += truth[i] == 1 && predicted[i] == 0;
    }
    if (tp == 0 && fp == 0 && fn == 0) return 1.0;
    return 2.0 * tp / (2.0 * tp + fp + fn);
}

}  // namespace gbdt_detail

struct CrossValidation {
    double f1_mean = 0.0;
    double f1_std = 0.0;
    std::vector<double> fold_f1;
};

// Stratified k-fold with a seeded shuffle; per-fold F1 at threshold 0.5.
inline CrossValidation cross_validate(const Dataset& data, int folds, const TrainParams& params,
                                      std::uint64_t seed) {
    if (folds < 2) throw DegenerateFold("folds must be >= 2");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < data.rows.size(); ++i)
        (data.rows[i].second ? pos : neg).push_back(i);

    std::mt19937_64 rng(seed);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);

    std::vector<std::vector<std::size_t>> fold_rows(static_cast<std::size_t>(folds));
    std::size_t turn = 0;
    for (std::size_t i : pos) fold_rows[turn++ % folds].push_back(i);
    for (std::size_t i : neg) fold_rows[turn++ % folds].push_back(i);

    CrossValidation out;
    for (int f = 0; f < folds; ++f) {
        Dataset fit;
        std::vector<int> truth, predicted;
        for (int g = 0; g < folds; ++g) {
            if (g == f) continue;
            for (std::size_t i : fold_rows[static_cast<std::size_t>(g)])
                fit.add(data.rows[i].first, data.rows[i].second);
        }
        if (fold_rows[static_cast<std::size_t>(f)].empty())
            throw DegenerateFold("fold " + std::to_string(f) + " is empty");
        Model model;
        try {
            model = train(fit, params);
        } catch (const DegenerateDataset& e) {
            throw DegenerateFold("training split of fold " + std::to_string(f) +
                                 " is degenerate: " + e.what());
        }
        for (std::size_t i : fold_rows[static_cast<std::size_t>(f)]) {
            truth.push_back(data.rows[i].second);
            predicted.push_back(predict(model, data.rows[i].first) > 0.5 ? 1 : 0);
        }
        out.fold_f1.push_back(gbdt_detail::f1_score(truth, predicted));
    }
    for (double v : out.fold_f1) out.f1_mean += v;
    out.f1_mean /= static_cast<double>(folds);
    double var = 0;
    for (double v : out.fold_f1) var += (v - out.f1_mean) * (v - out.f1_mean);
    out.f1_std = std::sqrt(var / static_cast<double>(folds));
    return out;
}

struct Importances {
    std::vector<double> mean;  // accuracy drop per feature
    std::vector<double> std_dev;
};

// Permutation feature importance with accuracy as the metric. A feature no
// tree ever splits on scores exactly zero: shuffling it cannot move any
// prediction.
inline Importances permutation_importance(const Model& model, const Dataset& data, int repeats,
                                          std::uint64_t seed) {
    if (data.rows.empty()) throw EmptyEvaluation("no rows");
    std::size_t n = data.rows.size();
    std::size_t width = data.width();

    auto accuracy_of = [&](const std::vector<std::vector<double>>& columns) {
        int correct = 0;
        FeatureVector v;
        v.registry_id = model.registry_id;
        v.values.resize(width);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t f = 0; f < width; ++f) v.values[f] = columns[f][i];
            int label = predict(model, v) > 0.5 ? 1 : 0;
            correct += label == data.rows[i].second;
        }
        return static_cast<double>(correct) / static_cast<double>(n);
    };

    std::vector<std::vector<double>> columns(width, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < width; ++f) columns[f][i] = data.rows[i].first.values[f];
    double baseline = accuracy_of(columns);

    std::set<int> used_features;
    for (const Tree& tree : model.trees)
        for (const TreeNode& node : tree.nodes)
            if (node.feature >= 0) used_features.insert(node.feature);

    Importances out;
    out.mean.assign(width, 0.0);
    out.std_dev.assign(width, 0.0);
    for (std::size_t f = 0; f < width; ++f) {
        if (!used_features.contains(static_cast<int>(f))) continue;  // exactly zero
        std::vector<double> drops;
        for (int r = 0; r < repeats; ++r) {
            std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (f + 1) + static_cast<std::uint64_t>(r)));
            std::vector<double> saved = columns[f];
            std::shuffle(columns[f].begin(), columns[f].end(), rng);
            drops.push_back(baseline - accuracy_of(columns));
            columns[f] = std::move(saved);
        }
        double mean = 0;
        for (double d : drops) mean += d;
        mean /= static_cast<double>(repeats);
        double var = 0;
        for (double d : drops) var += (d - mean) * (d - mean);
        out.mean[f] = mean;
        out.std_dev[f] = std::sqrt(var / static_cast<double>(repeats));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Persistence: versioned JSON tree dump. Doubles survive the round trip
// exactly, so a reloaded model predicts identically.

inline constexpr int kModelFormatVersion = 1;

inline json model_to_json(const Model& model) {
    json trees = json::array();
    for (const Tree& tree : model.trees) {
        json nodes = json::array();
        for (const TreeNode& n : tree.nodes)
            nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.leaf}));
        trees.push_back(json{{"nodes", std::move(nodes)}});
    }
    return json{{"format_version", kModelFormatVersion},
                {"registry_id", model.registry_id},
                {"base_score", model.base_score},
                {"learning_rate", model.learning_rate},
                {"seed", model.seed},
                {"trees", std::move(trees)}};
}

inline void save_model(const Model& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(path.string() + ": cannot write");
    out << model_to_json(model).dump(2) << '\n';
}

inline Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CorruptModel(path.string() + ": cannot open");
    json root;
    try {
        in >> root;
        if (root.at("format_version").get<int>() != kModelFormatVersion)
            throw CorruptModel(path.string() + ": unsupported format version");
        Model model;
        model.registry_id = root.at("registry_id").get<std::string>();
        model.base_score = root.at("base_score").get<double>();
        model.learning_rate = root.at("learning_rate").get<double>();
        model.seed = root.at("seed").get<std::uint64_t>();
        for (const json& tj : root.at("trees")) {
            Tree tree;
            for (const json& nj : tj.at("nodes")) {
                if (!nj.is_array() || nj.size() != 5)
                    throw CorruptModel(path.string() + ": bad node record");
                TreeNode n;
                n.feature = nj[0].get<int>();
                n.threshold = nj[1].get<double>();
                n.left = nj[2].get<int>();
                n.right = nj[3].get<int>();
                n.leaf = nj[4].get<double>();
                tree.nodes.push_back(n);
            }
            if (tree.nodes.empty()) throw CorruptModel(path.string() + ": empty tree");
            for (const TreeNode& n : tree.nodes)
                if (n.feature >= 0 &&
                    (n.left < 0 || n.right < 0 ||
                     static_cast<std::size_t>(n.left) >= tree.nodes.size() ||
                     static_cast<std::size_t>(n.right) >= tree.nodes.size()))
                    throw CorruptModel(path.string() + ": child index out of range");
            model.trees.push_back(std::move(tree));
        }
        return model;
    } catch (const CorruptModel&) {
        throw;
    } catch (const std::exception& e) {
        throw CorruptModel(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Dataset CSV: header row of registry feature names plus a final "label"
// column.

inline void save_dataset_csv(const Dataset& data, const FeatureRegistry& reg,
                             const std::filesystem::path& path) {
    if (!data.rows.empty() && data.registry_id != reg.id())
        throw RegistryMismatch("dataset registry '" + data.registry_id + "' vs '" + reg.id() + "'");
    std::ofstream out(path);
    if (!out) throw Error(path.string() + ": cannot write");
    for (std::size_t i = 0; i < reg.size(); ++i) out << '"' << reg.at(i).name << "\",";
    out << "label\n";
    out.precision(17);
    for (const auto& [v, label] : data.rows) {
        for (double value : v.values) out << value << ',';
        out << label << '\n';
    }
}

inline Dataset load_dataset_csv(const std::filesystem::path& path, const FeatureRegistry& reg) {
    std::ifstream in(path);
    if (!in) throw Error(path.string() + ": cannot open");
    std::string header;
    if (!std::getline(in, header)) throw Error(path.string() + ": empty file");

    Dataset data;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        std::vector<std::string> cells = split(line, ',');
        if (cells.size() != reg.size() + 1)
            throw Error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(reg.size() + 1) + " columns, got " + std::to_string(cells.size()));
        FeatureVector v;
        v.registry_id = reg.id();
        v.values.reserve(reg.size());
        for (std::size_t i = 0; i < reg.size(); ++i) v.values.push_back(std::stod(cells[i]));
        data.add(std::move(v), std::stoi(cells.back()));
    }
    return data;
}

}  // namespace trackdiff

#endif  // TRACKDIFF_GBDT_HPP_

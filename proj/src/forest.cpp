#include "mrseq/forest.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

namespace mrseq::forest {

namespace {

std::array<double, kNumClasses> count_classes(const std::vector<int>& y,
                                              const std::vector<int>& indices) {
  std::array<double, kNumClasses> counts{};
  for (int i : indices) counts[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])] += 1.0;
  return counts;
}

double total(const std::array<double, kNumClasses>& counts) {
  double t = 0.0;
  for (double c : counts) t += c;
  return t;
}

struct SplitChoice {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

struct TreeBuilder {
  const std::vector<feat::FeatureVector>& x;
  const std::vector<int>& y;
  const ForestConfig& config;
  SeededRng& rng;
  DecisionTree tree;

  // features_per_split distinct feature indices, returned ascending so the
  // candidate scan order (and therefore tie-breaking) is stable.
  std::vector<int> sample_features() {
    std::array<int, feat::kFeatureDim> all;
    for (int i = 0; i < feat::kFeatureDim; ++i) all[static_cast<std::size_t>(i)] = i;
    int take = std::min(config.features_per_split, feat::kFeatureDim);
    for (int i = 0; i < take; ++i) {
      std::size_t j = static_cast<std::size_t>(i) +
                      static_cast<std::size_t>(rng.next_below(
                          static_cast<std::uint64_t>(feat::kFeatureDim - i)));
      std::swap(all[static_cast<std::size_t>(i)], all[j]);
    }
    std::vector<int> out(all.begin(), all.begin() + take);
    std::sort(out.begin(), out.end());
    return out;
  }

  SplitChoice best_split(const std::vector<int>& indices,
                         const std::array<double, kNumClasses>& counts) {
    const double n = total(counts);
    const double parent = gini(counts);
    SplitChoice best;

    for (int f : sample_features()) {
      std::vector<double> values;
      values.reserve(indices.size());
      for (int i : indices) values.push_back(x[static_cast<std::size_t>(i)][f]);
      std::sort(values.begin(), values.end());
      values.erase(std::unique(values.begin(), values.end()), values.end());
      if (values.size() < 2) continue;

      for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        double threshold = 0.5 * (values[k] + values[k + 1]);
        std::array<double, kNumClasses> left{};
        double nl = 0.0;
        for (int i : indices) {
          if (x[static_cast<std::size_t>(i)][f] <= threshold) {
            left[static_cast<std::size_t>(y[static_cast<std::size_t>(i)])] += 1.0;
            nl += 1.0;
          }
        }
        double nr = n - nl;
        // Children must be non-empty even under a zero min_samples_leaf, or
        // leaves could end up with all-zero counts.
        double min_leaf = std::max(1, config.min_samples_leaf);
        if (nl < min_leaf || nr < min_leaf) continue;
        std::array<double, kNumClasses> right{};
        for (std::size_t c = 0; c < kNumClasses; ++c) right[c] = counts[c] - left[c];
        double gain = parent - (nl * gini(left) + nr * gini(right)) / n;
        if (gain > best.gain + 1e-12) {
          best.found = true;
          best.feature = f;
          best.threshold = threshold;
          best.gain = gain;
        }
      }
    }
    if (best.gain <= 1e-12) best.found = false;
    return best;
  }

  int build(const std::vector<int>& indices, int depth) {
    auto counts = count_classes(y, indices);
    bool pure = false;
    for (double c : counts)
      if (c == total(counts)) pure = true;

    int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    if (pure || depth >= config.max_depth ||
        static_cast<int>(indices.size()) < 2 * config.min_samples_leaf) {
      tree.nodes[static_cast<std::size_t>(node_id)].counts = counts;
      return node_id;
    }

    SplitChoice split = best_split(indices, counts);
    if (!split.found) {
      tree.nodes[static_cast<std::size_t>(node_id)].counts = counts;
      return node_id;
    }

    std::vector<int> left_idx, right_idx;
    for (int i : indices) {
      if (x[static_cast<std::size_t>(i)][split.feature] <= split.threshold)
        left_idx.push_back(i);
      else
        right_idx.push_back(i);
    }
    int left = build(left_idx, depth + 1);
    int right = build(right_idx, depth + 1);
    TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return node_id;
  }
};

}  // namespace

double gini(const std::array<double, kNumClasses>& counts) {
  double n = total(counts);
  if (n <= 0.0) throw EmptyNode("gini of an empty node");
  double sum_sq = 0.0;
  for (double c : counts) {
    double p = c / n;
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

RandomForest fit_forest(const std::vector<feat::FeatureVector>& x, const std::vector<int>& y,
                        const ForestConfig& config, std::uint64_t seed) {
  if (x.size() != y.size()) throw ShapeMismatch("feature/label counts differ");
  if (x.size() < 2) throw DegenerateData("need at least 2 training examples");
  std::set<int> classes(y.begin(), y.end());
  for (int c : classes)
    if (c < 0 || c >= static_cast<int>(kNumClasses))
      throw BadLabel("label " + std::to_string(c) + " outside class range");
  if (classes.size() < 2) throw DegenerateData("need at least 2 distinct classes");

  RandomForest model;
  model.config = config;
  model.seed = seed;
  model.trees.resize(static_cast<std::size_t>(config.n_trees));

  const std::size_t n = x.size();
  parallel_for(static_cast<std::size_t>(config.n_trees), [&](std::size_t t) {
    SeededRng rng(SeededRng::derive(seed, t));
    std::vector<int> sample(n);
    for (std::size_t i = 0; i < n; ++i)
      sample[i] = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
    std::sort(sample.begin(), sample.end());

    TreeBuilder builder{x, y, config, rng, {}};
    builder.build(sample, 0);
    model.trees[t] = std::move(builder.tree);
  });
  return model;
}

Eigen::Vector4d predict_tree(const DecisionTree& tree, const feat::FeatureVector& fv) {
  const TreeNode* node = &tree.nodes.at(0);
  while (!node->is_leaf()) {
    int next = fv[node->feature] <= node->threshold ? node->left : node->right;
    node = &tree.nodes.at(static_cast<std::size_t>(next));
  }
  double n = 0.0;
  for (double c : node->counts) n += c;
  Eigen::Vector4d probs = Eigen::Vector4d::Zero();
  for (std::size_t c = 0; c < kNumClasses; ++c) probs[static_cast<Eigen::Index>(c)] = node->counts[c] / n;
  return probs;
}

Eigen::Vector4d predict_forest(const RandomForest& model, const feat::FeatureVector& fv) {
  Eigen::Vector4d sum = Eigen::Vector4d::Zero();
  for (const auto& tree : model.trees) sum += predict_tree(tree, fv);
  return sum / static_cast<double>(model.trees.size());
}

std::string forest_to_json(const RandomForest& model, const feat::ScalingParams& scaler) {
  nlohmann::json j;
  j["version"] = 1;
  j["seed"] = model.seed;
  j["config"] = {{"n_trees", model.config.n_trees},
                 {"max_depth", model.config.max_depth},
                 {"min_samples_leaf", model.config.min_samples_leaf},
                 {"features_per_split", model.config.features_per_split}};
  j["scaler"] = nlohmann::json::parse(feat::scaler_to_json(scaler));
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"counts", n.counts}});
      } else {
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right}});
      }
    }
    trees.push_back({{"nodes", nodes}});
  }
  j["trees"] = std::move(trees);
  return j.dump();
}

RandomForest forest_from_json(std::string_view text, feat::ScalingParams* scaler) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson(e.what());
  }
  try {
    if (j.at("version").get<int>() != 1) throw MalformedJson("unsupported forest version");
    RandomForest model;
    model.seed = j.at("seed").get<std::uint64_t>();
    const auto& cfg = j.at("config");
    model.config.n_trees = cfg.at("n_trees").get<int>();
    model.config.max_depth = cfg.at("max_depth").get<int>();
    model.config.min_samples_leaf = cfg.at("min_samples_leaf").get<int>();
    model.config.features_per_split = cfg.at("features_per_split").get<int>();
    if (scaler) *scaler = feat::scaler_from_json(j.at("scaler").dump());
    for (const auto& jt : j.at("trees")) {
      DecisionTree tree;
      for (const auto& jn : jt.at("nodes")) {
        TreeNode n;
        if (jn.contains("counts")) {
          auto c = jn.at("counts").get<std::vector<double>>();
          if (c.size() != kNumClasses) throw MalformedJson("leaf counts must have 4 entries");
          std::copy(c.begin(), c.end(), n.counts.begin());
        } else {
          n.feature = jn.at("feature").get<int>();
          n.threshold = jn.at("threshold").get<double>();
          n.left = jn.at("left").get<int>();
          n.right = jn.at("right").get<int>();
        }
        tree.nodes.push_back(n);
      }
      if (tree.nodes.empty()) throw MalformedJson("tree without nodes");
      model.trees.push_back(std::move(tree));
    }
    if (model.trees.empty()) throw MalformedJson("forest without trees");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedJson(e.what());
  }
}

}  // namespace mrseq::forest

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "json.hpp"
#include "pnsml/error.hpp"
#include "pnsml/rng.hpp"

namespace pnsml {

/// Node of a binary regression tree. Leaves have feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;  ///< go left iff x[feature] <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  ///< nodes[0] is the root

  template <typename Vec>
  double predict(const Vec& x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }

  bool operator==(const RegressionTree&) const = default;
};

struct TreeParams {
  int max_depth = 12;
  int min_samples_split = 2;
  int max_features = 0;  ///< features examined per split; 0 means all
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, std::span<const double> target, const TreeParams& p, Rng& rng)
      : x_(x), target_(target), params_(p), rng_(rng) {}

  RegressionTree build(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    tree_.nodes.emplace_back();
    grow(0, rows, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
  };

  double mean(const std::vector<std::size_t>& rows) const {
    double s = 0.0;
    for (auto r : rows) s += target_[r];
    return s / static_cast<double>(rows.size());
  }

  std::vector<int> candidate_features() {
    std::vector<int> f(static_cast<std::size_t>(x_.rows()));
    std::iota(f.begin(), f.end(), 0);
    const int k = params_.max_features;
    if (k <= 0 || k >= static_cast<int>(f.size())) return f;
    // Partial Fisher-Yates: the first k entries are a uniform sample.
    for (int i = 0; i < k; ++i) {
      const auto j = static_cast<std::size_t>(i) + rng_.below(f.size() - static_cast<std::size_t>(i));
      std::swap(f[static_cast<std::size_t>(i)], f[j]);
    }
    f.resize(static_cast<std::size_t>(k));
    return f;
  }

  /// Best variance-reducing split over the candidate features. Gain is the
  /// reduction in summed squared error, computed from running sums.
  Split best_split(const std::vector<std::size_t>& rows) {
    Split best;
    const double n = static_cast<double>(rows.size());
    double total = 0.0;
    for (auto r : rows) total += target_[r];
    const double parent = total * total / n;
    std::vector<std::size_t> sorted(rows);
    for (int f : candidate_features()) {
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](std::size_t a, std::size_t b) { return x_(f, static_cast<Eigen::Index>(a)) < x_(f, static_cast<Eigen::Index>(b)); });
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left_sum += target_[sorted[i]];
        const double xi = x_(f, static_cast<Eigen::Index>(sorted[i]));
        const double xn = x_(f, static_cast<Eigen::Index>(sorted[i + 1]));
        if (xi == xn) continue;
        const double nl = static_cast<double>(i + 1), nr = n - nl;
        const double right_sum = total - left_sum;
        const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
        if (gain > best.gain + 1e-15) best = {f, 0.5 * (xi + xn), gain};
      }
    }
    return best;
  }

  void grow(std::size_t node, std::vector<std::size_t>& rows, int depth) {
    tree_.nodes[node].value = mean(rows);
    if (depth >= params_.max_depth || static_cast<int>(rows.size()) < params_.min_samples_split ||
        rows.size() < 2) {
      return;
    }
    const auto split = best_split(rows);
    if (split.feature < 0) return;
    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (x_(split.feature, static_cast<Eigen::Index>(r)) <= split.threshold ? left : right).push_back(r);
    }
    const auto li = tree_.nodes.size();
    tree_.nodes.emplace_back();
    const auto ri = tree_.nodes.size();
    tree_.nodes.emplace_back();
    tree_.nodes[node].feature = split.feature;
    tree_.nodes[node].threshold = split.threshold;
    tree_.nodes[node].left = static_cast<int>(li);
    tree_.nodes[node].right = static_cast<int>(ri);
    rows.clear();
    rows.shrink_to_fit();
    grow(li, left, depth + 1);
    grow(ri, right, depth + 1);
  }

  const Eigen::MatrixXd& x_;
  std::span<const double> target_;
  TreeParams params_;
  Rng& rng_;
  RegressionTree tree_;
};

}  // namespace detail

/// CART regression tree minimizing squared error. `x` holds one sample per
/// column; `rows` selects (possibly repeated) samples to fit on.
inline RegressionTree fit_tree(const Eigen::MatrixXd& x, std::span<const double> target,
                               std::vector<std::size_t> rows, const TreeParams& params, Rng& rng) {
  if (rows.empty()) throw ValidationError("cannot fit a tree on zero samples");
  return detail::TreeBuilder(x, target, params, rng).build(std::move(rows));
}

inline nlohmann::json to_json(const RegressionTree& t) {
  auto nodes = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) nodes.push_back({{"value", n.value}});
    else nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}, {"value", n.value}});
  }
  return nodes;
}

inline RegressionTree tree_from_json(const nlohmann::json& j) {
  RegressionTree t;
  for (const auto& n : j) {
    TreeNode node;
    node.value = n.at("value").get<double>();
    if (n.contains("feature")) {
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
    }
    t.nodes.push_back(node);
  }
  const auto size = static_cast<int>(t.nodes.size());
  if (size == 0) throw ValidationError("tree without nodes");
  // Children always follow their parent, which also rules out cycles.
  for (int i = 0; i < size; ++i) {
    const auto& n = t.nodes[static_cast<std::size_t>(i)];
    if (!n.is_leaf() && (n.left <= i || n.right <= i || n.left >= size || n.right >= size)) {
      throw ValidationError("tree node references an invalid child");
    }
  }
  return t;
}

}  // namespace pnsml

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <thread>
#include <vector>

#include "minterp/errors.hpp"

namespace minterp {

struct ForestParams {
  int trees = 100;
  int max_depth = 12;
  int min_leaf = 2;
  uint64_t seed = 0;
};

// Axis-aligned decision tree node. feature < 0 marks a leaf holding class
// counts; internal nodes route value < threshold to left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double pos = 0.0;
  double neg = 0.0;
};

using Tree = std::vector<TreeNode>;

struct Forest {
  std::vector<Tree> trees;
  ForestParams params;
  uint64_t schema_fingerprint = 0;
  int feature_len = 0;

  double score(const std::vector<double>& fv) const {
    if (int(fv.size()) != feature_len)
      throw SchemaViolation("score: feature vector length " + std::to_string(fv.size()) +
                            " does not match forest feature length " +
                            std::to_string(feature_len));
    double acc = 0.0;
    for (const Tree& tree : trees) {
      int node = 0;
      while (tree[node].feature >= 0)
        node = fv[tree[node].feature] < tree[node].threshold ? tree[node].left
                                                             : tree[node].right;
      double total = tree[node].pos + tree[node].neg;
      acc += total > 0 ? tree[node].pos / total : 0.5;
    }
    return acc / trees.size();
  }
};

namespace detail {

struct TreeBuilder {
  const std::vector<std::vector<double>>& pos;
  const std::vector<std::vector<double>>& neg;
  const ForestParams& params;
  int d;
  std::mt19937_64 rng;
  Tree tree;

  const std::vector<double>& fv(int idx) const {
    return idx < int(pos.size()) ? pos[idx] : neg[idx - int(pos.size())];
  }
  bool is_pos(int idx) const { return idx < int(pos.size()); }

  int build(std::vector<int>& samples, int depth) {
    double np = 0, nn = 0;
    for (int s : samples) (is_pos(s) ? np : nn) += 1;
    int node_id = int(tree.size());
    tree.push_back({});
    TreeNode& leafify = tree[node_id];
    leafify.pos = np;
    leafify.neg = nn;
    if (depth >= params.max_depth || int(samples.size()) < 2 * params.min_leaf || np == 0 ||
        nn == 0)
      return node_id;

    int mtry = std::max(1, int(std::lround(std::sqrt(double(d)))));
    std::vector<int> feats(d);
    std::iota(feats.begin(), feats.end(), 0);
    for (int i = 0; i < mtry; ++i) {
      std::uniform_int_distribution<int> pick(i, d - 1);
      std::swap(feats[i], feats[pick(rng)]);
    }

    double total = np + nn;
    double best_gain = 1e-12;
    int best_feat = -1;
    double best_thr = 0.0;
    std::vector<std::pair<double, uint8_t>> vals;
    double parent_gini = 1.0 - (np / total) * (np / total) - (nn / total) * (nn / total);
    for (int fi = 0; fi < mtry; ++fi) {
      int f = feats[fi];
      vals.clear();
      for (int s : samples) vals.push_back({fv(s)[f], uint8_t(is_pos(s) ? 1 : 0)});
      std::sort(vals.begin(), vals.end());
      double lp = 0, ln = 0;
      for (size_t i = 0; i + 1 < vals.size(); ++i) {
        (vals[i].second ? lp : ln) += 1;
        if (vals[i].first == vals[i + 1].first) continue;
        double lt = lp + ln, rt = total - lt;
        if (lt < params.min_leaf || rt < params.min_leaf) continue;
        double rp = np - lp, rn = nn - ln;
        double gini_l = 1.0 - (lp / lt) * (lp / lt) - (ln / lt) * (ln / lt);
        double gini_r = 1.0 - (rp / rt) * (rp / rt) - (rn / rt) * (rn / rt);
        double gain = parent_gini - (lt / total) * gini_l - (rt / total) * gini_r;
        if (gain > best_gain) {
          best_gain = gain;
          best_feat = f;
          best_thr = (vals[i].first + vals[i + 1].first) / 2.0;
        }
      }
    }
    if (best_feat < 0) return node_id;

    std::vector<int> left, right;
    for (int s : samples)
      (fv(s)[best_feat] < best_thr ? left : right).push_back(s);
    if (int(left.size()) < params.min_leaf || int(right.size()) < params.min_leaf)
      return node_id;
    tree[node_id].feature = best_feat;
    tree[node_id].threshold = best_thr;
    int l = build(left, depth + 1);
    int r = build(right, depth + 1);
    tree[node_id].left = l;
    tree[node_id].right = r;
    return node_id;
  }
};

}  // namespace detail

// Random forest over feature vectors. Per-tree bootstrap with positives
// oversampled to the negative count; Gini splits over sqrt(d) random
// features. Examples are canonically sorted before sampling so the result is
// invariant to input order.
inline Forest train_forest(std::vector<std::vector<double>> positives,
                           std::vector<std::vector<double>> negatives,
                           const ForestParams& params, uint64_t schema_fingerprint = 0,
                           int threads = 1) {
  if (positives.empty() || negatives.empty())
    throw InvalidArgument("train_forest: both classes must be non-empty");
  size_t d = positives.front().size();
  for (const auto& v : positives)
    if (v.size() != d) throw SchemaViolation("train_forest: inconsistent vector lengths");
  for (const auto& v : negatives)
    if (v.size() != d) throw SchemaViolation("train_forest: inconsistent vector lengths");
  std::sort(positives.begin(), positives.end());
  std::sort(negatives.begin(), negatives.end());

  Forest forest;
  forest.params = params;
  forest.schema_fingerprint = schema_fingerprint;
  forest.feature_len = int(d);
  forest.trees.resize(params.trees);

  auto build_tree = [&](int t) {
    uint64_t tree_seed = params.seed + 0x9E3779B97F4A7C15ull * uint64_t(t + 1);
    detail::TreeBuilder builder{positives, negatives, params, int(d),
                                std::mt19937_64(tree_seed), {}};
    int n_neg = int(negatives.size());
    std::vector<int> samples;
    samples.reserve(2 * n_neg);
    // Class rebalancing: positives oversampled to match negatives per tree.
    for (int i = 0; i < n_neg; ++i)
      samples.push_back(int(builder.rng() % positives.size()));
    for (int i = 0; i < n_neg; ++i)
      samples.push_back(int(positives.size() + builder.rng() % negatives.size()));
    builder.build(samples, 0);
    forest.trees[t] = std::move(builder.tree);
  };

  if (threads <= 1) {
    for (int t = 0; t < params.trees; ++t) build_tree(t);
  } else {
    // Each tree's randomness depends only on (seed, tree index), so the
    // schedule cannot change the result.
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (int t = next.fetch_add(1); t < params.trees; t = next.fetch_add(1)) build_tree(t);
      });
    for (auto& th : pool) th.join();
  }
  return forest;
}

// Permutation importance of a feature-index range: accuracy drop at 0.5
// threshold when those columns are shuffled across examples.
inline double permutation_importance(const Forest& forest,
                                     const std::vector<std::vector<double>>& vectors,
                                     const std::vector<int>& labels, int col_begin, int col_end,
                                     uint64_t seed) {
  auto accuracy = [&](const std::vector<std::vector<double>>& vs) {
    int correct = 0;
    for (size_t i = 0; i < vs.size(); ++i)
      if ((forest.score(vs[i]) >= 0.5 ? 1 : 0) == labels[i]) ++correct;
    return double(correct) / vs.size();
  };
  double base = accuracy(vectors);
  std::vector<std::vector<double>> shuffled = vectors;
  std::vector<int> perm(vectors.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  for (size_t i = 0; i < vectors.size(); ++i)
    for (int c = col_begin; c < col_end; ++c) shuffled[i][c] = vectors[perm[i]][c];
  return base - accuracy(shuffled);
}

}  // namespace minterp

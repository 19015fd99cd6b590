#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "minterp/features.hpp"
#include "minterp/forest.hpp"
#include "mini.hpp"

using namespace minterp;

namespace {

// Two diagonal Gaussian blobs in d dimensions, separable along every axis.
void make_blobs(int n, int d, std::vector<FeatureVector>& pos, std::vector<FeatureVector>& neg,
                uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.4);
  for (int i = 0; i < n; ++i) {
    FeatureVector p(d), q(d);
    for (int k = 0; k < d; ++k) {
      p[k] = 1.0 + g(rng);
      q[k] = g(rng);
    }
    pos.push_back(p);
    neg.push_back(q);
  }
}

// Independent traversal oracle for one tree.
double leaf_posterior(const Tree& tree, const FeatureVector& fv) {
  int node = 0;
  while (tree[node].feature >= 0) {
    const TreeNode& nd = tree[node];
    node = fv[nd.feature] < nd.threshold ? nd.left : nd.right;
  }
  double total = tree[node].pos + tree[node].neg;
  return total > 0 ? tree[node].pos / total : 0.5;
}

bool forests_identical(const Forest& a, const Forest& b) {
  if (a.trees.size() != b.trees.size() || a.feature_len != b.feature_len) return false;
  for (size_t t = 0; t < a.trees.size(); ++t) {
    if (a.trees[t].size() != b.trees[t].size()) return false;
    for (size_t i = 0; i < a.trees[t].size(); ++i) {
      const TreeNode &x = a.trees[t][i], &y = b.trees[t][i];
      if (x.feature != y.feature || x.threshold != y.threshold || x.left != y.left ||
          x.right != y.right || x.pos != y.pos || x.neg != y.neg)
        return false;
    }
  }
  return true;
}

int tree_depth(const Tree& tree, int node = 0) {
  if (tree[node].feature < 0) return 0;
  return 1 + std::max(tree_depth(tree, tree[node].left), tree_depth(tree, tree[node].right));
}

}  // namespace

TEST_CASE("forest separates Gaussian blobs") {
  std::vector<FeatureVector> pos, neg, tpos, tneg;
  make_blobs(200, 6, pos, neg, 1);
  make_blobs(100, 6, tpos, tneg, 2);
  ForestParams fp;
  fp.trees = 40;
  fp.seed = 3;
  Forest f = train_forest(pos, neg, fp);
  int correct = 0;
  for (const auto& v : tpos) correct += f.score(v) >= 0.5;
  for (const auto& v : tneg) correct += f.score(v) < 0.5;
  CHECK(double(correct) / 200 > 0.97);
  // Scores are posteriors in [0,1].
  for (const auto& v : tpos) {
    double s = f.score(v);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("forest scoring matches an independent tree traversal") {
  std::vector<FeatureVector> pos, neg;
  make_blobs(80, 4, pos, neg, 5);
  ForestParams fp;
  fp.trees = 15;
  fp.seed = 7;
  Forest f = train_forest(pos, neg, fp);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (int i = 0; i < 30; ++i) {
    FeatureVector fv(4);
    for (double& v : fv) v = u(rng);
    double want = 0.0;
    for (const Tree& t : f.trees) want += leaf_posterior(t, fv) / f.trees.size();
    CHECK(f.score(fv) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("training is reproducible and invariant to threads and input order") {
  std::vector<FeatureVector> pos, neg;
  make_blobs(60, 5, pos, neg, 11);
  ForestParams fp;
  fp.trees = 12;
  fp.seed = 42;
  Forest a = train_forest(pos, neg, fp);
  Forest b = train_forest(pos, neg, fp);
  CHECK(forests_identical(a, b));
  Forest c = train_forest(pos, neg, fp, 0, 3);
  CHECK(forests_identical(a, c));
  std::vector<FeatureVector> pos2 = pos, neg2 = neg;
  std::mt19937_64 rng(1);
  std::shuffle(pos2.begin(), pos2.end(), rng);
  std::shuffle(neg2.begin(), neg2.end(), rng);
  Forest d = train_forest(pos2, neg2, fp);
  CHECK(forests_identical(a, d));
  fp.seed = 43;
  Forest e = train_forest(pos, neg, fp);
  CHECK(!forests_identical(a, e));
}

TEST_CASE("depth and leaf-size limits are respected") {
  std::vector<FeatureVector> pos, neg;
  make_blobs(150, 3, pos, neg, 17);
  ForestParams fp;
  fp.trees = 10;
  fp.max_depth = 4;
  fp.min_leaf = 5;
  fp.seed = 1;
  Forest f = train_forest(pos, neg, fp);
  for (const Tree& t : f.trees) {
    CHECK(tree_depth(t) <= 4);
    for (const TreeNode& nd : t)
      if (nd.feature < 0) CHECK(nd.pos + nd.neg >= 5);
  }
}

TEST_CASE("forest input validation") {
  std::vector<FeatureVector> pos = {{1, 2}}, neg = {{0, 0}};
  CHECK_THROWS_AS(train_forest({}, neg, {}), InvalidArgument);
  CHECK_THROWS_AS(train_forest(pos, {}, {}), InvalidArgument);
  std::vector<FeatureVector> bad = {{1, 2, 3}};
  CHECK_THROWS_AS(train_forest(pos, bad, {}), SchemaViolation);
  ForestParams fp;
  fp.trees = 2;
  fp.min_leaf = 1;
  fp.max_depth = 1;
  Forest f = train_forest(pos, neg, fp);
  CHECK_THROWS_AS(f.score({1.0, 2.0, 3.0}), SchemaViolation);
}

TEST_CASE("permutation importance singles out the informative column") {
  // Only column 0 carries signal; columns 1-2 are noise.
  std::mt19937_64 rng(23);
  std::normal_distribution<double> g(0.0, 0.3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<FeatureVector> pos, neg, all;
  std::vector<int> labels;
  for (int i = 0; i < 150; ++i) {
    pos.push_back({1.0 + g(rng), u(rng), u(rng)});
    neg.push_back({g(rng), u(rng), u(rng)});
  }
  ForestParams fp;
  fp.trees = 30;
  fp.seed = 2;
  Forest f = train_forest(pos, neg, fp);
  for (const auto& v : pos) {
    all.push_back(v);
    labels.push_back(1);
  }
  for (const auto& v : neg) {
    all.push_back(v);
    labels.push_back(0);
  }
  double signal = permutation_importance(f, all, labels, 0, 1, 5);
  double noise = permutation_importance(f, all, labels, 1, 3, 5);
  CHECK(signal > 0.2);
  CHECK(noise < 0.05);
  CHECK(signal > noise + 0.15);
}

TEST_CASE("unary statistics: hand-checked means, floors, z-scores") {
  StructureSchema sch = mini::schema();
  // Two noise-free patches whose dot sits at known spots; the bar is fixed.
  auto make = [&](double dx) {
    AnnotatedPatch ap;
    ap.img = ImagePatch(48, 48, 0.8);
    render::fill_disc(ap.img, {dx, 24.0}, 1.2, 0.1);
    ap.truth.assignment["dot"] = PointPrim{dx, 24.0};
    ap.truth.assignment["edge"] = ContourPrim{{{30, 10}, {30, 38}}, false};
    return ap;
  };
  std::vector<AnnotatedPatch> positives = {make(12.0), make(20.0)};
  UnaryStats stats = unary_part_statistics(sch, positives);
  REQUIRE(stats.count("dot"));
  REQUIRE(stats.count("edge"));
  const PartStats& ps = stats.at("dot");
  // Location dims: x mean (12+20)/2 / 48, y mean 0.5.
  CHECK(ps.mean[0] == doctest::Approx(16.0 / 48.0));
  CHECK(ps.mean[1] == doctest::Approx(0.5));
  // Population stddev of {12/48, 20/48} is 4/48; y is floored.
  CHECK(ps.stddev[0] == doctest::Approx(4.0 / 48.0));
  CHECK(ps.stddev[1] == doctest::Approx(1e-3));
  // z of the first training block: dims with spread give |z| = 1.
  PatchContext ctx = PatchContext::from_image(positives[0].img);
  std::vector<double> block = unary_block(positives[0].truth.at("dot"), ctx);
  CHECK(std::abs(block[0] - ps.mean[0]) / ps.stddev[0] == doctest::Approx(1.0));
  double z = unary_z_score(ps, block);
  CHECK(z >= 0.0);
  CHECK(z < 4.0);  // training example scores as typical
  // A far-off dot on the same patch is flagged as atypical.
  std::vector<double> far = unary_block(Primitive{PointPrim{44, 4}}, ctx);
  CHECK(unary_z_score(ps, far) > z);
  CHECK_THROWS_AS(unary_part_statistics(sch, {positives[0]}), InsufficientData);
}

TEST_CASE("negative sampling: count, determinism, thread invariance") {
  StructureSchema sch = mini::schema();
  std::mt19937_64 rng(31);
  std::vector<AnnotatedPatch> pos;
  std::vector<ImagePatch> neg;
  for (int i = 0; i < 3; ++i) pos.push_back(mini::positive(rng));
  for (int i = 0; i < 2; ++i) neg.push_back(mini::negative(rng));
  auto a = sample_negatives(sch, pos, neg, 64, 9);
  CHECK(a.size() == 64);
  for (const FeatureVector& fv : a) CHECK(fv.size() == size_t(sch.feature_vector_len()));
  auto b = sample_negatives(sch, pos, neg, 64, 9);
  CHECK(a == b);
  auto c = sample_negatives(sch, pos, neg, 64, 9, 3);
  CHECK(a == c);
  auto d = sample_negatives(sch, pos, neg, 64, 10);
  CHECK(a != d);
  // Clutter-only and positives-only sources both work.
  CHECK(sample_negatives(sch, {}, neg, 16, 1).size() == 16);
  CHECK(sample_negatives(sch, pos, {}, 16, 1).size() == 16);
  CHECK_THROWS_AS(sample_negatives(sch, pos, neg, 0, 1), InvalidArgument);
  CHECK_THROWS_AS(sample_negatives(sch, {}, {}, 8, 1), InvalidArgument);
}

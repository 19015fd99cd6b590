#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "minterp/candidates.hpp"
#include "minterp/synthetic.hpp"

using namespace minterp;

namespace {

double min_dist_to_contour(const CandidateSet& cs, const ContourPrim& truth) {
  double best = 1e18;
  for (const auto& c : cs.contours) {
    double worst = 0.0;  // symmetric: truth verts to candidate plus back
    for (const Vec2& v : truth.vertices)
      worst = std::max(worst, point_to_polyline_distance(v, c.prim).distance);
    for (const Vec2& v : c.prim.vertices)
      worst = std::max(worst, point_to_polyline_distance(v, truth).distance);
    best = std::min(best, worst);
  }
  return best;
}

}  // namespace

TEST_CASE("edge map: strengths normalized, orientation along the edge") {
  ImagePatch img(32, 32, 0.2);
  for (int y = 0; y < 32; ++y)
    for (int x = 16; x < 32; ++x) img.at(x, y) = 0.8;  // vertical edge at x=16
  EdgeMap em = compute_edge_map(img);
  double max_s = 0.0;
  for (double s : em.strengths) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    max_s = std::max(max_s, s);
  }
  CHECK(max_s == doctest::Approx(1.0));
  // Strongest response on the edge column; orientation vertical (pi/2 mod pi).
  CHECK(em.strength(15, 16) > 0.9);
  CHECK(em.strength(4, 16) < 0.05);
  CHECK(em.orientation(15, 16) == doctest::Approx(M_PI / 2));
}

TEST_CASE("point candidates find planted dots within a pixel") {
  ImagePatch img(48, 48, 0.85);
  std::vector<Vec2> dots = {{12, 9}, {30, 25}, {9, 38}};
  std::mt19937_64 rng(4);
  for (const Vec2& d : dots) render::fill_disc(img, d, 1.2, 0.05);
  render::add_noise(img, 0.02, rng);
  auto pts = extract_point_candidates(img, 20);
  REQUIRE(!pts.empty());
  for (const Vec2& d : dots) {
    double best = 1e18;
    for (const auto& p : pts) best = std::min(best, (p.prim.pos() - d).norm());
    CHECK(best <= 1.0);
  }
  // Salience ordering is non-increasing.
  for (size_t i = 1; i < pts.size(); ++i) CHECK(pts[i - 1].salience >= pts[i].salience);
  // The three planted dots dominate everything the noise produces.
  auto top3 = extract_point_candidates(img, 3);
  for (const auto& p : top3) {
    double best = 1e18;
    for (const Vec2& d : dots) best = std::min(best, (p.prim.pos() - d).norm());
    CHECK(best <= 1.0);
  }
  CHECK_THROWS_AS(extract_point_candidates(img, 0), InvalidArgument);
}

TEST_CASE("contour candidates recover a bar edge and a disc outline") {
  std::mt19937_64 rng(6);
  SUBCASE("vertical bar edges") {
    ImagePatch img(48, 48, 0.88);
    render::fill_rect(img, 20.0, 8.0, 28.0, 40.0, 0.25);
    render::add_noise(img, 0.02, rng);
    CandidateSet cs = extract_candidates(img);
    REQUIRE(!cs.contours.empty());
    ContourPrim left{{{20, 8}, {20, 40}}, false};
    ContourPrim right{{{28, 8}, {28, 40}}, false};
    CHECK(min_dist_to_contour(cs, left) < 2.0);
    CHECK(min_dist_to_contour(cs, right) < 2.0);
  }
  SUBCASE("disc outline comes back closed") {
    ImagePatch img(48, 48, 0.88);
    render::fill_disc(img, {24, 24}, 10.0, 0.2);
    render::add_noise(img, 0.01, rng);
    CandidateSet cs = extract_candidates(img);
    bool found = false;
    for (const auto& c : cs.contours) {
      if (!c.prim.closed) continue;
      double worst = 0.0;
      for (const Vec2& v : c.prim.vertices)
        worst = std::max(worst, std::abs((v - Vec2{24, 24}).norm() - 10.0));
      if (worst < 2.0) found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("region candidates: scale ladder, overlap suppression, ordering") {
  ImagePatch img(64, 64, 0.5);
  // Busy texture block in one corner so salience has a clear winner.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int y = 4; y < 24; ++y)
    for (int x = 4; x < 24; ++x) img.at(x, y) = u(rng);
  auto regions = extract_region_candidates(img, 30);
  REQUIRE(!regions.empty());
  for (const auto& r : regions) {
    double frac = r.prim.side / 64.0;
    bool known = std::abs(frac - 0.25) < 1e-9 || std::abs(frac - 0.40) < 1e-9 ||
                 std::abs(frac - 0.60) < 1e-9;
    CHECK(known);
  }
  // Top region covers the textured corner.
  CHECK(regions[0].prim.contains({14, 14}));
  for (size_t i = 1; i < regions.size(); ++i) {
    CHECK(regions[i - 1].salience >= regions[i].salience);
    for (size_t j = 0; j < i; ++j) CHECK(square_iou(regions[i].prim, regions[j].prim) <= 0.5);
  }
  CHECK_THROWS_AS(extract_region_candidates(img, 0), InvalidArgument);
}

TEST_CASE("square_iou sanity") {
  SquareRegionPrim a{10, 10, 8};
  CHECK(square_iou(a, a) == doctest::Approx(1.0));
  CHECK(square_iou(a, {30, 30, 8}) == doctest::Approx(0.0));
  // Half-overlapping equal squares: inter 32, union 96.
  CHECK(square_iou(a, {14, 10, 8}) == doctest::Approx(32.0 / 96.0));
}

TEST_CASE("extraction caps and determinism") {
  std::mt19937_64 rng(13);
  ImagePatch img(56, 56, 0.85);
  for (int i = 0; i < 4; ++i) {
    std::uniform_real_distribution<double> u(8.0, 48.0);
    render::fill_disc(img, {u(rng), u(rng)}, 1.3, 0.1);
  }
  render::fill_rect(img, 10.0, 30.0, 40.0, 44.0, 0.3);
  render::add_noise(img, 0.03, rng);
  CandidateExtractionParams p;
  p.max_points = 5;
  p.max_contours = 7;
  p.max_regions = 4;
  CandidateSet a = extract_candidates(img, p);
  CandidateSet b = extract_candidates(img, p);
  CHECK(a.points.size() <= 5);
  CHECK(a.contours.size() <= 7);
  CHECK(a.regions.size() <= 4);
  REQUIRE(a.points.size() == b.points.size());
  REQUIRE(a.contours.size() == b.contours.size());
  REQUIRE(a.regions.size() == b.regions.size());
  for (size_t i = 0; i < a.points.size(); ++i) CHECK(a.points[i].prim == b.points[i].prim);
  for (size_t i = 0; i < a.contours.size(); ++i) CHECK(a.contours[i].prim == b.contours[i].prim);
  for (size_t i = 0; i < a.regions.size(); ++i) CHECK(a.regions[i].prim == b.regions[i].prim);
}

TEST_CASE("all extracted contours are valid primitives") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    ImagePatch img(48, 48, 0.8);
    std::uniform_real_distribution<double> u(6.0, 42.0);
    render::fill_disc(img, {u(rng), u(rng)}, 6.0, 0.2);
    double x = u(rng), y = u(rng);
    render::fill_rect(img, x, y, std::min(46.0, x + 10.0), std::min(46.0, y + 14.0), 0.35);
    render::add_noise(img, 0.04, rng);
    CandidateSet cs = extract_candidates(img);
    for (const auto& c : cs.contours) CHECK_NOTHROW(c.prim.validate());
    for (const auto& r : cs.regions) CHECK_NOTHROW(r.prim.validate());
  }
}

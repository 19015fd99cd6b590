#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "minterp/geometry.hpp"
#include "minterp/image_ops.hpp"

namespace minterp {

// Per-pixel edge strength in [0,1] (normalized by the patch max) and edge
// direction in radians mod pi (gradient angle + pi/2).
struct EdgeMap {
  int width = 0;
  int height = 0;
  std::vector<double> strengths;
  std::vector<double> orientations;

  double strength(int x, int y) const { return strengths[static_cast<size_t>(y) * width + x]; }
  double orientation(int x, int y) const {
    return orientations[static_cast<size_t>(y) * width + x];
  }
};

struct CandidateExtractionParams {
  int max_points = 20;
  int max_contours = 60;
  int max_regions = 30;
  double hysteresis_high = 0.3;
  double hysteresis_low = 0.1;
  double split_angle_deg = 60.0;
  double simplify_tol = 0.75;
  int min_chain_pixels = 4;
  double dog_threshold = 0.01;
};

template <typename PrimT>
struct Scored {
  PrimT prim;
  double salience = 0.0;
};

struct CandidateSet {
  std::vector<Scored<PointPrim>> points;
  std::vector<Scored<ContourPrim>> contours;
  std::vector<Scored<SquareRegionPrim>> regions;
};

inline EdgeMap compute_edge_map(const ImagePatch& img) {
  ImagePatch smooth = gaussian_blur(img, 1.0);
  GradientField g = central_gradients(smooth);
  EdgeMap em;
  em.width = img.width;
  em.height = img.height;
  em.strengths.resize(img.intensities.size());
  em.orientations.resize(img.intensities.size());
  double max_mag = 0.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) max_mag = std::max(max_mag, g.mag(x, y));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      size_t i = static_cast<size_t>(y) * img.width + x;
      em.strengths[i] = max_mag > kEps ? g.mag(x, y) / max_mag : 0.0;
      double theta = std::atan2(g.gy[i], g.gx[i]) + M_PI / 2.0;
      while (theta < 0) theta += M_PI;
      while (theta >= M_PI) theta -= M_PI;
      em.orientations[i] = theta;
    }
  return em;
}

inline std::vector<Scored<PointPrim>> extract_point_candidates(const ImagePatch& img, int max_n,
                                                               double dog_threshold = 0.01) {
  if (max_n < 1) throw InvalidArgument("extract_point_candidates: max_n must be >= 1");
  DoGMaps dog = dog_maps(img);
  std::vector<double> r(img.intensities.size());
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      r[static_cast<size_t>(y) * img.width + x] = dog.narrow.at(x, y) - dog.wide.at(x, y);
  std::vector<Scored<PointPrim>> out;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double v = r[static_cast<size_t>(y) * img.width + x];
      if (std::abs(v) < dog_threshold) continue;
      bool is_max = true, is_min = true;
      for (int dy = -1; dy <= 1 && (is_max || is_min); ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          int nx = std::clamp(x + dx, 0, img.width - 1);
          int ny = std::clamp(y + dy, 0, img.height - 1);
          if (nx == x && ny == y) continue;
          double nv = r[static_cast<size_t>(ny) * img.width + nx];
          if (v <= nv) is_max = false;
          if (v >= nv) is_min = false;
        }
      if (is_max || is_min) out.push_back({PointPrim{double(x), double(y)}, std::abs(v)});
    }
  // Row-major scan order already breaks salience ties deterministically.
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.salience > b.salience; });
  if (int(out.size()) > max_n) out.resize(max_n);
  return out;
}

namespace detail {

struct PixelChain {
  std::vector<Vec2> pixels;
  bool closed = false;
  // Pixels trimmed off each end by corner splitting (0 = natural fade-out
  // end). The trimmed span is restored later by extending toward the apex.
  int trim_start = 0;
  int trim_end = 0;
};

inline std::vector<uint8_t> nms_hysteresis(const EdgeMap& em, double high, double low) {
  int w = em.width, h = em.height;
  std::vector<uint8_t> thin(size_t(w) * h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = em.strength(x, y);
      if (s < low) continue;
      // Gradient direction = edge orientation - pi/2; quantize to 4 axes.
      double gdir = em.orientation(x, y) - M_PI / 2.0;
      while (gdir < 0) gdir += M_PI;
      int q = int(std::floor((gdir + M_PI / 8.0) / (M_PI / 4.0))) % 4;
      static const int off[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};
      int dx = off[q][0], dy = off[q][1];
      auto str = [&](int xx, int yy) {
        if (xx < 0 || yy < 0 || xx >= w || yy >= h) return 0.0;
        return em.strength(xx, yy);
      };
      // One strict comparison so a two-pixel-wide plateau (edge exactly
      // between diagonals) keeps a single wall, not both.
      if (s >= str(x + dx, y + dy) && s > str(x - dx, y - dy)) thin[size_t(y) * w + x] = 1;
    }
  // Hysteresis: keep thin pixels connected (8-conn) to a strong one.
  std::vector<uint8_t> keep(size_t(w) * h, 0);
  std::queue<std::pair<int, int>> q;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (thin[size_t(y) * w + x] && em.strength(x, y) >= high) {
        keep[size_t(y) * w + x] = 1;
        q.push({x, y});
      }
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        size_t i = size_t(ny) * w + nx;
        if (thin[i] && !keep[i]) {
          keep[i] = 1;
          q.push({nx, ny});
        }
      }
  }
  return keep;
}

// Trace 8-connected chains. Open chains start at endpoints/junctions; leftover
// pixels form loops. Deterministic: row-major start selection, neighbor order
// fixed.
inline std::vector<PixelChain> link_chains(const std::vector<uint8_t>& mask, int w, int h) {
  auto on = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < w && y < h && mask[size_t(y) * w + x];
  };
  auto degree = [&](int x, int y) {
    int d = 0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if ((dx || dy) && on(x + dx, y + dy)) ++d;
    return d;
  };
  std::vector<uint8_t> visited(size_t(w) * h, 0);
  std::vector<PixelChain> chains;
  static const int nb[8][2] = {{1, 0},  {0, 1},  {-1, 0}, {0, -1},
                               {1, 1},  {-1, 1}, {-1, -1}, {1, -1}};
  auto walk = [&](int sx, int sy) {
    PixelChain ch;
    int x = sx, y = sy;
    int px = -9, py = -9;
    visited[size_t(y) * w + x] = 1;
    ch.pixels.push_back({double(x), double(y)});
    while (true) {
      // Loop closed: stop before wandering onto parallel leftover pixels.
      if (ch.pixels.size() >= 8 && std::abs(x - sx) <= 1 && std::abs(y - sy) <= 1) {
        ch.closed = true;
        break;
      }
      int bx = -1, by = -1;
      double best_turn = 1e9;
      for (auto& o : nb) {
        int nx = x + o[0], ny = y + o[1];
        if (!on(nx, ny) || visited[size_t(ny) * w + nx]) continue;
        double turn = 0.0;
        if (px != -9) {
          Vec2 prev{double(x - px), double(y - py)};
          Vec2 next{double(nx - x), double(ny - y)};
          turn = angle_between(prev, next);
        }
        if (turn < best_turn - 1e-12) {
          best_turn = turn;
          bx = nx;
          by = ny;
        }
      }
      if (bx < 0) break;
      px = x;
      py = y;
      x = bx;
      y = by;
      visited[size_t(y) * w + x] = 1;
      ch.pixels.push_back({double(x), double(y)});
    }
    return ch;
  };
  // Pass 1: open chains from endpoints.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (on(x, y) && !visited[size_t(y) * w + x] && degree(x, y) <= 1)
        chains.push_back(walk(x, y));
  // Pass 2: leftovers are loops (or junction tangles); trace as closed.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (on(x, y) && !visited[size_t(y) * w + x]) {
        PixelChain ch = walk(x, y);
        // Closed if the walk returned next to its start.
        if (ch.pixels.size() >= 4) {
          Vec2 d = ch.pixels.back() - ch.pixels.front();
          ch.closed = std::abs(d.x) <= 1.0 + kEps && std::abs(d.y) <= 1.0 + kEps;
        }
        chains.push_back(std::move(ch));
      }
  return chains;
}

inline void douglas_peucker(const std::vector<Vec2>& pts, int a, int b, double tol,
                            std::vector<uint8_t>& keep);

// Re-join open chains that a pixel of noise broke apart: endpoints within 5
// pixels whose end tangents continue each other are merged (nearest pair
// first). A merged chain whose own endpoints meet becomes a loop.
inline void merge_chain_gaps(std::vector<PixelChain>& chains) {
  auto tangent = [](const PixelChain& ch, bool at_back) {
    int n = int(ch.pixels.size());
    int k = std::min(3, n - 1);
    Vec2 t = at_back ? ch.pixels[n - 1] - ch.pixels[n - 1 - k] : ch.pixels[0] - ch.pixels[k];
    return t;  // points outward from the chain
  };
  bool merged = true;
  while (merged) {
    merged = false;
    double best_d = 5.0 + kEps;
    size_t bi = 0, bj = 0;
    int bei = 0, bej = 0;
    for (size_t i = 0; i < chains.size(); ++i) {
      if (chains[i].closed || chains[i].pixels.size() < 4) continue;
      for (size_t j = i + 1; j < chains.size(); ++j) {
        if (chains[j].closed || chains[j].pixels.size() < 4) continue;
        for (int ei = 0; ei < 2; ++ei)
          for (int ej = 0; ej < 2; ++ej) {
            Vec2 a = ei ? chains[i].pixels.back() : chains[i].pixels.front();
            Vec2 b = ej ? chains[j].pixels.back() : chains[j].pixels.front();
            double d = (b - a).norm();
            if (d >= best_d) continue;
            Vec2 ta = tangent(chains[i], ei != 0), tb = tangent(chains[j], ej != 0);
            double lim = 55.0 * M_PI / 180.0;
            if (angle_between(ta, b - a) > lim || angle_between(tb, a - b) > lim) continue;
            best_d = d;
            bi = i;
            bj = j;
            bei = ei;
            bej = ej;
            merged = true;
          }
      }
    }
    if (!merged) break;
    PixelChain& ci = chains[bi];
    PixelChain cj = std::move(chains[bj]);
    chains.erase(chains.begin() + bj);
    if (!bei) std::reverse(ci.pixels.begin(), ci.pixels.end());
    if (bej) std::reverse(cj.pixels.begin(), cj.pixels.end());
    ci.pixels.insert(ci.pixels.end(), cj.pixels.begin(), cj.pixels.end());
  }
  for (PixelChain& ch : chains)
    if (!ch.closed && ch.pixels.size() >= 10 &&
        (ch.pixels.back() - ch.pixels.front()).norm() <= 5.0)
      ch.closed = true;
}

// Split a chain at its corners. Corners are located with a coarse polygonal
// fit: Douglas-Peucker vertices mark every direction change, neighbouring
// vertices within 2 pixels are merged into one corner (right angles render
// as two 45-degree chamfer bends a pixel apart), and the turn of each corner
// is measured between directions taken over a few pixels on either side so
// single-pixel noise jags do not register. This resolves adjacent corners of
// small rectangles that any fixed-window turning measure blurs together.
inline std::vector<PixelChain> split_at_corners(const PixelChain& ch, double limit_rad) {
  int n = int(ch.pixels.size());
  if (n < 6) return {ch};
  std::vector<Vec2> pts = ch.pixels;
  int rot = 0;
  if (ch.closed) {
    // Rotate the loop so index 0 sits on the flattest pixel; the polygonal
    // fit below then never straddles a corner at the seam.
    double best = 1e9;
    for (int i = 0; i < n; ++i) {
      Vec2 v1 = ch.pixels[i] - ch.pixels[(i - 2 + n) % n];
      Vec2 v2 = ch.pixels[(i + 2) % n] - ch.pixels[i];
      double t = angle_between(v1, v2);
      if (t < best) {
        best = t;
        rot = i;
      }
    }
    std::rotate(pts.begin(), pts.begin() + rot, pts.end());
    pts.push_back(pts.front());  // seam sentinel for the fit
  }
  int m = int(pts.size());
  std::vector<uint8_t> keep(m, 0);
  keep[0] = keep[m - 1] = 1;
  douglas_peucker(pts, 0, m - 1, 1.0, keep);
  std::vector<int> vtx;
  for (int i = 1; i + 1 < m; ++i)
    if (keep[i]) vtx.push_back(i);
  std::vector<int> cuts;
  for (size_t a = 0; a < vtx.size();) {
    size_t b = a;
    while (b + 1 < vtx.size() && vtx[b + 1] - vtx[b] <= 2) ++b;
    int vi = vtx[a], vj = vtx[b];
    int prev = a > 0 ? vtx[a - 1] : 0;
    int next = b + 1 < vtx.size() ? vtx[b + 1] : m - 1;
    // Directions over up to 4 pixels either side of the corner group.
    int li = std::min(4, vi - prev), lo = std::min(4, next - vj);
    Vec2 dir_in = pts[vi] - pts[vi - li];
    Vec2 dir_out = pts[vj + lo] - pts[vj];
    if (angle_between(dir_in, dir_out) > limit_rad)
      cuts.push_back(((vi + vj) / 2 + rot) % n);
    a = b + 1;
  }
  std::sort(cuts.begin(), cuts.end());
  if (cuts.empty()) return {ch};
  // Drop the rounded corner arc itself (up to 3 pixels either side of the
  // apex, less when two cuts sit close together so a few pixels survive);
  // the surviving straight runs are extended back toward the apex later.
  auto piece_trim = [](int gap) { return std::min(3, std::max(1, (gap - 3) / 2)); };
  std::vector<PixelChain> out;
  if (!ch.closed) {
    for (size_t k = 0; k <= cuts.size(); ++k) {
      int a = k > 0 ? cuts[k - 1] : 0;
      int b = k < cuts.size() ? cuts[k] : n - 1;
      int ta = k > 0 ? piece_trim(b - a) : 0;
      int tb = k < cuts.size() ? piece_trim(b - a) : 0;
      int start = a + ta, end = b - tb;
      if (end - start + 1 < 2) continue;
      PixelChain piece{{ch.pixels.begin() + start, ch.pixels.begin() + end + 1}, false, ta, tb};
      out.push_back(std::move(piece));
    }
  } else {
    for (size_t k = 0; k < cuts.size(); ++k) {
      int a = cuts[k], b = cuts[(k + 1) % cuts.size()];
      int gap = cuts.size() == 1 ? n : ((b - a) % n + n) % n;
      int t = piece_trim(gap);
      PixelChain piece;
      piece.trim_start = piece.trim_end = t;
      int steps = gap - 2 * t;
      if (steps < 1) continue;
      for (int s = 0; s <= steps; ++s) piece.pixels.push_back(ch.pixels[(a + t + s) % n]);
      out.push_back(std::move(piece));
    }
  }
  return out;
}

// Move each chain pixel to the sub-pixel edge-strength peak along its local
// gradient direction (parabolic fit over a 1px baseline). The direction may
// be borrowed from an interior neighbour so corner-contaminated gradients at
// chain ends do not drag the endpoint sideways.
inline Vec2 refine_edge_pixel(const EdgeMap& em, Vec2 p, Vec2 dir_source) {
  int xi = int(std::lround(dir_source.x)), yi = int(std::lround(dir_source.y));
  if (xi < 0 || yi < 0 || xi >= em.width || yi >= em.height) return p;
  double theta = em.orientation(xi, yi) - M_PI / 2.0;  // gradient direction
  Vec2 dir{std::cos(theta), std::sin(theta)};
  auto sample = [&](Vec2 q) {
    double x = std::clamp(q.x, 0.0, double(em.width - 1));
    double y = std::clamp(q.y, 0.0, double(em.height - 1));
    int x0 = int(std::floor(x)), y0 = int(std::floor(y));
    int x1 = std::min(x0 + 1, em.width - 1), y1 = std::min(y0 + 1, em.height - 1);
    double fx = x - x0, fy = y - y0;
    return em.strength(x0, y0) * (1 - fx) * (1 - fy) + em.strength(x1, y0) * fx * (1 - fy) +
           em.strength(x0, y1) * (1 - fx) * fy + em.strength(x1, y1) * fx * fy;
  };
  double sm = sample(p - dir), s0 = sample(p), sp = sample(p + dir);
  double denom = sm - 2.0 * s0 + sp;
  if (std::abs(denom) < kEps) return p;
  double delta = 0.5 * (sm - sp) / denom;
  delta = std::clamp(delta, -1.0, 1.0);
  return p + dir * delta;
}

inline void douglas_peucker(const std::vector<Vec2>& pts, int a, int b, double tol,
                            std::vector<uint8_t>& keep) {
  if (b <= a + 1) return;
  Vec2 pa = pts[a], pb = pts[b];
  Vec2 ab = pb - pa;
  double len = ab.norm();
  int worst = -1;
  double worst_d = tol;
  for (int i = a + 1; i < b; ++i) {
    double d;
    if (len < kEps)
      d = (pts[i] - pa).norm();
    else
      d = std::abs(ab.cross(pts[i] - pa)) / len;
    if (d > worst_d) {
      worst_d = d;
      worst = i;
    }
  }
  if (worst >= 0) {
    keep[worst] = 1;
    douglas_peucker(pts, a, worst, tol, keep);
    douglas_peucker(pts, worst, b, tol, keep);
  }
}

inline std::vector<Vec2> simplify(const std::vector<Vec2>& pts, double tol) {
  int n = int(pts.size());
  std::vector<uint8_t> keep(n, 0);
  keep[0] = keep[n - 1] = 1;
  douglas_peucker(pts, 0, n - 1, tol, keep);
  std::vector<Vec2> out;
  for (int i = 0; i < n; ++i)
    if (keep[i] && (out.empty() || (pts[i] - out.back()).norm() > kEps)) out.push_back(pts[i]);
  return out;
}

}  // namespace detail

inline std::vector<Scored<ContourPrim>> extract_contour_candidates(
    const EdgeMap& em, int max_n, const CandidateExtractionParams& p = {}) {
  if (max_n < 1) throw InvalidArgument("extract_contour_candidates: max_n must be >= 1");
  std::vector<uint8_t> mask =
      detail::nms_hysteresis(em, p.hysteresis_high, p.hysteresis_low);
  std::vector<detail::PixelChain> raw = detail::link_chains(mask, em.width, em.height);
  detail::merge_chain_gaps(raw);
  std::vector<detail::PixelChain> chains;
  double limit = p.split_angle_deg * M_PI / 180.0;
  for (const auto& ch : raw)
    for (auto& piece : detail::split_at_corners(ch, limit)) chains.push_back(std::move(piece));
  std::vector<Scored<ContourPrim>> out;
  for (auto& ch : chains) {
    // Corner-trimmed pixels still count toward the minimum-length rule.
    int effective_len = int(ch.pixels.size()) + ch.trim_start + ch.trim_end;
    if (effective_len < p.min_chain_pixels || ch.pixels.size() < 2) continue;
    int np = int(ch.pixels.size());
    std::vector<Vec2> refined(ch.pixels.size());
    for (int i = 0; i < np; ++i)
      refined[i] = detail::refine_edge_pixel(em, ch.pixels[i], ch.pixels[i]);
    {
      // Average the refinement offsets over a 5-pixel window along the chain
      // so intensity noise does not turn the polyline into a zigzag.
      std::vector<Vec2> smoothed(refined.size());
      for (int i = 0; i < np; ++i) {
        Vec2 acc{0, 0};
        int cnt = 0;
        for (int k = -2; k <= 2; ++k) {
          int j = ch.closed ? ((i + k) % np + np) % np : std::clamp(i + k, 0, np - 1);
          acc = acc + (refined[j] - ch.pixels[j]);
          ++cnt;
        }
        smoothed[i] = ch.pixels[i] + acc * (1.0 / cnt);
      }
      refined = std::move(smoothed);
    }
    if (!ch.closed && np >= 4) {
      // The strength field near open-chain ends is corner-contaminated; give
      // the two end pixels the lateral correction of their interior
      // neighbour instead of their own.
      for (int i : {0, 1}) refined[i] = ch.pixels[i] + (refined[2] - ch.pixels[2]);
      for (int i : {np - 1, np - 2})
        refined[i] = ch.pixels[i] + (refined[np - 3] - ch.pixels[np - 3]);
    }
    std::vector<Vec2> raw_pixels = std::move(ch.pixels);
    ch.pixels = std::move(refined);
    std::vector<Vec2> verts;
    if (ch.closed) {
      // Simplify a loop by anchoring at the point farthest from pixel 0.
      int far = 0;
      for (int i = 1; i < int(ch.pixels.size()); ++i)
        if ((ch.pixels[i] - ch.pixels[0]).norm() > (ch.pixels[far] - ch.pixels[0]).norm())
          far = i;
      std::vector<Vec2> half1(ch.pixels.begin(), ch.pixels.begin() + far + 1);
      std::vector<Vec2> half2(ch.pixels.begin() + far, ch.pixels.end());
      half2.push_back(ch.pixels.front());
      std::vector<Vec2> s1 = detail::simplify(half1, p.simplify_tol);
      std::vector<Vec2> s2 = detail::simplify(half2, p.simplify_tol);
      verts = s1;
      for (size_t i = 1; i + 1 < s2.size(); ++i) verts.push_back(s2[i]);
    } else {
      verts = detail::simplify(ch.pixels, p.simplify_tol);
      // Straight pieces: refit both endpoints from the least-squares line
      // through every refined pixel, which averages noise the polyline
      // simplification endpoints keep.
      {
        Vec2 mean{0, 0};
        for (const Vec2& q : ch.pixels) mean = mean + q * (1.0 / np);
        double sxx = 0, sxy = 0, syy = 0;
        for (const Vec2& q : ch.pixels) {
          Vec2 d = q - mean;
          sxx += d.x * d.x;
          sxy += d.x * d.y;
          syy += d.y * d.y;
        }
        double ang = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
        Vec2 axis{std::cos(ang), std::sin(ang)};
        double max_res = 0.0;
        for (const Vec2& q : ch.pixels)
          max_res = std::max(max_res, std::abs(axis.cross(q - mean)));
        if (max_res < 0.9) {
          auto proj = [&](Vec2 q) { return mean + axis * axis.dot(q - mean); };
          verts = {proj(ch.pixels.front()), proj(ch.pixels.back())};
        }
      }
      // Cut ends lost the trimmed corner arc; push them back out to the
      // corner apex. The direction comes from a least-squares line over the
      // last few refined pixels, not the final simplified segment, so one
      // noise bump near the end cannot tilt the extension.
      auto end_dir = [&](bool at_back) {
        int k = std::min<int>(6, np);
        Vec2 mean{0, 0};
        for (int i = 0; i < k; ++i)
          mean = mean + ch.pixels[at_back ? np - 1 - i : i] * (1.0 / k);
        double sxx = 0, sxy = 0, syy = 0;
        for (int i = 0; i < k; ++i) {
          Vec2 d = ch.pixels[at_back ? np - 1 - i : i] - mean;
          sxx += d.x * d.x;
          sxy += d.x * d.y;
          syy += d.y * d.y;
        }
        // Principal axis of the 2x2 scatter matrix.
        double ang = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
        Vec2 axis{std::cos(ang), std::sin(ang)};
        Vec2 outward = at_back ? ch.pixels[np - 1] - ch.pixels[np - 1 - (k - 1)]
                               : ch.pixels[0] - ch.pixels[k - 1];
        return axis.dot(outward) < 0 ? axis * -1.0 : axis;
      };
      if (verts.size() >= 2) {
        if (ch.trim_start > 0) verts.front() = verts.front() + end_dir(false) * (ch.trim_start + 1.0);
        if (ch.trim_end > 0) verts.back() = verts.back() + end_dir(true) * (ch.trim_end + 1.0);
      }
    }
    if (verts.size() < 2) continue;
    ContourPrim c{verts, ch.closed};
    try {
      c.validate();
    } catch (const InvalidArgument&) {
      continue;
    }
    double mean_strength = 0.0;
    for (const Vec2& px : raw_pixels)
      mean_strength += em.strength(int(px.x), int(px.y)) / double(raw_pixels.size());
    out.push_back({std::move(c), mean_strength * double(raw_pixels.size())});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.salience > b.salience; });
  if (int(out.size()) > max_n) out.resize(max_n);
  return out;
}

inline double square_iou(const SquareRegionPrim& a, const SquareRegionPrim& b) {
  double ax0 = a.center_x - a.half(), ax1 = a.center_x + a.half();
  double ay0 = a.center_y - a.half(), ay1 = a.center_y + a.half();
  double bx0 = b.center_x - b.half(), bx1 = b.center_x + b.half();
  double by0 = b.center_y - b.half(), by1 = b.center_y + b.half();
  double iw = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  double ih = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
  double inter = iw * ih;
  double uni = a.side * a.side + b.side * b.side - inter;
  return uni > kEps ? inter / uni : 0.0;
}

inline std::vector<Scored<SquareRegionPrim>> extract_region_candidates(const ImagePatch& img,
                                                                       int max_n) {
  if (max_n < 1) throw InvalidArgument("extract_region_candidates: max_n must be >= 1");
  std::vector<Scored<SquareRegionPrim>> all;
  double base = std::min(img.width, img.height);
  for (double frac : {0.25, 0.40, 0.60}) {
    double side = frac * base;
    int stride = std::max(1, int(std::floor(side / 2.0)));
    int iside = int(std::floor(side));
    for (int y0 = 0; y0 + iside <= img.height; y0 += stride)
      for (int x0 = 0; x0 + iside <= img.width; x0 += stride) {
        SquareRegionPrim r{x0 + side / 2.0, y0 + side / 2.0, side};
        // Intensity variance over covered pixel centers.
        double sum = 0.0, sum2 = 0.0;
        int count = 0;
        for (int y = y0; y < y0 + iside + 1 && y < img.height; ++y)
          for (int x = x0; x < x0 + iside + 1 && x < img.width; ++x) {
            if (!r.contains({double(x), double(y)})) continue;
            double v = img.at(x, y);
            sum += v;
            sum2 += v * v;
            ++count;
          }
        double var = count > 0 ? std::max(0.0, sum2 / count - (sum / count) * (sum / count)) : 0.0;
        all.push_back({r, var});
      }
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const auto& a, const auto& b) { return a.salience > b.salience; });
  std::vector<Scored<SquareRegionPrim>> out;
  for (const auto& cand : all) {
    bool overlap = false;
    for (const auto& kept : out)
      if (square_iou(cand.prim, kept.prim) > 0.5) {
        overlap = true;
        break;
      }
    if (!overlap) out.push_back(cand);
    if (int(out.size()) >= max_n) break;
  }
  return out;
}

inline CandidateSet extract_candidates(const ImagePatch& img,
                                       const CandidateExtractionParams& p = {}) {
  CandidateSet cs;
  cs.points = extract_point_candidates(img, p.max_points, p.dog_threshold);
  EdgeMap em = compute_edge_map(img);
  cs.contours = extract_contour_candidates(em, p.max_contours, p);
  cs.regions = extract_region_candidates(img, p.max_regions);
  return cs;
}

}  // namespace minterp

#pragma once

// Borel sets as membership oracles with bounding boxes, plus Lebesgue and
// affine-slice measure estimators and the density ratio Theta(x, r).
//
// Besides `contains`, a set may carry
//   chord(p, d, s0, s1): the sorted disjoint intervals of s in [s0, s1] with
//                        p + s d in the set (composes through unions,
//                        intersections and complements),
//   slice(x, W, r):      the exact measure of A ∩ B(x, r) ∩ (x + W), or
//                        nullopt when no closed form applies.

#include "gmtlab/core.hpp"
#include "gmtlab/grassmann.hpp"
#include "gmtlab/sampling.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gmtlab {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  [[nodiscard]] double length() const { return hi - lo; }
};
using Intervals = std::vector<Interval>;

inline double total_length(const Intervals& iv) {
  double s = 0.0;
  for (const auto& i : iv) s += i.length();
  return s;
}

/// Sorted, merged union.
inline Intervals interval_union(Intervals a, const Intervals& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
  Intervals out;
  for (const auto& i : a) {
    if (i.hi <= i.lo) continue;
    if (!out.empty() && i.lo <= out.back().hi)
      out.back().hi = std::max(out.back().hi, i.hi);
    else
      out.push_back(i);
  }
  return out;
}

inline Intervals interval_intersection(const Intervals& a, const Intervals& b) {
  Intervals out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double lo = std::max(a[i].lo, b[j].lo), hi = std::min(a[i].hi, b[j].hi);
    if (hi > lo) out.push_back({lo, hi});
    if (a[i].hi < b[j].hi) ++i; else ++j;
  }
  return out;
}

/// [lo, hi] minus a sorted disjoint family.
inline Intervals interval_complement(const Intervals& a, double lo, double hi) {
  Intervals out;
  double cur = lo;
  for (const auto& i : a) {
    if (i.lo > cur) out.push_back({cur, std::min(i.lo, hi)});
    cur = std::max(cur, i.hi);
    if (cur >= hi) break;
  }
  if (cur < hi) out.push_back({cur, hi});
  return out;
}

struct SetOracle {
  using ChordFn = std::function<Intervals(const Vec& p, const Vec& d, double s0, double s1)>;
  using SliceFn = std::function<std::optional<double>(const Vec& x, const Plane& w, double r)>;

  int n = 0;
  std::function<bool(const Vec&)> contains_fn;
  Box bbox;
  ChordFn chord;
  SliceFn slice;
  std::string name;

  [[nodiscard]] bool contains(const Vec& x) const { return bbox.contains(x) && contains_fn(x); }
  [[nodiscard]] bool has_chord() const { return static_cast<bool>(chord); }
};

/// Volume of the unit ball in R^m.
inline double alpha(int m) {
  if (m < 0) throw DimensionMismatch("alpha: negative dimension");
  return std::pow(kPi, 0.5 * m) / std::tgamma(0.5 * m + 1.0);
}

namespace detail {

/// Measure of the intersection of two m-balls with radii a, b whose centers
/// are at distance d, for m <= 3.
inline std::optional<double> ball_overlap(int m, double a, double b, double d) {
  if (a <= 0.0 || b <= 0.0) return 0.0;
  if (d >= a + b) return 0.0;
  const double s = std::min(a, b);
  if (d <= std::abs(a - b)) return alpha(m) * std::pow(s, m);
  switch (m) {
    case 1:
      return a + b - d;
    case 2: {
      const double ca = std::clamp((d * d + a * a - b * b) / (2 * d * a), -1.0, 1.0);
      const double cb = std::clamp((d * d + b * b - a * a) / (2 * d * b), -1.0, 1.0);
      const double k = std::sqrt(std::max(0.0, (-d + a + b) * (d + a - b) * (d - a + b) * (d + a + b)));
      return a * a * std::acos(ca) + b * b * std::acos(cb) - 0.5 * k;
    }
    case 3: {
      const double t = a + b - d;
      return kPi * t * t * (d * d + 2 * d * (a + b) - 3 * (a - b) * (a - b)) / (12 * d);
    }
    default:
      return std::nullopt;
  }
}

/// Measure of the part of an m-ball of radius r at signed distance <= h from
/// its center along a fixed direction (a cap or its complement), m <= 3.
inline std::optional<double> ball_cap(int m, double r, double h) {
  if (h <= -r) return 0.0;
  if (h >= r) return alpha(m) * std::pow(r, m);
  switch (m) {
    case 1:
      return r + h;
    case 2:
      return r * r * std::acos(-h / r) + h * std::sqrt(r * r - h * h);
    case 3: {
      const double c = r + h;
      return kPi * c * c * (3 * r - c) / 3.0;
    }
    default:
      return std::nullopt;
  }
}

inline Intervals box_chord(const Box& b, const Vec& p, const Vec& d, double s0, double s1) {
  double lo = s0, hi = s1;
  for (int i = 0; i < b.dim(); ++i) {
    if (std::abs(d[i]) < 1e-300) {
      if (p[i] < b.lo[i] || p[i] > b.hi[i]) return {};
      continue;
    }
    double t0 = (b.lo[i] - p[i]) / d[i], t1 = (b.hi[i] - p[i]) / d[i];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
    if (hi <= lo) return {};
  }
  return {{lo, hi}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

inline SetOracle empty_set(int n) {
  SetOracle s;
  s.n = n;
  s.contains_fn = [](const Vec&) { return false; };
  s.bbox = Box(Vec::Zero(n), Vec::Zero(n));
  s.chord = [](const Vec&, const Vec&, double, double) { return Intervals{}; };
  s.slice = [](const Vec&, const Plane&, double) -> std::optional<double> { return 0.0; };
  s.name = "empty";
  return s;
}

/// Closed ball B(c, R).
inline SetOracle ball(const Vec& c, double radius) {
  SetOracle s;
  s.n = static_cast<int>(c.size());
  s.contains_fn = [c, radius](const Vec& x) { return (x - c).squaredNorm() <= radius * radius; };
  s.bbox = Box(c.array() - radius, c.array() + radius);
  s.chord = [c, radius](const Vec& p, const Vec& d, double s0, double s1) -> Intervals {
    const Vec q = p - c;
    const double a = d.squaredNorm(), b = q.dot(d), cc = q.squaredNorm() - radius * radius;
    const double disc = b * b - a * cc;
    if (a <= 0.0 || disc <= 0.0) return {};
    const double sq = std::sqrt(disc);
    const double lo = std::max(s0, (-b - sq) / a), hi = std::min(s1, (-b + sq) / a);
    if (hi <= lo) return {};
    return {{lo, hi}};
  };
  s.slice = [c, radius](const Vec& x, const Plane& w, double r) -> std::optional<double> {
    const Vec q = c - x;
    const double off = w.project_perp(q).norm();
    if (off >= radius) return 0.0;
    return detail::ball_overlap(w.m(), r, std::sqrt(radius * radius - off * off), w.project(q).norm());
  };
  s.name = "ball";
  return s;
}

/// Closed axis-aligned box.
inline SetOracle box(const Box& b) {
  SetOracle s;
  s.n = b.dim();
  s.contains_fn = [](const Vec&) { return true; };
  s.bbox = b;
  s.chord = [b](const Vec& p, const Vec& d, double s0, double s1) { return detail::box_chord(b, p, d, s0, s1); };
  s.slice = [b](const Vec& x, const Plane& w, double r) -> std::optional<double> {
    // The disk x + (W ∩ B(0, r)) spans x_i ± r |P_W e_i| along axis i.
    bool inside = true;
    for (int i = 0; i < b.dim(); ++i) {
      const double ext = r * std::sqrt(std::max(0.0, w.proj()(i, i)));
      if (x[i] - ext < b.lo[i] || x[i] + ext > b.hi[i]) inside = false;
      if (x[i] + ext < b.lo[i] || x[i] - ext > b.hi[i]) return 0.0;
    }
    if (inside) return alpha(w.m()) * std::pow(r, w.m());
    return std::nullopt;
  };
  s.name = "box";
  return s;
}

inline SetOracle box(const Vec& lo, const Vec& hi) { return box(Box(lo, hi)); }

/// {x in within : <a, x> <= b}.
inline SetOracle half_space(const Vec& a, double b, const Box& within) {
  if (a.size() != within.dim()) throw DimensionMismatch("half_space: normal dimension");
  SetOracle s;
  s.n = within.dim();
  s.contains_fn = [a, b](const Vec& x) { return a.dot(x) <= b; };
  s.bbox = within;
  s.chord = [a, b, within](const Vec& p, const Vec& d, double s0, double s1) -> Intervals {
    Intervals iv = detail::box_chord(within, p, d, s0, s1);
    if (iv.empty()) return iv;
    const double ap = a.dot(p), ad = a.dot(d);
    if (std::abs(ad) < 1e-300) return ap <= b ? iv : Intervals{};
    const double t = (b - ap) / ad;
    Intervals half = ad > 0 ? Intervals{{s0, std::min(s1, t)}} : Intervals{{std::max(s0, t), s1}};
    return interval_intersection(iv, half);
  };
  s.slice = [a, b, within](const Vec& x, const Plane& w, double r) -> std::optional<double> {
    for (int i = 0; i < within.dim(); ++i)
      if (x[i] - r < within.lo[i] || x[i] + r > within.hi[i]) return std::nullopt;
    const Vec aw = w.project(a);
    const double nw = aw.norm();
    const double gap = b - a.dot(x);
    if (nw < 1e-14 * std::max(1.0, a.norm())) return gap >= 0 ? detail::ball_cap(w.m(), r, r) : 0.0;
    return detail::ball_cap(w.m(), r, gap / nw);
  };
  s.name = "half_space";
  return s;
}

inline SetOracle set_union(const std::vector<SetOracle>& parts) {
  if (parts.empty()) throw EmptySet("set_union: no parts");
  SetOracle s;
  s.n = parts.front().n;
  s.bbox = parts.front().bbox;
  bool chords = true;
  for (const auto& p : parts) {
    if (p.n != s.n) throw DimensionMismatch("set_union: dimension");
    s.bbox = s.bbox.hull(p.bbox);
    chords = chords && p.has_chord();
  }
  s.contains_fn = [parts](const Vec& x) {
    for (const auto& p : parts)
      if (p.contains(x)) return true;
    return false;
  };
  if (chords)
    s.chord = [parts](const Vec& p, const Vec& d, double s0, double s1) {
      Intervals out;
      for (const auto& q : parts) out = interval_union(std::move(out), q.chord(p, d, s0, s1));
      return out;
    };
  s.name = "union";
  return s;
}

inline SetOracle set_intersection(const std::vector<SetOracle>& parts) {
  if (parts.empty()) throw EmptySet("set_intersection: no parts");
  SetOracle s;
  s.n = parts.front().n;
  s.bbox = parts.front().bbox;
  bool chords = true;
  for (const auto& p : parts) {
    if (p.n != s.n) throw DimensionMismatch("set_intersection: dimension");
    s.bbox = s.bbox.intersect(p.bbox);
    chords = chords && p.has_chord();
  }
  if (s.bbox.inverted()) return empty_set(s.n);
  s.contains_fn = [parts](const Vec& x) {
    for (const auto& p : parts)
      if (!p.contains(x)) return false;
    return true;
  };
  if (chords)
    s.chord = [parts](const Vec& p, const Vec& d, double s0, double s1) {
      Intervals out = parts.front().chord(p, d, s0, s1);
      for (std::size_t i = 1; i < parts.size() && !out.empty(); ++i)
        out = interval_intersection(out, parts[i].chord(p, d, s0, s1));
      return out;
    };
  s.name = "intersection";
  return s;
}

/// within \ A.
inline SetOracle complement_within_box(const SetOracle& a, const Box& within) {
  SetOracle s;
  s.n = within.dim();
  s.bbox = within;
  s.contains_fn = [a](const Vec& x) { return !a.contains(x); };
  if (a.has_chord())
    s.chord = [a, within](const Vec& p, const Vec& d, double s0, double s1) -> Intervals {
      Intervals iv = detail::box_chord(within, p, d, s0, s1);
      if (iv.empty()) return iv;
      return interval_intersection(iv, interval_complement(a.chord(p, d, s0, s1), s0, s1));
    };
  s.name = "complement";
  return s;
}

/// Union of `count` balls with radii uniform in [r_min, r_max] and centers
/// uniform among positions keeping each ball inside `region`.
inline SetOracle random_ball_union(int count, double r_min, double r_max, std::uint64_t seed, const Box& region) {
  if (count < 1) throw EmptySet("random_ball_union: count must be positive");
  std::vector<SetOracle> balls;
  balls.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    KeyedStream rng(seed, 0xBA11, static_cast<std::uint64_t>(k));
    const double r = rng.uniform(r_min, r_max);
    Vec c(region.dim());
    for (int i = 0; i < region.dim(); ++i) {
      const double lo = region.lo[i] + r, hi = region.hi[i] - r;
      c[i] = hi > lo ? rng.uniform(lo, hi) : region.center()[i];
    }
    balls.push_back(ball(c, r));
  }
  SetOracle s = set_union(balls);
  s.name = "random_ball_union";
  return s;
}

/// Intervals of the depth-k Smith-Volterra-Cantor construction on [0, 1]:
/// stage j removes an open middle interval of length 4^-j from each of the
/// 2^(j-1) remaining intervals. The limit set has measure 1/2.
inline Intervals fat_cantor_intervals(int depth) {
  Intervals cur{{0.0, 1.0}};
  for (int j = 1; j <= depth; ++j) {
    const double gap = std::pow(4.0, -j);
    Intervals next;
    for (const auto& i : cur) {
      const double mid = 0.5 * (i.lo + i.hi);
      next.push_back({i.lo, mid - 0.5 * gap});
      next.push_back({mid + 0.5 * gap, i.hi});
    }
    cur = std::move(next);
  }
  return cur;
}

/// K_depth x [0, 1]^(n-1), K_depth the depth-k fat Cantor approximation in
/// the first coordinate.
inline SetOracle cantor_slab(int depth, int n = 2) {
  if (depth < 0 || depth > 20) throw ConfigError("cantor_slab: depth must be in [0, 20]");
  auto iv = fat_cantor_intervals(depth);
  const Box cube = Box::cube(n, 0.0, 1.0);
  SetOracle s;
  s.n = n;
  s.bbox = cube;
  s.contains_fn = [iv](const Vec& x) {
    auto it = std::upper_bound(iv.begin(), iv.end(), x[0], [](double v, const Interval& i) { return v < i.lo; });
    return it != iv.begin() && x[0] <= std::prev(it)->hi;
  };
  s.chord = [iv, cube](const Vec& p, const Vec& d, double s0, double s1) -> Intervals {
    Intervals base = detail::box_chord(cube, p, d, s0, s1);
    if (base.empty()) return base;
    if (std::abs(d[0]) < 1e-300) {
      auto it = std::upper_bound(iv.begin(), iv.end(), p[0], [](double v, const Interval& i) { return v < i.lo; });
      return (it != iv.begin() && p[0] <= std::prev(it)->hi) ? base : Intervals{};
    }
    Intervals along;
    along.reserve(iv.size());
    for (const auto& i : iv) {
      double a = (i.lo - p[0]) / d[0], b = (i.hi - p[0]) / d[0];
      if (a > b) std::swap(a, b);
      along.push_back({a, b});
    }
    if (d[0] < 0) std::reverse(along.begin(), along.end());
    return interval_intersection(base, along);
  };
  s.name = "cantor_slab";
  return s;
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

/// L^n(A) as vol(bbox) x hit fraction.
inline MeasureEstimate lebesgue_measure(const SetOracle& a, const Sampler& s) {
  if (a.bbox.inverted()) throw EmptyBox("lebesgue_measure: inverted bounding box");
  if (a.bbox.volume() == 0.0) return MeasureEstimate::exact(0.0);
  return integrate(a.n, a.bbox.volume(), s, [&](std::span<const double> u) {
    return a.contains(to_box(u, a.bbox)) ? 1.0 : 0.0;
  });
}

/// H^m(A ∩ B(x, r) ∩ (x + W)), integrated over the m-ball of radius r in the
/// affine plane. With a chord oracle the last plane direction is integrated
/// exactly, so only an (m-1)-dimensional integral is sampled (none for m = 1).
inline MeasureEstimate slice_measure(const SetOracle& a, const Vec& x, const Plane& w, double r, const Sampler& s) {
  if (!(r > 0.0)) throw ConfigError("slice_measure: radius must be positive");
  if (x.size() != a.n || w.n() != a.n) throw DimensionMismatch("slice_measure: dimension");
  const int m = w.m();
  // Quick reject: the slice disk lies outside the bounding box.
  for (int i = 0; i < a.n; ++i) {
    const double ext = r * std::sqrt(std::max(0.0, w.proj()(i, i)));
    if (x[i] + ext < a.bbox.lo[i] || x[i] - ext > a.bbox.hi[i]) return MeasureEstimate::exact(0.0);
  }
  if (s.use_oracle && a.slice)
    if (auto v = a.slice(x, w, r)) return MeasureEstimate::exact(std::max(0.0, *v));
  const Mat q = w.basis();
  if (s.use_oracle && a.has_chord()) {
    const Vec d = q.col(m - 1);
    auto chord_len = [&](const Vec& p, double h) { return total_length(a.chord(p, d, -h, h)); };
    if (m == 1) return MeasureEstimate::exact(chord_len(x, r));
    const Box cube = Box::cube(m - 1, -r, r);
    return integrate(m - 1, cube.volume(), s, [&](std::span<const double> u) {
      const Vec z = to_box(u, cube);
      const double rest = r * r - z.squaredNorm();
      if (rest <= 0.0) return 0.0;
      return chord_len(x + q.leftCols(m - 1) * z, std::sqrt(rest));
    });
  }
  const Box cube = Box::cube(m, -r, r);
  return integrate(m, cube.volume(), s, [&](std::span<const double> u) {
    const Vec z = to_box(u, cube);
    if (z.squaredNorm() > r * r) return 0.0;
    return a.contains(x + q * z) ? 1.0 : 0.0;
  });
}

/// Theta(x, r) = slice_measure / (alpha(m) r^m).
inline MeasureEstimate density_ratio(const SetOracle& a, const Vec& x, const Plane& w, double r, const Sampler& s) {
  MeasureEstimate e = slice_measure(a, x, w, r, s);
  const double denom = alpha(w.m()) * std::pow(r, w.m());
  e.value /= denom;
  e.std_error /= denom;
  return e;
}

/// Uniform rejection sample of a point of A.
inline Vec sample_point_in(const SetOracle& a, KeyedStream& rng, std::size_t max_tries = 1000000) {
  for (std::size_t k = 0; k < max_tries; ++k) {
    Vec x = rng.uniform_in_box(a.bbox);
    if (a.contains(x)) return x;
  }
  throw EmptySet("rejection sampling found no point of the set in " + std::to_string(max_tries) + " tries");
}

}  // namespace gmtlab

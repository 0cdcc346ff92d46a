#pragma once

// Polyballs C_W(x0, r), the bow-tie area bound, the nonlinear-stripe lower
// bound, the lower bound for Y on polyballs, and the two sampling
// experiments: slice densities Theta(x, r) along W(x), and the vanishing
// equivalence between L^n(A) and the mean slice mass.

#include "gmtlab/core.hpp"
#include "gmtlab/fibration.hpp"
#include "gmtlab/grassmann.hpp"
#include "gmtlab/planefield.hpp"
#include "gmtlab/sampling.hpp"
#include "gmtlab/setlib.hpp"

#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace gmtlab {

// ---------------------------------------------------------------------------
// Polyballs
// ---------------------------------------------------------------------------

struct Polyball {
  Vec x0;
  double r = 0.0;
  Plane w0;

  [[nodiscard]] int n() const { return w0.n(); }
  [[nodiscard]] int m() const { return w0.m(); }
  [[nodiscard]] bool contains(const Vec& x) const;
  [[nodiscard]] double volume() const { return alpha(m()) * alpha(n() - m()) * std::pow(r, n()); }
};

/// nu_{x0}(x - x0) = max(|P(x - x0)|, |Q(x - x0)|), P and Q the projections
/// onto W0 and its complement.
inline double polyball_norm(const Polyball& pb, const Vec& x) {
  const Vec d = x - pb.x0;
  const Vec p = pb.w0.project(d);
  return std::max(p.norm(), (d - p).norm());
}

inline bool Polyball::contains(const Vec& x) const { return polyball_norm(*this, x) <= r; }

inline Polyball polyball_at(const PlaneField& field, const Vec& x0, double r) { return {x0, r, field(x0)}; }

/// Central-difference gradient of nu at x.
inline Vec polyball_norm_gradient(const Polyball& pb, const Vec& x, double h) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vec e = Vec::Zero(x.size());
    e[i] = h;
    g[i] = (polyball_norm(pb, x + e) - polyball_norm(pb, x - e)) / (2.0 * h);
  }
  return g;
}

/// The polyball as a set oracle. Each of the two constraints is a quadratic
/// in s along a line, so chords are exact.
inline SetOracle polyball_set(const Polyball& pb) {
  SetOracle s;
  s.n = pb.n();
  const double ext = std::sqrt(2.0) * pb.r;
  s.bbox = Box(pb.x0.array() - ext, pb.x0.array() + ext);
  s.contains_fn = [pb](const Vec& x) { return pb.contains(x); };
  s.chord = [pb](const Vec& p, const Vec& d, double s0, double s1) -> Intervals {
    Intervals out{{s0, s1}};
    const Vec q = p - pb.x0;
    for (int part = 0; part < 2 && !out.empty(); ++part) {
      const Vec a = part == 0 ? pb.w0.project(d) : pb.w0.project_perp(d);
      const Vec b = part == 0 ? pb.w0.project(q) : pb.w0.project_perp(q);
      const double aa = a.squaredNorm(), ab = a.dot(b), c = b.squaredNorm() - pb.r * pb.r;
      if (aa < 1e-300) {
        if (c > 0) return {};
        continue;
      }
      const double disc = ab * ab - aa * c;
      if (disc <= 0) return {};
      const double sq = std::sqrt(disc);
      out = interval_intersection(out, {{(-ab - sq) / aa, (-ab + sq) / aa}});
    }
    return out;
  };
  s.name = "polyball";
  return s;
}

struct PolyballMeasure {
  double closed_form = 0.0;
  MeasureEstimate mc;
};

/// Closed form alpha(m) alpha(n-m) r^n and a Monte Carlo estimate over the
/// enclosing box of P-radius r times Q-radius r coordinates.
inline PolyballMeasure polyball_measure(const Polyball& pb, const Sampler& s) {
  if (!(pb.r > 0.0)) throw ConfigError("polyball_measure: radius must be positive");
  const int n = pb.n();
  const double ext = std::sqrt(2.0) * pb.r;
  const Box cube(pb.x0.array() - ext, pb.x0.array() + ext);
  PolyballMeasure out;
  out.closed_form = pb.volume();
  out.mc = integrate(n, cube.volume(), s, [&](std::span<const double> u) {
    return pb.contains(to_box(u, cube)) ? 1.0 : 0.0;
  });
  return out;
}

struct InclusionReport {
  double t = 0.0;        // nu(x - x0) / r
  double bound = 0.0;    // r (1 + t) + 8 m Lambda r^2
  double max_distance = 0.0;
  std::size_t checked = 0;
  std::size_t violations = 0;
};

/// Checks `samples` points of C_W(x0, r) ∩ W(x) for membership in
/// B(x, r (1 + t) + 8 m Lambda r^2), Lambda the effective constant of ff.
inline InclusionReport pb_inclusion_check(const Polyball& pb, const FrameField& ff, const Vec& x, std::size_t samples,
                                          std::uint64_t seed, double tol = 1e-12) {
  if (!pb.contains(x)) throw HypothesisFailed("inclusion check: x is not in the polyball");
  if (std::sqrt(2.0) * pb.r > ff.radius() + 1e-12 || (pb.x0 - ff.x0()).norm() > 1e-12 + ff.radius() - std::sqrt(2.0) * pb.r)
    throw OutOfNeighborhood("inclusion check: polyball is not inside the frame ball");
  const int m = pb.m();
  InclusionReport rep;
  rep.t = polyball_norm(pb, x) / pb.r;
  rep.bound = pb.r * (1.0 + rep.t) + 8.0 * m * ff.lambda_effective() * pb.r * pb.r;
  const Mat w = ff.w(x);
  const double reach = 2.0 * std::sqrt(2.0) * pb.r;
  for (std::size_t k = 0; rep.checked < samples && k < 64 * samples; ++k) {
    KeyedStream rng(seed, 0x1C1, k);
    // Half the samples on the sphere of radius reach' in W(x) found by
    // bisection along a random direction, half uniform in the disk.
    const Vec dir = rng.unit_vector(m);
    Vec p;
    if (k % 2 == 0) {
      double lo = 0.0, hi = reach;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (pb.contains(x + w * (mid * dir))) lo = mid; else hi = mid;
      }
      p = x + w * (lo * dir);
    } else {
      p = x + w * rng.uniform_in_ball(m, reach);
      if (!pb.contains(p)) continue;
    }
    ++rep.checked;
    const double d = (p - x).norm();
    rep.max_distance = std::max(rep.max_distance, d);
    if (d > rep.bound + tol) ++rep.violations;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Bow-tie lemma
// ---------------------------------------------------------------------------

/// S = {origin + B z + C f(z) : |z| <= radius}, B and C orthonormal bases of
/// W and W^perp, f : R^m -> R^{n-m}.
struct GraphPatch {
  Plane w;
  Vec origin;
  std::function<Vec(const Vec&)> f;
  double radius = 1.0;
  Mat b;  // basis of W
  Mat c;  // basis of W^perp

  GraphPatch(Plane w_, Vec origin_, std::function<Vec(const Vec&)> f_, double radius_)
      : w(std::move(w_)), origin(std::move(origin_)), f(std::move(f_)), radius(radius_),
        b(w.basis()), c(w.complement().basis()) {}

  [[nodiscard]] Vec point(const Vec& z) const { return origin + b * z + c * f(z); }
};

/// Random patch over a random plane: f(z) = A z + beta sin(omega <k, z>),
/// with Lip f <= 0.95 tau / sqrt(1 - tau^2), so the cone condition holds
/// with constant tau.
inline GraphPatch random_graph_patch(int n, int m, double tau, KeyedStream& rng) {
  const int k = n - m;
  const Plane w = random_plane(n, m, rng);
  const Vec origin = rng.uniform_in_box(Box::cube(n, -1.0, 1.0));
  const double radius = rng.uniform(0.2, 1.0);
  const double lip = tau >= 1.0 ? 0.0 : 0.95 * tau / std::sqrt(1.0 - tau * tau);
  Mat a(k, m);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = rng.normal();
  const double an = operator_norm(a);
  const double split = rng.uniform(0.3, 1.0);
  if (an > 0) a *= split * lip / an;
  const Vec kdir = rng.unit_vector(m);
  const double omega = rng.uniform(1.0, 8.0) / radius;
  const Vec beta = rng.unit_vector(k) * ((1.0 - split) * lip / omega);
  auto f = [a, kdir, omega, beta](const Vec& z) -> Vec { return a * z + beta * std::sin(omega * kdir.dot(z)); };
  return GraphPatch(w, origin, f, radius);
}

struct BowtieReport {
  MeasureEstimate area;        // H^m(S)
  double diameter = 0.0;       // over the sampled points
  double bound = 0.0;          // (1 - tau^2)^{-m/2} alpha(m) diam^m
  double max_cone_ratio = 0.0; // max |P_perp(x - x')| / |x - x'|
  double min_projection_ratio = 1.0;  // min |P_W(x - x')| / |x - x'|
  bool injective = true;
  bool ok = false;
};

/// Checks the cone hypothesis on sampled pairs (HypothesisFailed if it
/// fails), then compares the graph area int sqrt(det(I + Df^T Df)) with the
/// bow-tie bound under 3 sigma slack.
inline BowtieReport bowtie_check(const GraphPatch& patch, double tau, std::size_t points, const Sampler& s) {
  if (!(tau >= 0.0 && tau < 1.0)) throw ConfigError("bowtie_check: tau must be in [0, 1)");
  const int m = patch.w.m(), n = patch.w.n();
  std::vector<Vec> pts;
  pts.reserve(points + 64);
  // Boundary points first; they carry the diameter.
  const std::size_t rim = m == 1 ? 2 : 64;
  for (std::size_t k = 0; k < rim; ++k) {
    Vec z(m);
    if (m == 1) {
      z[0] = k == 0 ? -patch.radius : patch.radius;
    } else {
      KeyedStream rng(s.seed, derive_key(s.stream, 0xB0), k);
      z = rng.unit_vector(m) * patch.radius;
    }
    pts.push_back(patch.point(z));
  }
  for (std::size_t k = 0; k < points; ++k) {
    KeyedStream rng(s.seed, derive_key(s.stream, 0xB1), k);
    pts.push_back(patch.point(rng.uniform_in_ball(m, patch.radius)));
  }
  BowtieReport rep;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const Vec d = pts[i] - pts[j];
      const double dn = d.norm();
      rep.diameter = std::max(rep.diameter, dn);
      if (dn < 1e-14) continue;
      const Vec p = patch.w.project(d);
      rep.max_cone_ratio = std::max(rep.max_cone_ratio, (d - p).norm() / dn);
      rep.min_projection_ratio = std::min(rep.min_projection_ratio, p.norm() / dn);
    }
  if (rep.max_cone_ratio > tau + 1e-12)
    throw HypothesisFailed("bow-tie check: cone condition violated (ratio " + std::to_string(rep.max_cone_ratio) +
                           " > tau " + std::to_string(tau) + ")");
  rep.injective = rep.min_projection_ratio >= std::sqrt(1.0 - tau * tau) - 1e-12;
  const double h = 1e-6 * patch.radius;
  const Box cube = Box::cube(m, -patch.radius, patch.radius);
  rep.area = integrate(m, cube.volume(), s, [&](std::span<const double> u) {
    const Vec z = to_box(u, cube);
    if (z.norm() > patch.radius) return 0.0;
    Mat df(n - m, m);
    for (int j = 0; j < m; ++j) {
      Vec e = Vec::Zero(m);
      e[j] = h;
      df.col(j) = (patch.f(z + e) - patch.f(z - e)) / (2.0 * h);
    }
    const Mat g = Mat::Identity(m, m) + df.transpose() * df;
    return std::sqrt(g.determinant());
  });
  rep.bound = std::pow(1.0 - tau * tau, -0.5 * m) * alpha(m) * std::pow(rep.diameter, m);
  rep.ok = rep.injective && rep.area.value - 3.0 * rep.area.std_error <= rep.bound;
  return rep;
}

// ---------------------------------------------------------------------------
// Nonlinear stripe and the polyball lower bound
// ---------------------------------------------------------------------------

/// Largest Lambda * r admitted by the polyball checks.
inline constexpr double kPolyballGate = 0.01;

inline void require_polyball_in_frame_ball(const Polyball& pb, const FrameField& ff) {
  if ((pb.x0 - ff.x0()).norm() + std::sqrt(2.0) * pb.r > ff.radius() * (1.0 + 1e-9))
    throw HypothesisFailed("polyball is not inside the frame ball");
}

struct StripeReport {
  MeasureEstimate volume;  // L^n(C_W(x0, r) ∩ g_u^{-1}(C_c))
  double bound = 0.0;      // alpha(m) r^m L^{n-m}(C_c) / (1 + eps)
  double constant_field_volume = 0.0;  // alpha(m) r^m L^{n-m}(C_c)
  double height = 0.0;     // |g_u(x0)|
  bool ok = false;
};

/// L^n(C_W(x0, r) ∩ {|g_u| <= c}) >= alpha(m) r^m alpha(n-m) c^{n-m} / (1 + eps).
inline StripeReport stripe_check(const Polyball& pb, const FrameField& ff, const Vec& u, double c, double epsilon,
                                 const Sampler& s, double gate = kPolyballGate) {
  const int n = pb.n(), m = pb.m(), k = n - m;
  const double lam = ff.lambda_effective();
  if (!(epsilon > 0.0 && epsilon < 1.0 / 3.0)) throw HypothesisFailed("stripe check: need 0 < eps < 1/3");
  if (!pb.contains(u)) throw HypothesisFailed("stripe check: u is not in the polyball");
  if (c < 0.0 || c > epsilon * pb.r * (1.0 + 1e-12)) throw HypothesisFailed("stripe check: need 0 <= c <= eps r");
  if (lam * pb.r > gate)
    throw HypothesisFailed("stripe check: Lambda * r = " + std::to_string(lam * pb.r) + " exceeds the gate " +
                           std::to_string(gate));
  require_polyball_in_frame_ball(pb, ff);
  StripeReport rep;
  rep.height = g_eval(ff, u, pb.x0).norm();
  if (rep.height > (1.0 - 3.0 * epsilon) * pb.r)
    throw HypothesisFailed("stripe check: |g_u(x0)| exceeds (1 - 3 eps) r");
  rep.constant_field_volume = alpha(m) * std::pow(pb.r, m) * alpha(k) * std::pow(c, k);
  rep.bound = rep.constant_field_volume / (1.0 + epsilon);
  if (c == 0.0) {
    rep.volume = MeasureEstimate::exact(0.0);
    rep.ok = true;
    return rep;
  }
  // x = x0 + B a + C b with |a| <= r, and b within c + 4 Lambda r^2 of
  // Q0(u - x0): every stripe point lies there.
  Mat basis(n, n);
  basis.leftCols(m) = pb.w0.basis();
  basis.rightCols(k) = pb.w0.complement().basis();
  const Vec bq = basis.rightCols(k).transpose() * (u - pb.x0);
  const double cw = std::min(pb.r + bq.norm(), c + 1.01 * 4.0 * lam * pb.r * pb.r + 1e-12);
  Vec lo(n), hi(n);
  lo << Vec::Constant(m, -pb.r), bq.array() - cw;
  hi << Vec::Constant(m, pb.r), bq.array() + cw;
  const Box region(lo, hi);
  rep.volume = integrate(n, region.volume(), s, [&](std::span<const double> z) {
    const Vec q = to_box(z, region);
    if (q.head(m).norm() > pb.r || q.tail(k).norm() > pb.r) return 0.0;
    const Vec x = pb.x0 + basis * q;
    return ff.field()(x).project_perp(x - u).norm() <= c ? 1.0 : 0.0;
  });
  rep.ok = rep.volume.value + 3.0 * rep.volume.std_error >= rep.bound;
  return rep;
}

struct PolyballLowerReport {
  MeasureEstimate coverage;  // L^n(A ∩ C_W)
  MeasureEstimate lhs;       // int_{A ∩ C_W} Y_{A ∩ C_W} W
  double rhs = 0.0;          // (1 - c eps) alpha(m) r^m L^n(C_W)
  double c_config = 8.0;
  bool ok = false;
};

/// int_{A ∩ C_W} Y_{A ∩ C_W} W(u) du >= (1 - c eps) alpha(m) r^m L^n(C_W), Y at
/// the given delta, 3 sigma slack. Hypothesis L^n(A ∩ C_W) >= (1 - eps) L^n(C_W)
/// is checked by Monte Carlo.
inline PolyballLowerReport check_lower_bound_54(const Polyball& pb, const SetOracle& a, const FrameField& ff,
                                                double epsilon, double delta, const Sampler& s,
                                                double c_config = 8.0, double gate = kPolyballGate) {
  const int n = pb.n(), m = pb.m(), k = n - m;
  if (!(epsilon > 0.0 && epsilon < 1.0 / 3.0)) throw HypothesisFailed("polyball lower bound: need 0 < eps < 1/3");
  if (ff.lambda_effective() * pb.r > gate)
    throw HypothesisFailed("polyball lower bound: Lambda * r exceeds the gate " + std::to_string(gate));
  require_polyball_in_frame_ball(pb, ff);
  const SetOracle inside = set_intersection({a, polyball_set(pb)});
  PolyballLowerReport rep;
  rep.c_config = c_config;
  Mat basis(n, n);
  basis.leftCols(m) = pb.w0.basis();
  basis.rightCols(k) = pb.w0.complement().basis();
  const Box cube = Box::cube(n, -pb.r, pb.r);
  auto in_pb = [&](const Vec& q) { return q.head(m).norm() <= pb.r && q.tail(k).norm() <= pb.r; };
  rep.coverage = integrate(n, cube.volume(), s.child(1), [&](std::span<const double> z) {
    const Vec q = to_box(z, cube);
    return in_pb(q) && a.contains(pb.x0 + basis * q) ? 1.0 : 0.0;
  });
  if (rep.coverage.value + 3.0 * rep.coverage.std_error < (1.0 - epsilon) * pb.volume())
    throw HypothesisFailed("polyball lower bound: L^n(A ∩ C_W) < (1 - eps) L^n(C_W)");
  const Sampler inner_base = s.child(2).with_samples(s.inner_samples);
  rep.lhs = integrate(n, cube.volume(), detail::outer_sampler(s).child(3), [&](std::span<const double> z) -> InnerSample {
    const Vec q = to_box(z, cube);
    if (!in_pb(q)) return {0.0, 0.0};
    const Vec u = pb.x0 + basis * q;
    if (!a.contains(u)) return {0.0, 0.0};
    Sampler in = inner_base;
    in.stream = derive_key(inner_base.stream, hash_point(z));
    in.threads = 1;
    const auto y = y_estimate(inside, ff, u, delta, in);
    return {y.value, y.std_error * y.std_error};
  });
  rep.rhs = (1.0 - c_config * epsilon) * alpha(m) * std::pow(pb.r, m) * pb.volume();
  rep.ok = rep.lhs.value + 3.0 * rep.lhs.std_error >= rep.rhs;
  return rep;
}

struct PositivityReport {
  std::size_t points = 0;
  std::size_t non_positive = 0;  // y_estimate within 3 sigma of 0
  double fraction = 0.0;
  std::vector<MeasureEstimate> values;
};

/// Fraction of sampled u in E whose Y estimate is not distinguishable from 0.
inline PositivityReport z_positive_check(const SetOracle& e, const FrameField& ff, std::size_t count, double delta,
                                         const Sampler& s) {
  PositivityReport rep;
  for (std::size_t i = 0; i < count; ++i) {
    KeyedStream rng(s.seed, derive_key(s.stream, 0x2505), i);
    const Vec u = sample_point_in(e, rng);
    const auto y = y_estimate(e, ff, u, delta, s.child(i));
    rep.values.push_back(y);
    ++rep.points;
    if (y.value <= 3.0 * y.std_error) ++rep.non_positive;
  }
  rep.fraction = rep.points ? double(rep.non_positive) / double(rep.points) : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Density experiment
// ---------------------------------------------------------------------------

struct DensityPoint {
  Vec x;
  std::vector<MeasureEstimate> theta;  // one per radius
};

struct DensityPrefix {
  double r_min = 0.0;
  double below_fraction = 0.0;
  double std_error = 0.0;
  double min_max_theta = 0.0;
};

struct DensityResult {
  std::vector<double> r_grid;
  std::vector<DensityPoint> points;
  std::vector<DensityPrefix> prefixes;  // prefix k uses r_grid[0..k]
  double threshold = 0.0;               // (1 - margin) / 2^n
  bool nonincreasing = true;            // within 2 standard errors
};

/// Theta(x, r) = H^m(A ∩ B(x, r) ∩ W(x)) / (alpha(m) r^m) at x_count points
/// sampled uniformly in A, for every r of a strictly decreasing grid.
inline DensityResult density_experiment(const SetOracle& a, const PlaneField& field, std::size_t x_count,
                                        const std::vector<double>& r_grid, const Sampler& s, double margin = 0.1,
                                        double r_floor = 1e-6) {
  if (r_grid.empty()) throw ConfigError("density experiment: empty radius grid");
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (!(r_grid[i] >= r_floor)) throw ConfigError("density experiment: radius below the configured floor");
    if (i > 0 && !(r_grid[i] < r_grid[i - 1])) throw ConfigError("density experiment: radius grid must be strictly decreasing");
  }
  DensityResult res;
  res.r_grid = r_grid;
  res.threshold = (1.0 - margin) / std::pow(2.0, field.n);
  auto rows = run_batches(x_count, s.threads, [&](std::size_t i) {
    KeyedStream rng(s.seed, derive_key(s.stream, 0xDE5), i);
    DensityPoint p;
    p.x = sample_point_in(a, rng);
    const Plane w = field(p.x);
    Sampler in = s.child(i);
    in.threads = 1;
    for (std::size_t j = 0; j < r_grid.size(); ++j) p.theta.push_back(density_ratio(a, p.x, w, r_grid[j], in.child(j)));
    return p;
  });
  res.points = std::move(rows);
  const double nn = static_cast<double>(x_count);
  std::vector<double> running(x_count, 0.0);
  for (std::size_t j = 0; j < r_grid.size(); ++j) {
    std::size_t below = 0;
    double min_max = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x_count; ++i) {
      running[i] = std::max(running[i], res.points[i].theta[j].value);
      if (running[i] < res.threshold) ++below;
      min_max = std::min(min_max, running[i]);
    }
    DensityPrefix pre;
    pre.r_min = r_grid[j];
    pre.below_fraction = x_count ? double(below) / nn : 0.0;
    pre.std_error = x_count ? std::sqrt(pre.below_fraction * (1.0 - pre.below_fraction) / nn) : 0.0;
    pre.min_max_theta = x_count ? min_max : 0.0;
    res.prefixes.push_back(pre);
  }
  for (std::size_t j = 1; j < res.prefixes.size(); ++j) {
    const auto& p = res.prefixes[j - 1];
    const auto& q = res.prefixes[j];
    if (q.below_fraction > p.below_fraction + 2.0 * std::hypot(p.std_error, q.std_error)) res.nonincreasing = false;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Vanishing equivalence
// ---------------------------------------------------------------------------

struct FubiniReport {
  MeasureEstimate lebesgue;    // L^n(A)
  MeasureEstimate mean_slice;  // mean over u in the domain of Y_A W(u) at delta
  bool lebesgue_zero = false;  // within 3 sigma of 0
  bool slice_zero = false;
  bool consistent = false;     // both vanish or neither does
};

inline FubiniReport fubini_equivalence_check(const SetOracle& a, const FrameField& ff, const Box& domain, double delta,
                                             const Sampler& s) {
  FubiniReport rep;
  rep.lebesgue = a.bbox.inverted() || a.bbox.volume() == 0.0 ? MeasureEstimate::exact(0.0) : lebesgue_measure(a, s.child(1));
  if (a.bbox.inverted() || a.bbox.volume() == 0.0) {
    rep.mean_slice = MeasureEstimate::exact(0.0);
  } else {
    const Sampler inner_base = s.child(2).with_samples(s.inner_samples);
    rep.mean_slice = integrate(domain.dim(), 1.0, detail::outer_sampler(s).child(3), [&](std::span<const double> z) -> InnerSample {
      const Vec u = to_box(z, domain);
      Sampler in = inner_base;
      in.stream = derive_key(inner_base.stream, hash_point(z));
      in.threads = 1;
      const auto y = y_estimate(a, ff, u, delta, in);
      return {y.value, y.std_error * y.std_error};
    });
  }
  rep.lebesgue_zero = rep.lebesgue.value <= 3.0 * rep.lebesgue.std_error;
  rep.slice_zero = rep.mean_slice.value <= 3.0 * rep.mean_slice.std_error;
  rep.consistent = rep.lebesgue_zero == rep.slice_zero;
  return rep;
}

/// Least-squares slope of log(value) against log(width).
inline double loglog_slope(const std::vector<double>& widths, const std::vector<double>& values) {
  const std::size_t k = widths.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += std::log(widths[i]);
    my += std::log(values[i]);
  }
  mx /= double(k);
  my /= double(k);
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = std::log(widths[i]) - mx;
    sxy += dx * (std::log(values[i]) - my);
    sxx += dx * dx;
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

}  // namespace gmtlab

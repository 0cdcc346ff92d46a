#pragma once

// The fibered spaces
//   Sigma   = {(x, u) : x in E, u in W(x)},            F(x,t)   = (x, x + sum t_i w_i(x)),
//   Sigma^_r = {(x, u, y) : u in W(x) + sum y_i v_i(x)}, F^(x,t,y) = (x, F_2(x,t) + sum y_i v_i(x), y),
// their coarea Jacobian factors, the two coarea identities, and the slice
// functionals phi_{E,W}, Z_E W (ball averages) and Y_E W (delta averages).

#include "gmtlab/core.hpp"
#include "gmtlab/planefield.hpp"
#include "gmtlab/sampling.hpp"
#include "gmtlab/setlib.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gmtlab {

inline constexpr double kJacobianTol = 1e-5;
inline constexpr double kMaxTangentCondition = 1e8;

struct SigmaPoint {
  Vec x;
  Vec t;
  Vec u;
  std::optional<Vec> y;
};

inline SigmaPoint sigma_point(const FrameField& ff, const Vec& x, const Vec& t) {
  if (t.size() != ff.m()) throw DimensionMismatch("sigma_point: t dimension");
  return {x, t, x + ff.w(x) * t, std::nullopt};
}

inline SigmaPoint sigma_hat_point(const FrameField& ff, const Vec& x, const Vec& t, const Vec& y) {
  if (t.size() != ff.m() || y.size() != ff.n() - ff.m()) throw DimensionMismatch("sigma_hat_point: dimension");
  const Mat f = ff.frame(x);
  return {x, t, x + f.leftCols(ff.m()) * t + f.rightCols(ff.n() - ff.m()) * y, y};
}

struct JacobianReport {
  double value = 0.0;
  double lower_bound = 0.0;
  double upper_bound = 1.0;
  bool within_bounds = false;
  double fd_step = 0.0;
};

// ---------------------------------------------------------------------------
// Closed-form bounds, d = |x - u|
// ---------------------------------------------------------------------------

inline double bound_pi1_lower(int n, int m, double lambda, double d) {
  const double a = m * lambda * d;
  return std::pow(1.0 + a * a, -0.5 * m) * std::pow(2.0 + 2.0 * a + a * a, -0.5 * (n - m));
}

inline double bound_pi2_lower(int n, int m, double lambda, double d) {
  const double a = m * lambda * d;
  const double num = 1.0 / std::sqrt(binomial(n, n - m)) - (n - m) * a * std::pow(1.0 + a, n - m - 1);
  return num / std::pow(2.0 + 2.0 * a + a * a, 0.5 * (n - m));
}

inline double bound_pi13_lower(int n, int m, double lambda, double d) {
  const double a = n * lambda * d;
  return std::pow(2.0, -(n - m)) * std::pow(1.0 + 2.0 * a + 2.0 * a * a, -0.5 * n);
}

// ---------------------------------------------------------------------------
// Tangent spaces
// ---------------------------------------------------------------------------

struct Tangent {
  Mat q;            // orthonormal basis of the tangent space (columns)
  double area = 0;  // area factor JF of the parametrization
};

namespace detail {

/// Columns dF/dx_p, dF/dt_k (and dF/dy_l when y is present) by central
/// differences of the frame, orthonormalized.
inline Tangent tangent(const FrameField& ff, const Vec& x, const Vec& t, const Vec* y, double h) {
  const int n = ff.n(), m = ff.m(), k = n - m;
  const int rows = y ? 3 * n - m : 2 * n;
  const int cols = y ? 2 * n : n + m;
  const Mat f = ff.frame(x);
  Vec coef(n);
  coef.head(m) = t;
  if (y) coef.tail(k) = *y; else coef.tail(k).setZero();
  Mat tan = Mat::Zero(rows, cols);
  for (int p = 0; p < n; ++p) {
    Vec e = Vec::Zero(n);
    e[p] = h;
    const Mat df = (ff.frame_unchecked(x + e) - ff.frame_unchecked(x - e)) / (2.0 * h);
    tan(p, p) = 1.0;
    tan.block(n, p, n, 1) = df * coef;
    tan(n + p, p) += 1.0;
  }
  for (int j = 0; j < m; ++j) tan.block(n, n + j, n, 1) = f.col(j);
  if (y)
    for (int l = 0; l < k; ++l) {
      tan.block(n, n + m + l, n, 1) = f.col(m + l);
      tan(2 * n + l, n + m + l) = 1.0;
    }
  Eigen::JacobiSVD<Mat> svd(tan, Eigen::ComputeThinU);
  const Vec s = svd.singularValues();
  const double smin = s[s.size() - 1];
  if (!(smin > 0.0) || s[0] / smin > kMaxTangentCondition)
    throw TangentDegenerate("tangent basis condition number exceeds 1e8");
  return {svd.matrixU(), s.prod()};
}

inline Mat rows_of(const Mat& q, std::initializer_list<std::pair<int, int>> ranges) {
  int total = 0;
  for (auto [a, len] : ranges) total += len;
  Mat out(total, q.cols());
  int r = 0;
  for (auto [a, len] : ranges) {
    out.middleRows(r, len) = q.middleRows(a, len);
    r += len;
  }
  return out;
}

inline double j_pi1(const FrameField& ff, const Tangent& tg) { return wedge_norm(tg.q.topRows(ff.n()), ff.n()); }
inline double j_pi2(const FrameField& ff, const Tangent& tg) { return wedge_norm(tg.q.middleRows(ff.n(), ff.n()), ff.n()); }
inline double j_pi13(const FrameField& ff, const Tangent& tg) {
  const int n = ff.n(), k = n - ff.m();
  return wedge_norm(rows_of(tg.q, {{0, n}, {2 * n, k}}), n + k);
}
inline double j_pi23(const FrameField& ff, const Tangent& tg) {
  const int n = ff.n(), k = n - ff.m();
  return wedge_norm(rows_of(tg.q, {{n, n}, {2 * n, k}}), n + k);
}

inline JacobianReport make_report(double value, double lower, double upper, double h) {
  return {value, lower, upper, lower - kJacobianTol <= value && value <= upper + kJacobianTol, h};
}

}  // namespace detail

inline Tangent sigma_tangent(const FrameField& ff, const SigmaPoint& p) {
  return detail::tangent(ff, p.x, p.t, p.y ? &*p.y : nullptr, default_fd_step(ff));
}

inline JacobianReport jacobian_pi1(const FrameField& ff, const SigmaPoint& p) {
  const double h = default_fd_step(ff);
  const auto tg = detail::tangent(ff, p.x, p.t, nullptr, h);
  const double d = (p.u - p.x).norm();
  return detail::make_report(detail::j_pi1(ff, tg), bound_pi1_lower(ff.n(), ff.m(), ff.lambda_effective(), d), 1.0, h);
}

inline JacobianReport jacobian_pi2(const FrameField& ff, const SigmaPoint& p) {
  const double h = default_fd_step(ff);
  const auto tg = detail::tangent(ff, p.x, p.t, nullptr, h);
  const double d = (p.u - p.x).norm();
  return detail::make_report(detail::j_pi2(ff, tg), bound_pi2_lower(ff.n(), ff.m(), ff.lambda_effective(), d), 1.0, h);
}

inline JacobianReport jacobian_pi13(const FrameField& ff, const SigmaPoint& p) {
  if (!p.y) throw DimensionMismatch("jacobian_pi13: point has no y component");
  const double h = default_fd_step(ff);
  const auto tg = detail::tangent(ff, p.x, p.t, &*p.y, h);
  const double d = (p.u - p.x).norm();
  return detail::make_report(detail::j_pi13(ff, tg), bound_pi13_lower(ff.n(), ff.m(), ff.lambda_effective(), d), 1.0, h);
}

/// Only the upper bound 1 is asserted; lower_bound is 0.
inline JacobianReport jacobian_pi23(const FrameField& ff, const SigmaPoint& p) {
  if (!p.y) throw DimensionMismatch("jacobian_pi23: point has no y component");
  const double h = default_fd_step(ff);
  const auto tg = detail::tangent(ff, p.x, p.t, &*p.y, h);
  return detail::make_report(detail::j_pi23(ff, tg), 0.0, 1.0, h);
}

// ---------------------------------------------------------------------------
// phi_{E,W} and the coarea identities
// ---------------------------------------------------------------------------

struct CoareaCheck {
  MeasureEstimate left;
  MeasureEstimate right;
  bool agree = false;
};

inline bool agree_within(const MeasureEstimate& a, const MeasureEstimate& b, double k = 3.0) {
  return std::abs(a.value - b.value) <= k * std::hypot(a.std_error, b.std_error) + 1e-12;
}

namespace detail {

/// Outer sampler of a nested estimate whose inner estimates are costly: the
/// total budget `samples` is split as (samples / inner_samples) outer points.
inline Sampler outer_sampler(const Sampler& s) {
  return s.with_samples(std::max<std::size_t>(256, s.samples / std::max<std::size_t>(1, s.inner_samples)));
}

/// Largest distance between a point of box a and a point of box b.
inline double max_box_distance(const Box& a, const Box& b) {
  Vec d(a.dim());
  for (int i = 0; i < a.dim(); ++i) d[i] = std::max(std::abs(a.hi[i] - b.lo[i]), std::abs(b.hi[i] - a.lo[i]));
  return d.norm();
}

}  // namespace detail

/// phi_{E,W}(B) = int_E H^m(B ∩ W(x)) dx: outer Monte Carlo over x in E,
/// inner slice_measure of B over a disk covering B's bounding box.
inline MeasureEstimate phi_measure(const SetOracle& e, const SetOracle& b, const FrameField& ff, const Sampler& s) {
  if (e.bbox.volume() == 0.0 || b.bbox.inverted() || b.bbox.volume() == 0.0) return MeasureEstimate::exact(0.0);
  const Sampler inner = s.child(0x9F1).with_samples(s.inner_samples);
  const int n = ff.n();
  return integrate(n, e.bbox.volume(), s, [&](std::span<const double> z) -> InnerSample {
    const Vec x = to_box(z, e.bbox);
    if (!e.contains(x)) return {0.0, 0.0};
    const double r = b.bbox.max_distance_from(x) * 1.001 + 1e-12;
    Sampler in = inner;
    in.stream = derive_key(inner.stream, hash_point(z));
    in.threads = 1;
    const auto est = slice_measure(b, x, ff.field()(x), r, in);
    return {est.value, est.std_error * est.std_error};
  });
}

/// Both sides of int_{Sigma_B} J pi_1 dH^{n+m} = phi_{E,W}(B). The left side
/// is pulled back through F over E x [-T, T]^m, T covering every slice of B
/// with 10% padding.
inline CoareaCheck coarea_check_pi1(const SetOracle& e, const SetOracle& b, const FrameField& ff, const Sampler& s) {
  CoareaCheck c;
  c.right = phi_measure(e, b, ff, s.child(1));
  if (e.bbox.volume() == 0.0 || b.bbox.volume() == 0.0 || b.bbox.inverted()) {
    c.left = MeasureEstimate::exact(0.0);
    c.agree = agree_within(c.left, c.right);
    return c;
  }
  const int n = ff.n(), m = ff.m();
  const double t_max = 1.1 * detail::max_box_distance(e.bbox, b.bbox);
  const Box region(
      (Vec(n + m) << e.bbox.lo, Vec::Constant(m, -t_max)).finished(),
      (Vec(n + m) << e.bbox.hi, Vec::Constant(m, t_max)).finished());
  const double h = default_fd_step(ff);
  c.left = integrate(n + m, region.volume(), s.child(2), [&](std::span<const double> z) {
    const Vec p = to_box(z, region);
    const Vec x = p.head(n), t = p.tail(m);
    if (!e.contains(x)) return 0.0;
    const Vec u = x + ff.w(x) * t;
    if (!b.contains(u)) return 0.0;
    const auto tg = detail::tangent(ff, x, t, nullptr, h);
    return detail::j_pi1(ff, tg) * tg.area;
  });
  c.agree = agree_within(c.left, c.right);
  return c;
}

/// Delta-average slice mass through the Euclidean coarea formula:
///   (1 / (alpha(n-m) delta^(n-m))) int_E 1{|g_u(x)| <= delta} Jg_u(x) dx.
/// x is sampled in whichever is smaller: the bounding box of E or the tube
/// around u + W0(u) that contains {x in E : |g_u(x)| <= delta}.
inline MeasureEstimate y_estimate(const SetOracle& e, const FrameField& ff, const Vec& u, double delta, const Sampler& s);

namespace detail {

/// Sampling region for x in E near u + W0(u): coordinates c in an
/// orthonormal basis adapted to W0(u), lo_i <= c_i <= hi_i.
struct Tube {
  Vec u;
  Mat basis;  // [basis of W0(u) | basis of W0(u)^perp]
  Vec lo, hi;
  [[nodiscard]] double volume() const {
    double v = 1.0;
    for (Eigen::Index i = 0; i < lo.size(); ++i) v *= std::max(0.0, hi[i] - lo[i]);
    return v;
  }
  [[nodiscard]] Vec point(std::span<const double> z) const {
    Vec c(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i) c[i] = lo[i] + (hi[i] - lo[i]) * z[static_cast<std::size_t>(i)];
    return u + basis * c;
  }
};

/// Tube of transverse half-width width + Lambda D^2 (D = farthest point of
/// E's box from u); it contains every x in E with |P_{W0(x)^perp}(x-u)| <= width.
/// Each coordinate range is clipped to the projection of E's box.
inline Tube tube_for(const SetOracle& e, const FrameField& ff, const Vec& u, double width) {
  const int n = ff.n(), m = ff.m();
  const Plane w0 = ff.field()(u);
  Tube t;
  t.u = u;
  t.basis.resize(n, n);
  t.basis.leftCols(m) = w0.basis();
  t.basis.rightCols(n - m) = w0.complement().basis();
  const double d = e.bbox.max_distance_from(u);
  const double half_y = std::min(d, width + 1.01 * ff.lambda_effective() * d * d + 1e-12);
  const Vec center = e.bbox.center() - u;
  const Vec half = 0.5 * (e.bbox.hi - e.bbox.lo);
  t.lo.resize(n);
  t.hi.resize(n);
  for (int i = 0; i < n; ++i) {
    const double lim = i < m ? d : half_y;
    const double c = t.basis.col(i).dot(center);
    const double spread = t.basis.col(i).cwiseAbs().dot(half);
    t.lo[i] = std::max(-lim, c - spread);
    t.hi[i] = std::min(lim, c + spread);
  }
  return t;
}

/// Integral over E of f(x), restricted to points near u + W0(u).
template <class F>
MeasureEstimate integrate_near_plane(const SetOracle& e, const FrameField& ff, const Vec& u, double width,
                                     const Sampler& s, F&& f) {
  const int n = ff.n();
  const Tube tube = tube_for(e, ff, u, width);
  if (tube.volume() == 0.0) return MeasureEstimate::exact(0.0);
  if (tube.volume() < e.bbox.volume())
    return integrate(n, tube.volume(), s, [&](std::span<const double> z) {
      const Vec x = tube.point(z);
      return e.contains(x) ? f(x) : 0.0;
    });
  return integrate(n, e.bbox.volume(), s, [&](std::span<const double> z) {
    const Vec x = to_box(z, e.bbox);
    return e.contains(x) ? f(x) : 0.0;
  });
}

}  // namespace detail

inline MeasureEstimate y_estimate(const SetOracle& e, const FrameField& ff, const Vec& u, double delta, const Sampler& s) {
  if (!(delta > 0.0)) throw ConfigError("y_estimate: delta must be positive");
  if (e.bbox.volume() == 0.0) return MeasureEstimate::exact(0.0);
  const int n = ff.n(), k = n - ff.m();
  const double h = default_fd_step(ff);
  auto est = detail::integrate_near_plane(e, ff, u, delta, s, [&](const Vec& x) {
    if (ff.field()(x).project_perp(x - u).norm() > delta) return 0.0;
    return g_jacobian(ff, u, x, h);
  });
  const double norm = alpha(k) * std::pow(delta, k);
  est.value /= norm;
  est.std_error /= norm;
  return est;
}

/// y_estimate over a decreasing delta grid; the last entry is the reported Y.
inline std::vector<MeasureEstimate> y_profile(const SetOracle& e, const FrameField& ff, const Vec& u,
                                              const std::vector<double>& deltas, const Sampler& s) {
  std::vector<MeasureEstimate> out;
  for (std::size_t i = 0; i < deltas.size(); ++i) out.push_back(y_estimate(e, ff, u, deltas[i], s.child(i)));
  return out;
}

/// phi_{E,W}(B(u, rho)) / L^n(B(u, rho)). The slice of the ball is exact:
/// H^m(B(u, rho) ∩ W(x)) = alpha(m) (rho^2 - |P_{W0(x)^perp}(x - u)|^2)_+^(m/2).
inline MeasureEstimate z_estimate(const SetOracle& e, const FrameField& ff, const Vec& u, double rho, const Sampler& s) {
  if (!(rho > 0.0)) throw ConfigError("z_estimate: rho must be positive");
  if (e.bbox.volume() == 0.0) return MeasureEstimate::exact(0.0);
  const int n = ff.n(), m = ff.m();
  auto est = detail::integrate_near_plane(e, ff, u, rho, s, [&](const Vec& x) {
    const double off2 = ff.field()(x).project_perp(x - u).squaredNorm();
    return off2 >= rho * rho ? 0.0 : alpha(m) * std::pow(rho * rho - off2, 0.5 * m);
  });
  const double norm = alpha(n) * std::pow(rho, n);
  est.value /= norm;
  est.std_error /= norm;
  return est;
}

inline std::vector<MeasureEstimate> z_profile(const SetOracle& e, const FrameField& ff, const Vec& u,
                                              const std::vector<double>& rhos, const Sampler& s) {
  std::vector<MeasureEstimate> out;
  for (std::size_t i = 0; i < rhos.size(); ++i) out.push_back(z_estimate(e, ff, u, rhos[i], s.child(i)));
  return out;
}

/// Both sides of the delta-averaged coarea identity for pi_2 x pi_3:
///   int_{Sigma^_{delta,B}} J(pi_2 x pi_3) dH^{2n}
///     = int_B du int_{C_delta} H^m(E ∩ g_u^{-1}{y}) dy,
/// each divided by L^{n-m}(C_delta). The left side is pulled back through
/// F^; the right side integrates y_estimate over u in B.
inline CoareaCheck coarea_check_pi2(const SetOracle& e, const SetOracle& b, const FrameField& ff, double delta,
                                    const Sampler& s) {
  if (!(delta > 0.0)) throw ConfigError("coarea_check_pi2: delta must be positive");
  CoareaCheck c;
  if (e.bbox.volume() == 0.0 || b.bbox.volume() == 0.0 || b.bbox.inverted()) {
    c.left = c.right = MeasureEstimate::exact(0.0);
    c.agree = true;
    return c;
  }
  const int n = ff.n(), m = ff.m(), k = n - m;
  const double norm = alpha(k) * std::pow(delta, k);

  const Sampler inner_base = s.child(3).with_samples(s.inner_samples);
  c.right = integrate(n, b.bbox.volume(), detail::outer_sampler(s).child(4), [&](std::span<const double> z) -> InnerSample {
    const Vec u = to_box(z, b.bbox);
    if (!b.contains(u)) return {0.0, 0.0};
    Sampler in = inner_base;
    in.stream = derive_key(inner_base.stream, hash_point(z));
    in.threads = 1;
    const auto y = y_estimate(e, ff, u, delta, in);
    return {y.value, y.std_error * y.std_error};
  });

  const double t_max = 1.1 * detail::max_box_distance(e.bbox, b.bbox);
  Vec lo(2 * n), hi(2 * n);
  lo << e.bbox.lo, Vec::Constant(m, -t_max), Vec::Constant(k, -delta);
  hi << e.bbox.hi, Vec::Constant(m, t_max), Vec::Constant(k, delta);
  const Box region(lo, hi);
  const double h = default_fd_step(ff);
  c.left = integrate(2 * n, region.volume(), s.child(5), [&](std::span<const double> z) {
    const Vec p = to_box(z, region);
    const Vec x = p.head(n), t = p.segment(n, m), y = p.tail(k);
    if (y.norm() > delta || !e.contains(x)) return 0.0;
    const Mat f = ff.frame(x);
    const Vec u = x + f.leftCols(m) * t + f.rightCols(k) * y;
    if (!b.contains(u)) return 0.0;
    const auto tg = detail::tangent(ff, x, t, &y, h);
    return detail::j_pi23(ff, tg) * tg.area;
  });
  c.left.value /= norm;
  c.left.std_error /= norm;
  c.agree = agree_within(c.left, c.right);
  return c;
}

// ---------------------------------------------------------------------------
// Finite-scale comparisons between Z, Y and phi
// ---------------------------------------------------------------------------

/// Largest Lambda * diam admitted by the comparison checks.
inline constexpr double kSmallDiameterGate = 0.05;

inline void require_small_diameter(const FrameField& ff, double diam, const std::string& what) {
  if (ff.lambda_effective() * diam > kSmallDiameterGate)
    throw HypothesisFailed(what + ": Lambda * diam = " + std::to_string(ff.lambda_effective() * diam) +
                           " exceeds the small-diameter gate 0.05");
}

struct SandwichRow {
  Vec u;
  MeasureEstimate y;
  MeasureEstimate z;
  double lower = 0.0;  // (1-eps) 2^{-(n-m)/2} Y
  double upper = 0.0;  // (1+eps) 2^{(n-m)/2} C(n,n-m)^{1/2} Y
  bool ok = false;
};

struct SandwichReport {
  std::vector<SandwichRow> rows;
  std::size_t violations = 0;
  double epsilon = 0.1;
  double gate = kSmallDiameterGate;
};

/// (1-eps) 2^{-(n-m)/2} Y(u) <= Z(u) <= (1+eps) 2^{(n-m)/2} C(n,n-m)^{1/2} Y(u)
/// at each u, with Y = y_estimate(delta), Z = z_estimate(rho) and 3 sigma slack.
inline SandwichReport check_z1_sandwich(const SetOracle& e, const FrameField& ff, const std::vector<Vec>& us,
                                        double delta, double rho, double epsilon, const Sampler& s) {
  require_small_diameter(ff, e.bbox.diameter(), "sandwich check");
  const int n = ff.n(), m = ff.m();
  const double cl = (1.0 - epsilon) * std::pow(2.0, -0.5 * (n - m));
  const double cu = (1.0 + epsilon) * std::pow(2.0, 0.5 * (n - m)) * std::sqrt(binomial(n, n - m));
  SandwichReport rep;
  rep.epsilon = epsilon;
  for (std::size_t i = 0; i < us.size(); ++i) {
    SandwichRow r;
    r.u = us[i];
    r.y = y_estimate(e, ff, us[i], delta, s.child(2 * i));
    r.z = z_estimate(e, ff, us[i], rho, s.child(2 * i + 1));
    r.lower = cl * r.y.value;
    r.upper = cu * r.y.value;
    const double sl = 3.0 * std::hypot(r.z.std_error, cl * r.y.std_error);
    const double su = 3.0 * std::hypot(r.z.std_error, cu * r.y.std_error);
    r.ok = r.z.value >= r.lower - sl && r.z.value <= r.upper + su;
    if (!r.ok) ++rep.violations;
    rep.rows.push_back(std::move(r));
  }
  return rep;
}

struct LowerBoundReport {
  MeasureEstimate lhs;  // phi_{E,W}(B)
  MeasureEstimate rhs;  // (1-eps) 2^{-(n-m)} int_B Y
  bool ok = false;
  double epsilon = 0.1;
};

/// phi_{E,W}(B) >= (1-eps) 2^{-(n-m)} int_B Y_E W(u) du, Y at the given delta,
/// with 3 sigma slack.
inline LowerBoundReport check_lb1(const SetOracle& e, const SetOracle& b, const FrameField& ff, double delta,
                                  double epsilon, const Sampler& s) {
  LowerBoundReport rep;
  rep.epsilon = epsilon;
  if (b.bbox.inverted() || b.bbox.volume() == 0.0 || e.bbox.volume() == 0.0) {
    rep.lhs = rep.rhs = MeasureEstimate::exact(0.0);
    rep.ok = true;
    return rep;
  }
  require_small_diameter(ff, e.bbox.hull(b.bbox).diameter(), "phi lower bound check");
  const int n = ff.n(), m = ff.m();
  rep.lhs = phi_measure(e, b, ff, s.child(1));
  const Sampler inner_base = s.child(2).with_samples(s.inner_samples);
  auto integral = integrate(n, b.bbox.volume(), detail::outer_sampler(s).child(3), [&](std::span<const double> z) -> InnerSample {
    const Vec u = to_box(z, b.bbox);
    if (!b.contains(u)) return {0.0, 0.0};
    Sampler in = inner_base;
    in.stream = derive_key(inner_base.stream, hash_point(z));
    in.threads = 1;
    const auto y = y_estimate(e, ff, u, delta, in);
    return {y.value, y.std_error * y.std_error};
  });
  const double c = (1.0 - epsilon) * std::pow(2.0, -(n - m));
  rep.rhs = {c * integral.value, c * integral.std_error, integral.n_samples, integral.method};
  rep.ok = rep.lhs.value >= rep.rhs.value - 3.0 * std::hypot(rep.lhs.std_error, rep.rhs.std_error);
  return rep;
}

}  // namespace gmtlab

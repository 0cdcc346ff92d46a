#pragma once

// Lipschitz plane fields x -> W0(x), adapted orthonormal frame fields
// (w_1..w_m spanning W0(x), v_1..v_{n-m} spanning its complement), the maps
// g_u(x) = (<v_i(x), x - u>)_i and the affine fibers of pi_{xi,u}.

#include "gmtlab/core.hpp"
#include "gmtlab/grassmann.hpp"
#include "gmtlab/sampling.hpp"

#include <functional>
#include <memory>
#include <string>
#include <utility>

namespace gmtlab {

/// A plane field on an axis-aligned box with a declared Lipschitz constant
/// (Grassmannian distance per unit length).
struct PlaneField {
  int n = 0;
  int m = 0;
  std::function<Plane(const Vec&)> evaluate;
  double lambda_decl = 0.0;
  Box domain;
  std::string name;

  Plane operator()(const Vec& x) const { return evaluate(x); }
};

inline PlaneField constant_field(const Plane& w, Box domain) {
  if (domain.dim() != w.n()) throw DimensionMismatch("constant_field: domain dimension");
  return {w.n(), w.m(), [w](const Vec&) { return w; }, 0.0, std::move(domain), "constant"};
}

/// W0(x) = span{cos(t) e_i + sin(t) e_{m+i} : i < min(m, n-m)} + span{e_i : i >= n-m},
/// t = kappa <a, x>. Every principal angle between W0(x) and W0(x') equals
/// |t - t'|, so d = |sin(t - t')| and Lip = kappa |a|.
inline PlaneField rotation_field(int n, int m, double kappa, const Vec& a, Box domain) {
  if (a.size() != n || domain.dim() != n) throw DimensionMismatch("rotation_field: dimension");
  if (m < 1 || m > n - 1) throw DimensionMismatch("rotation_field: need 1 <= m <= n-1");
  auto eval = [n, m, kappa, a](const Vec& x) {
    const double t = kappa * a.dot(x);
    const double c = std::cos(t), s = std::sin(t);
    Mat q = Mat::Zero(n, m);
    const int k = std::min(m, n - m);
    for (int i = 0; i < m; ++i) {
      if (i < k) {
        q(i, i) = c;
        q(m + i, i) = s;
      } else {
        q(i, i) = 1.0;
      }
    }
    return Plane::from_orthonormal(q);
  };
  return {n, m, std::move(eval), std::abs(kappa) * a.norm(), std::move(domain), "rotation"};
}

/// W0(x) = span{(cos t, sin t)}, t = kappa <a, x>; Lip = kappa |a|.
inline PlaneField rotation_field_2d(double kappa, const Vec& a, Box domain) {
  auto f = rotation_field(2, 1, kappa, a, std::move(domain));
  f.name = "rotation_2d";
  return f;
}

/// span{e_1} rotated about e_2 by the angle kappa * x_3; Lip = kappa.
inline PlaneField tilt_field_3d(double kappa, Box domain) {
  if (domain.dim() != 3) throw DimensionMismatch("tilt_field_3d: domain must be 3-dimensional");
  auto eval = [kappa](const Vec& x) {
    const double t = kappa * x[2];
    Mat q(3, 1);
    q << std::cos(t), 0.0, -std::sin(t);
    return Plane::from_orthonormal(q);
  };
  return {3, 1, std::move(eval), std::abs(kappa), std::move(domain), "tilt_3d"};
}

namespace detail {

/// Point pair k of a Lipschitz probe: half the pairs are independent uniform
/// points, half are close pairs with log-uniform separation in [1e-4, 1] x
/// the diameter of the sampling region.
inline std::pair<Vec, Vec> probe_pair(const Box& region, std::uint64_t seed, std::uint64_t stream, std::uint64_t k) {
  KeyedStream rng(seed, stream, k);
  Vec x = rng.uniform_in_box(region);
  Vec y;
  if (k % 2 == 0) {
    y = rng.uniform_in_box(region);
  } else {
    const double s = region.diameter() * std::pow(10.0, -4.0 * rng.uniform());
    y = x + s * rng.unit_vector(region.dim());
    y = y.cwiseMax(region.lo).cwiseMin(region.hi);
  }
  return {std::move(x), std::move(y)};
}

}  // namespace detail

/// Empirical Lipschitz constant: max of d(W0(x), W0(x')) / |x - x'| over
/// `samples` probe pairs. Pair k depends only on (seed, k), so the estimate
/// is nondecreasing in the sample count.
inline double lipschitz_estimate(const PlaneField& field, std::size_t samples, std::uint64_t seed) {
  double best = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    auto [x, y] = detail::probe_pair(field.domain, seed, 0x11B5, k);
    const double dx = (x - y).norm();
    if (dx < 1e-12) continue;
    best = std::max(best, grassmann_distance(field(x), field(y)) / dx);
  }
  return best;
}

/// Adapted orthonormal frame field on the ball B(x0, radius): the w's come
/// from local_frame at base W0(x0), the v's from local_frame at base
/// W0(x0)^perp. Requires Lambda * radius < 1/4 so that every plane in the
/// ball lies within 1/4 of the base.
class FrameField {
 public:
  FrameField(PlaneField field, Vec x0, double radius)
      : field_(std::make_shared<const PlaneField>(std::move(field))), x0_(std::move(x0)), radius_(radius) {
    if (x0_.size() != field_->n) throw DimensionMismatch("frame_field: x0 dimension");
    if (!(radius_ > 0.0)) throw ConfigError("frame_field: radius must be positive");
    if (!(field_->lambda_decl * radius_ < 0.25))
      throw FrameBaseTooFar("frame_field: Lambda * radius = " + std::to_string(field_->lambda_decl * radius_) +
                            " violates the gate d(W0(x), W0(x0)) < 1/4 (need Lambda * radius < 1/4)");
    base_ = std::make_shared<const Plane>((*field_)(x0_));
    base_perp_ = std::make_shared<const Plane>(base_->complement());
    base_frame_ = std::make_shared<const Frame>(Frame(base_->basis(), 1e-9));
    base_perp_frame_ = std::make_shared<const Frame>(Frame(base_perp_->basis(), 1e-9));
    lambda_eff_ = std::max({field_->lambda_decl, lipschitz_estimate(*field_, kLambdaProbes, kLambdaSeed),
                            frame_lipschitz(kLambdaProbes, kLambdaSeed)});
  }

  static constexpr std::size_t kLambdaProbes = 4000;
  static constexpr std::uint64_t kLambdaSeed = 7;

  [[nodiscard]] const PlaneField& field() const { return *field_; }
  [[nodiscard]] int n() const { return field_->n; }
  [[nodiscard]] int m() const { return field_->m; }
  [[nodiscard]] const Vec& x0() const { return x0_; }
  [[nodiscard]] double radius() const { return radius_; }
  [[nodiscard]] const Plane& base() const { return *base_; }

  [[nodiscard]] bool in_ball(const Vec& x) const { return (x - x0_).norm() <= radius_ * (1.0 + 1e-9); }

  /// n x n orthogonal matrix [w_1 .. w_m | v_1 .. v_{n-m}] at x.
  [[nodiscard]] Mat frame(const Vec& x) const {
    require_in_ball(x);
    return frame_unchecked(x);
  }
  [[nodiscard]] Mat w(const Vec& x) const { return frame(x).leftCols(m()); }
  [[nodiscard]] Mat v(const Vec& x) const { return frame(x).rightCols(n() - m()); }

  /// Frame without the ball check; finite-difference stencils that poke
  /// slightly past the ball use it (local_frame still enforces the base
  /// radius).
  [[nodiscard]] Mat frame_unchecked(const Vec& x) const {
    const Plane p = (*field_)(x);
    Mat out(n(), n());
    out.leftCols(m()) = local_frame(*base_, *base_frame_, p).vectors();
    out.rightCols(n() - m()) = local_frame(*base_perp_, *base_perp_frame_, p.complement()).vectors();
    return out;
  }

  void require_in_ball(const Vec& x) const {
    if (x.size() != n()) throw DimensionMismatch("frame field: point dimension");
    if (!in_ball(x))
      throw OutOfNeighborhood("frame field: point at distance " + std::to_string((x - x0_).norm()) +
                              " outside the frame ball of radius " + std::to_string(radius_));
  }

  /// Lambda for bound formulas: the largest of the declared constant, the
  /// empirical field constant and the empirical frame constant.
  [[nodiscard]] double lambda_effective() const { return lambda_eff_; }

  /// Empirical Lipschitz constant of the frame vectors (max over all w_i,
  /// v_i) on probe pairs inside the frame ball.
  [[nodiscard]] double frame_lipschitz(std::size_t samples, std::uint64_t seed) const {
    const double half = radius_ / std::sqrt(double(n()));
    const Box region(x0_.array() - half, x0_.array() + half);
    double best = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
      auto [x, y] = detail::probe_pair(region, seed, 0xF7A3E, k);
      const double dx = (x - y).norm();
      if (dx < 1e-12) continue;
      const Mat d = frame(x) - frame(y);
      best = std::max(best, d.colwise().norm().maxCoeff() / dx);
    }
    return best;
  }

  /// Box enclosing the frame ball.
  [[nodiscard]] Box ball_box() const {
    return Box(x0_.array() - radius_, x0_.array() + radius_);
  }

 private:
  std::shared_ptr<const PlaneField> field_;
  Vec x0_;
  double radius_;
  std::shared_ptr<const Plane> base_, base_perp_;
  std::shared_ptr<const Frame> base_frame_, base_perp_frame_;
  double lambda_eff_ = 0.0;
};

inline FrameField frame_field(const PlaneField& field, const Vec& x0, double radius) {
  return FrameField(field, x0, radius);
}

/// Default frame radius: min(0.24 / Lambda, distance from x0 to the domain
/// boundary).
inline double default_frame_radius(const PlaneField& field, const Vec& x0) {
  double margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < field.n; ++i)
    margin = std::min({margin, x0[i] - field.domain.lo[i], field.domain.hi[i] - x0[i]});
  const double lam = field.lambda_decl > 0 ? 0.24 / field.lambda_decl : std::numeric_limits<double>::infinity();
  return std::min(lam, margin);
}

inline double frame_lipschitz_estimate(const FrameField& ff, std::size_t samples, std::uint64_t seed) {
  return ff.frame_lipschitz(samples, seed);
}

inline double effective_lambda(const FrameField& ff) { return ff.lambda_effective(); }

// ---------------------------------------------------------------------------
// g_u and its coarea factor
// ---------------------------------------------------------------------------

/// g_u(x) = (<v_1(x), x-u>, ..., <v_{n-m}(x), x-u>).
inline Vec g_eval(const FrameField& ff, const Vec& u, const Vec& x) {
  return ff.v(x).transpose() * (x - u);
}

namespace detail {

inline Vec g_unchecked(const FrameField& ff, const Vec& u, const Vec& x) {
  return ff.frame_unchecked(x).rightCols(ff.n() - ff.m()).transpose() * (x - u);
}

inline Mat g_derivative(const FrameField& ff, const Vec& u, const Vec& x, double h) {
  const int n = ff.n(), k = ff.n() - ff.m();
  Mat d(k, n);
  for (int p = 0; p < n; ++p) {
    Vec e = Vec::Zero(n);
    e[p] = h;
    d.col(p) = (g_unchecked(ff, u, x + e) - g_unchecked(ff, u, x - e)) / (2.0 * h);
  }
  return d;
}

}  // namespace detail

inline double default_fd_step(const FrameField& ff) { return 1e-5 * ff.radius(); }

/// Coarea factor Jg_u(x) = ||wedge_{n-m} Dg_u(x)||, the product of the
/// singular values of the central-difference derivative with step h.
inline double g_jacobian(const FrameField& ff, const Vec& u, const Vec& x, double h) {
  if (h > 1e-3 * ff.radius()) throw StepTooLarge("g_jacobian: step exceeds 1e-3 * radius");
  ff.require_in_ball(x);
  return wedge_norm(detail::g_derivative(ff, u, x, h), ff.n() - ff.m());
}

struct FdCheck {
  double value = 0.0;       // at step h
  double value_half = 0.0;  // at step h/2
  bool stable = true;       // |value - value_half| <= 1e-4
};

inline FdCheck g_jacobian_checked(const FrameField& ff, const Vec& u, const Vec& x, double h) {
  FdCheck c;
  c.value = g_jacobian(ff, u, x, h);
  c.value_half = g_jacobian(ff, u, x, 0.5 * h);
  c.stable = std::abs(c.value - c.value_half) <= 1e-4;
  return c;
}

/// Computable slack for Jg_u(x) >= 1 - eps when |x - u| <= rho and the
/// v's are Lambda-Lipschitz: every entry of Dg_u(x) in the v-frame deviates
/// from the identity by at most Lambda * rho, and the determinant
/// perturbation estimate gives eps = k^2 Lambda rho (1 + Lambda rho)^(k-1),
/// k = n - m.
inline double jac_g_epsilon(int n, int m, double lambda, double rho) {
  const int k = n - m;
  const double e = lambda * rho;
  return k * e * std::pow(1.0 + e, k - 1) * k;
}

// ---------------------------------------------------------------------------
// Fibers of pi_{xi,u}
// ---------------------------------------------------------------------------

/// pi_{xi,u}(p) = (<xi_i, p - u>)_i for an orthonormal family xi (columns).
inline Vec pi_u(const Mat& xi, const Vec& u, const Vec& p) { return xi.transpose() * (p - u); }

struct AffinePlane {
  Vec base;
  Mat directions;  // orthonormal columns
  [[nodiscard]] Plane direction() const { return Plane::from_orthonormal(directions); }
  [[nodiscard]] Vec point(const Vec& s) const { return base + directions * s; }
};

/// Solution set of pi_{v(x),u}(.) = y: the affine plane
/// u + sum y_i v_i(x) + span{w_i(x)}. For y = g_u(x) it is x + W0(x).
inline AffinePlane pi_u_fiber(const FrameField& ff, const Vec& u, const Vec& x, const Vec& y) {
  const Mat f = ff.frame(x);
  const int m = ff.m();
  if (y.size() != ff.n() - m) throw DimensionMismatch("pi_u_fiber: y dimension");
  return {u + f.rightCols(ff.n() - m) * y, f.leftCols(m)};
}

}  // namespace gmtlab

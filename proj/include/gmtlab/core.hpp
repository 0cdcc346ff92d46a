#pragma once

// Shared vocabulary: dense vector/matrix aliases, the error hierarchy, boxes,
// and the singular-value helpers every module builds on.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmtlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GMTLAB_DEFINE_ERROR(Name)          \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

GMTLAB_DEFINE_ERROR(DegenerateSpan);
GMTLAB_DEFINE_ERROR(DimensionMismatch);
GMTLAB_DEFINE_ERROR(FrameBaseTooFar);
GMTLAB_DEFINE_ERROR(NetTooSparse);
GMTLAB_DEFINE_ERROR(OutOfNeighborhood);
GMTLAB_DEFINE_ERROR(StepTooLarge);
GMTLAB_DEFINE_ERROR(EmptyBox);
GMTLAB_DEFINE_ERROR(TangentDegenerate);
GMTLAB_DEFINE_ERROR(HypothesisFailed);
GMTLAB_DEFINE_ERROR(EmptySet);
GMTLAB_DEFINE_ERROR(ConfigError);

#undef GMTLAB_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Axis-aligned boxes
// ---------------------------------------------------------------------------

struct Box {
  Vec lo;
  Vec hi;

  Box() = default;
  Box(Vec lo_, Vec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) throw DimensionMismatch("Box: corner dimensions differ");
  }

  static Box cube(int n, double a, double b) {
    return Box(Vec::Constant(n, a), Vec::Constant(n, b));
  }

  [[nodiscard]] int dim() const { return static_cast<int>(lo.size()); }

  /// True when some hi < lo; a zero-width side is still a valid (null) box.
  [[nodiscard]] bool inverted() const { return (hi.array() < lo.array()).any(); }

  [[nodiscard]] double volume() const {
    if (inverted()) return 0.0;
    return (hi - lo).prod();
  }

  [[nodiscard]] bool contains(const Vec& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }

  [[nodiscard]] Vec center() const { return 0.5 * (lo + hi); }
  [[nodiscard]] double diameter() const { return (hi - lo).norm(); }

  /// Largest distance from p to a point of the box (attained at a corner).
  [[nodiscard]] double max_distance_from(const Vec& p) const {
    Vec far(p.size());
    for (Eigen::Index i = 0; i < p.size(); ++i)
      far[i] = std::max(std::abs(p[i] - lo[i]), std::abs(p[i] - hi[i]));
    return far.norm();
  }

  /// Distance from p to the box (zero inside).
  [[nodiscard]] double distance_to(const Vec& p) const {
    Vec d = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
    return d.norm();
  }

  [[nodiscard]] Box intersect(const Box& o) const { return Box(lo.cwiseMax(o.lo), hi.cwiseMin(o.hi)); }
  [[nodiscard]] Box hull(const Box& o) const { return Box(lo.cwiseMin(o.lo), hi.cwiseMax(o.hi)); }
};

// ---------------------------------------------------------------------------
// Linear algebra helpers
// ---------------------------------------------------------------------------

/// Singular values in decreasing order.
inline Vec singular_values(const Mat& a) {
  if (a.size() == 0) return Vec();
  Eigen::JacobiSVD<Mat> svd(a);
  svd.setThreshold(1e-12);
  return svd.singularValues();
}

inline double operator_norm(const Mat& a) {
  Vec s = singular_values(a);
  return s.size() ? s[0] : 0.0;
}

/// Norm of the k-th exterior power: product of the k largest singular values.
inline double wedge_norm(const Mat& a, int k) {
  Vec s = singular_values(a);
  if (k > s.size()) return 0.0;
  double p = 1.0;
  for (int i = 0; i < k; ++i) p *= s[i];
  return p;
}

inline double condition_number(const Mat& a) {
  Vec s = singular_values(a);
  if (s.size() == 0) return 1.0;
  double smin = s[s.size() - 1];
  return smin > 0 ? s[0] / smin : std::numeric_limits<double>::infinity();
}

/// Orthonormal basis (columns) of the range of an orthogonal projection,
/// built by greedy Gram-Schmidt on the projected canonical vectors: at each
/// step the candidate with the largest residual wins (lowest index on ties).
/// Deterministic, and every column has a positive inner product with the
/// canonical vector it came from.
inline Mat range_basis(const Mat& proj, int rank) {
  const auto n = proj.rows();
  Mat basis(n, rank);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (int k = 0; k < rank; ++k) {
    double best = -1.0;
    Eigen::Index best_j = 0;
    Vec best_r;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)]) continue;
      Vec r = proj.col(j);
      for (int i = 0; i < k; ++i) r -= basis.col(i).dot(r) * basis.col(i);
      double nr = r.norm();
      if (nr > best + 1e-14) {
        best = nr;
        best_j = j;
        best_r = std::move(r);
      }
    }
    if (best < 1e-8) throw DegenerateSpan("range_basis: projection rank below requested rank");
    used[static_cast<std::size_t>(best_j)] = true;
    basis.col(k) = best_r / best;
  }
  return basis;
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace gmtlab

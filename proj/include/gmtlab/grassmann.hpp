#pragma once

// Planes of the Grassmannian G(n,m) stored as orthogonal projections,
// the operator-norm metric, complements, and orthonormal frames obtained by
// projecting a reference basis and running Gram-Schmidt.

#include "gmtlab/core.hpp"
#include "gmtlab/sampling.hpp"

#include <limits>
#include <string>
#include <vector>

namespace gmtlab {

inline constexpr double kPlaneTol = 1e-10;
inline constexpr double kSpanTol = 1e-8;
/// Base radius for local frames: d(W_ref, W) must stay strictly below it.
inline constexpr double kFrameBaseRadius = 0.5;

/// An m-dimensional linear subspace of R^n, represented by its n x n
/// orthogonal projection. Immutable once built.
class Plane {
 public:
  /// Validates idempotence, symmetry and trace = m to within `tol`.
  static Plane from_projection(const Mat& proj, int m, double tol = kPlaneTol) {
    const auto n = proj.rows();
    if (proj.cols() != n) throw DimensionMismatch("Plane: projection must be square");
    if (n < 2 || m < 1 || m > n - 1)
      throw DimensionMismatch("Plane: need n >= 2 and 1 <= m <= n-1 (n=" + std::to_string(n) +
                              ", m=" + std::to_string(m) + ")");
    const double idem = (proj * proj - proj).cwiseAbs().maxCoeff();
    const double sym = (proj.transpose() - proj).cwiseAbs().maxCoeff();
    const double tr = std::abs(proj.trace() - m);
    if (idem > tol || sym > tol || tr > tol)
      throw DegenerateSpan("Plane: not an orthogonal projection of rank " + std::to_string(m));
    return Plane(proj, m);
  }

  /// Span of the columns of `vectors`. Columns are normalized first; the
  /// smallest singular value of the normalized matrix must exceed 1e-8.
  static Plane from_span(const Mat& vectors) {
    const auto n = vectors.rows();
    const auto m = vectors.cols();
    if (n < 2 || m < 1 || m > n - 1) throw DimensionMismatch("plane_from_span: need 1 <= m <= n-1");
    Mat a = vectors;
    for (Eigen::Index j = 0; j < m; ++j) {
      const double nj = a.col(j).norm();
      if (!(nj > 0.0) || !std::isfinite(nj)) throw DegenerateSpan("plane_from_span: zero or non-finite vector");
      a.col(j) /= nj;
    }
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU);
    if (svd.singularValues()[m - 1] <= kSpanTol)
      throw DegenerateSpan("plane_from_span: vectors are not linearly independent");
    const Mat u = svd.matrixU();
    return Plane(symmetrized(u * u.transpose()), static_cast<int>(m));
  }

  /// Plane spanned by the orthonormal columns of q (no independence check).
  static Plane from_orthonormal(const Mat& q) {
    return Plane(symmetrized(q * q.transpose()), static_cast<int>(q.cols()));
  }

  [[nodiscard]] int n() const { return static_cast<int>(proj_.rows()); }
  [[nodiscard]] int m() const { return m_; }
  [[nodiscard]] const Mat& proj() const { return proj_; }

  [[nodiscard]] Vec project(const Vec& x) const { return proj_ * x; }
  [[nodiscard]] Vec project_perp(const Vec& x) const { return x - proj_ * x; }

  [[nodiscard]] Plane complement() const {
    return Plane(Mat::Identity(n(), n()) - proj_, n() - m_);
  }

  /// Deterministic orthonormal basis of the plane (columns).
  [[nodiscard]] Mat basis() const { return range_basis(proj_, m_); }

 private:
  Plane(Mat proj, int m) : proj_(std::move(proj)), m_(m) {}

  static Mat symmetrized(const Mat& p) { return 0.5 * (p + p.transpose()); }

  Mat proj_;
  int m_ = 0;
};

inline Plane plane_from_span(const Mat& vectors) { return Plane::from_span(vectors); }

inline Plane plane_from_span(const std::vector<Vec>& vectors) {
  if (vectors.empty()) throw DimensionMismatch("plane_from_span: no vectors");
  Mat a(vectors.front().size(), static_cast<Eigen::Index>(vectors.size()));
  for (std::size_t j = 0; j < vectors.size(); ++j) {
    if (vectors[j].size() != a.rows()) throw DimensionMismatch("plane_from_span: ragged vectors");
    a.col(static_cast<Eigen::Index>(j)) = vectors[j];
  }
  return Plane::from_span(a);
}

/// d(W1, W2) = ||P1 - P2|| in the operator norm.
inline double grassmann_distance(const Plane& a, const Plane& b) {
  if (a.n() != b.n() || a.m() != b.m())
    throw DimensionMismatch("grassmann_distance: planes of different (n,m)");
  return operator_norm(a.proj() - b.proj());
}

inline Plane orthogonal_complement(const Plane& w) { return w.complement(); }

/// Line spanned by (cos theta, sin theta) in R^2.
inline Plane line_2d(double theta) {
  Mat v(2, 1);
  v << std::cos(theta), std::sin(theta);
  return Plane::from_orthonormal(v);
}

/// Coordinate plane span{e_i : i in idx}.
inline Plane coordinate_plane(int n, const std::vector<int>& idx) {
  Mat q = Mat::Zero(n, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) q(idx[j], static_cast<Eigen::Index>(j)) = 1.0;
  return Plane::from_orthonormal(q);
}

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

/// An ordered orthonormal family, stored as the columns of an n x q matrix.
class Frame {
 public:
  Frame() = default;

  explicit Frame(Mat vectors, double tol = kPlaneTol) : vectors_(std::move(vectors)) {
    const auto q = vectors_.cols();
    const double err = (vectors_.transpose() * vectors_ - Mat::Identity(q, q)).cwiseAbs().maxCoeff();
    if (!(err <= tol)) throw DegenerateSpan("Frame: vectors are not orthonormal (Gram error " + std::to_string(err) + ")");
  }

  [[nodiscard]] int n() const { return static_cast<int>(vectors_.rows()); }
  [[nodiscard]] int size() const { return static_cast<int>(vectors_.cols()); }
  [[nodiscard]] const Mat& vectors() const { return vectors_; }
  [[nodiscard]] Vec operator[](int i) const { return vectors_.col(i); }

  [[nodiscard]] Plane span() const { return Plane::from_orthonormal(vectors_); }

 private:
  Mat vectors_;
};

/// Projects basis_ref onto W and orthonormalizes in basis_ref order.
///
/// Requires d(W_ref, W) < 1/2, which gives |P_W(w)| >= |w|/2 for w in W_ref
/// and so a uniformly invertible projection W_ref -> W. Each output vector
/// has positive inner product with the projected reference vector it came
/// from.
inline Frame local_frame(const Plane& w_ref, const Frame& basis_ref, const Plane& w) {
  if (w_ref.n() != w.n() || w_ref.m() != w.m() || basis_ref.n() != w.n() || basis_ref.size() != w.m())
    throw DimensionMismatch("local_frame: inconsistent dimensions");
  const double d = grassmann_distance(w_ref, w);
  if (!(d < kFrameBaseRadius))
    throw FrameBaseTooFar("local_frame: d(W_ref, W) = " + std::to_string(d) + " is not below 1/2");
  const int m = w.m();
  Mat out(w.n(), m);
  for (int i = 0; i < m; ++i) {
    Vec r = w.proj() * basis_ref.vectors().col(i);
    for (int j = 0; j < i; ++j) r -= out.col(j).dot(r) * out.col(j);
    const double nr = r.norm();
    if (nr < kSpanTol) throw DegenerateSpan("local_frame: Gram-Schmidt pivot below 1e-8");
    out.col(i) = r / nr;
  }
  return Frame(std::move(out), 1e-9);
}

struct Anchor {
  Plane plane;
  Frame frame;
};

/// Piecewise frame: delegate to local_frame at the nearest anchor (lowest
/// index on ties). Discontinuous across cell boundaries.
inline Frame global_frame(const Plane& w, const std::vector<Anchor>& anchors) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double d = grassmann_distance(anchors[i].plane, w);
    if (d < best) {
      best = d;
      best_i = i;
    }
  }
  if (anchors.empty() || !(best < kFrameBaseRadius))
    throw NetTooSparse("global_frame: no anchor within distance 1/2");
  return local_frame(anchors[best_i].plane, anchors[best_i].frame, w);
}

/// Anchor net of lines in R^2 at angles k*pi/count.
inline std::vector<Anchor> line_anchors_2d(int count) {
  std::vector<Anchor> out;
  for (int k = 0; k < count; ++k) {
    const double th = kPi * k / count;
    Mat v(2, 1);
    v << std::cos(th), std::sin(th);
    out.push_back({Plane::from_orthonormal(v), Frame(v)});
  }
  return out;
}

struct BestMinor {
  std::vector<int> rows;  // increasing, 0-based coordinate indices
  double value = 0.0;
};

/// Exhaustive search over the C(n,q) maximal minors of the n x q frame matrix
/// for the one of largest absolute determinant (lexicographically first on
/// ties). For an orthonormal frame the squares of all minors sum to 1, so
/// the best one is at least C(n,q)^(-1/2).
inline BestMinor binet_cauchy_best_minor(const Frame& f) {
  const int n = f.n();
  const int q = f.size();
  if (q < 1 || q > n - 1) throw DimensionMismatch("binet_cauchy_best_minor: need 1 <= q <= n-1");
  std::vector<int> idx(static_cast<std::size_t>(q));
  for (int i = 0; i < q; ++i) idx[static_cast<std::size_t>(i)] = i;
  BestMinor best{idx, -1.0};
  Mat sub(q, q);
  while (true) {
    for (int j = 0; j < q; ++j) sub.row(j) = f.vectors().row(idx[static_cast<std::size_t>(j)]);
    const double v = std::abs(sub.determinant());
    if (v > best.value) best = {idx, v};
    int k = q - 1;
    while (k >= 0 && idx[static_cast<std::size_t>(k)] == n - q + k) --k;
    if (k < 0) break;
    ++idx[static_cast<std::size_t>(k)];
    for (int j = k + 1; j < q; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Random planes and frames
// ---------------------------------------------------------------------------

/// Haar-distributed q-frame in R^n (QR of a Gaussian matrix, sign-fixed).
inline Frame random_frame(int n, int q, KeyedStream& rng) {
  Mat g(n, q);
  for (int j = 0; j < q; ++j)
    for (int i = 0; i < n; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Mat> qr(g);
  Mat qm = qr.householderQ() * Mat::Identity(n, q);
  const Mat r = qr.matrixQR();
  for (int j = 0; j < q; ++j)
    if (r(j, j) < 0) qm.col(j) *= -1.0;
  return Frame(std::move(qm), 1e-9);
}

inline Plane random_plane(int n, int m, KeyedStream& rng) { return random_frame(n, m, rng).span(); }

/// Random plane at distance at most max_dist from w: principal angles drawn
/// uniformly with sin(angle) < max_dist, directions Haar-random.
inline Plane random_plane_near(const Plane& w, double max_dist, KeyedStream& rng) {
  const int n = w.n(), m = w.m(), k = std::min(m, n - m);
  const Mat b = w.basis() * random_frame(m, m, rng).vectors();
  const Mat c = w.complement().basis() * random_frame(n - m, n - m, rng).vectors();
  Mat out = b;
  const double amax = std::asin(std::min(max_dist, 1.0));
  for (int i = 0; i < k; ++i) {
    const double th = rng.uniform() * amax;
    out.col(i) = std::cos(th) * b.col(i) + std::sin(th) * c.col(i);
  }
  return Plane::from_orthonormal(out);
}

}  // namespace gmtlab

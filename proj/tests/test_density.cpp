#include "gmtlab/density.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gmtlab;

namespace {

Vec v2(double a, double b) { return Eigen::Vector2d(a, b); }

Sampler mc(std::size_t n, std::uint64_t seed) {
  Sampler s;
  s.samples = n;
  s.seed = seed;
  return s;
}

FrameField rotation_ff() {
  return frame_field(rotation_field_2d(1.0, v2(1.0, 0.0), Box::cube(2, -1, 2)), v2(0.5, 0.5), 0.2);
}

FrameField constant_ff() {
  return frame_field(constant_field(coordinate_plane(2, {0}), Box::cube(2, -1, 2)), v2(0.5, 0.5), 0.9);
}

}  // namespace

TEST(PolyballNorm, ZeroAtCenterAndRadiusAlongW) {
  KeyedStream rng(1, 0, 0);
  const Polyball pb{Vec::Constant(3, 0.2), 0.7, random_plane(3, 2, rng)};
  EXPECT_EQ(polyball_norm(pb, pb.x0), 0.0);
  const Vec w = pb.w0.basis().col(0);
  EXPECT_NEAR(polyball_norm(pb, pb.x0 + 0.7 * w), 0.7, 1e-14);
}

TEST(PolyballNorm, GradientHasUnitNormOffTheSingularSet) {
  KeyedStream rng(2, 0, 0);
  const Polyball pb{Vec::Zero(4), 1.0, random_plane(4, 2, rng)};
  int used = 0;
  for (int k = 0; used < 10000; ++k) {
    const Vec x = rng.uniform_in_ball(4, 2.0);
    const double a = pb.w0.project(x).norm(), b = pb.w0.project_perp(x).norm();
    if (std::abs(a - b) <= 1e-3) continue;
    ++used;
    EXPECT_NEAR(polyball_norm_gradient(pb, x, 1e-6).norm(), 1.0, 1e-6);
  }
}

TEST(PolyballNorm, OneLipschitz) {
  KeyedStream rng(3, 0, 0);
  const Polyball pb{Vec::Zero(3), 1.0, random_plane(3, 1, rng)};
  for (int k = 0; k < 100000; ++k) {
    const Vec x = rng.uniform_in_ball(3, 2.0), y = rng.uniform_in_ball(3, 2.0);
    EXPECT_LE(std::abs(polyball_norm(pb, x) - polyball_norm(pb, y)), (1.0 + 1e-9) * (x - y).norm());
  }
}

TEST(PolyballMeasure, ClosedFormValues) {
  EXPECT_NEAR((Polyball{Vec::Zero(2), 1.0, coordinate_plane(2, {0})}).volume(), 4.0, 1e-14);
  EXPECT_NEAR((Polyball{Vec::Zero(3), 1.0, coordinate_plane(3, {0})}).volume(), 2.0 * kPi, 1e-13);
}

TEST(PolyballMeasure, MonteCarloMatchesClosedForm) {
  KeyedStream rng(4, 0, 0);
  for (auto [n, m] : std::vector<std::pair<int, int>>{{2, 1}, {3, 1}, {3, 2}, {4, 2}}) {
    const Polyball pb{rng.uniform_in_box(Box::cube(n, -1, 1)), 0.8, random_plane(n, m, rng)};
    const auto r = polyball_measure(pb, mc(1000000, 5));
    EXPECT_LE(std::abs(r.mc.value - r.closed_form), 3.0 * r.mc.std_error) << n << m;
    // Independent oracle from the ball-volume formula.
    const double a = [](int d) { return std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0 + 1.0); }(m);
    const double b = [](int d) { return std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0 + 1.0); }(n - m);
    EXPECT_NEAR(r.closed_form, a * b * std::pow(0.8, n), 1e-12);
  }
}

TEST(PolyballSet, ChordMatchesMembership) {
  KeyedStream rng(6, 0, 0);
  const Polyball pb{Vec::Zero(3), 0.5, random_plane(3, 1, rng)};
  const SetOracle s = polyball_set(pb);
  for (int k = 0; k < 200; ++k) {
    const Vec p = rng.uniform_in_ball(3, 0.8), d = rng.unit_vector(3);
    const auto iv = s.chord(p, d, -2.0, 2.0);
    for (int j = 0; j < 50; ++j) {
      const double t = rng.uniform(-2.0, 2.0);
      bool in = false;
      for (const auto& i : iv) in = in || (t >= i.lo && t <= i.hi);
      const double nu = polyball_norm(pb, p + t * d);
      if (std::abs(nu - 0.5) > 1e-9) EXPECT_EQ(in, nu <= 0.5);
    }
  }
}

TEST(PolyballInclusion, CenterSliceWithinRadius) {
  const auto ff = constant_ff();
  const Polyball pb = polyball_at(ff.field(), v2(0.5, 0.5), 0.2);
  const auto rep = pb_inclusion_check(pb, ff, pb.x0, 2000, 7);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_NEAR(rep.bound, 0.2, 1e-15);
  EXPECT_NEAR(rep.max_distance, 0.2, 1e-9);
}

TEST(PolyballInclusion, BoundaryPointWithinTwiceRadius) {
  const auto ff = constant_ff();
  const Polyball pb = polyball_at(ff.field(), v2(0.5, 0.5), 0.2);
  const Vec x = v2(0.6, 0.7);  // |Q(x - x0)| = r, so t = 1
  const auto rep = pb_inclusion_check(pb, ff, x, 2000, 8);
  EXPECT_NEAR(rep.t, 1.0, 1e-12);
  EXPECT_EQ(rep.violations, 0u);
  EXPECT_NEAR(rep.bound, 0.4, 1e-15);
  EXPECT_EQ(rep.checked, 2000u);
  // Geometry oracle: the slice through x is the segment [0.3, 0.7] x {0.7}.
  EXPECT_NEAR(rep.max_distance, 0.3, 1e-9);
}

TEST(PolyballInclusion, RotationFieldNoViolations) {
  const auto ff = rotation_ff();
  const double r = 0.01 / ff.lambda_effective();
  const Polyball pb = polyball_at(ff.field(), v2(0.5, 0.5), r);
  KeyedStream rng(9, 0, 0);
  std::size_t violations = 0;
  for (int k = 0; k < 10; ++k) {
    Vec x;
    do x = pb.x0 + rng.uniform_in_ball(2, 1.5 * r);
    while (!pb.contains(x));
    violations += pb_inclusion_check(pb, ff, x, 1000, 10 + k).violations;
  }
  EXPECT_EQ(violations, 0u);
}

TEST(Bowtie, FlatDiskHasFactorTwoToTheMSlack) {
  const GraphPatch flat(coordinate_plane(3, {0, 1}), Vec::Zero(3), [](const Vec&) { return Vec::Zero(1); }, 0.5);
  const auto rep = bowtie_check(flat, 0.0, 200, mc(100000, 11));
  EXPECT_NEAR(rep.area.value, kPi * 0.25, 4.0 * rep.area.std_error);
  EXPECT_NEAR(rep.diameter, 1.0, 0.01);
  EXPECT_TRUE(rep.ok);
  EXPECT_GE(rep.bound / rep.area.value, 3.9);
}

TEST(Bowtie, TiltedSegmentLengthMatchesDiameter) {
  const double tau = 0.6;
  const double slope = tau / std::sqrt(1.0 - tau * tau);
  const GraphPatch seg(coordinate_plane(2, {0}), Vec::Zero(2), [slope](const Vec& z) { return Vec::Constant(1, slope * z[0]); },
                       1.0);
  const auto rep = bowtie_check(seg, tau + 1e-9, 100, mc(10000, 12));
  const double length = 2.0 / std::sqrt(1.0 - tau * tau);
  EXPECT_NEAR(rep.area.value, length, 1e-6);
  EXPECT_NEAR(rep.diameter, length, 1e-9);
  EXPECT_NEAR(rep.bound, 2.0 * length / std::sqrt(1.0 - tau * tau), 1e-6);
  EXPECT_TRUE(rep.ok);
}

TEST(Bowtie, RandomPatchesNeverViolate) {
  for (int k = 0; k < 30; ++k) {
    KeyedStream rng(13, 0, static_cast<std::uint64_t>(k));
    const double tau = rng.uniform(0.0, 0.9);
    const int n = 2 + k % 3, m = 1 + k % (n - 1);
    const auto patch = random_graph_patch(n, m, tau, rng);
    const auto rep = bowtie_check(patch, tau, 150, mc(20000, 14 + k));
    EXPECT_TRUE(rep.ok) << k;
    EXPECT_TRUE(rep.injective) << k;
  }
}

TEST(Bowtie, ConeViolationReported) {
  const GraphPatch steep(coordinate_plane(2, {0}), Vec::Zero(2), [](const Vec& z) { return Vec::Constant(1, 3.0 * z[0]); },
                         1.0);
  EXPECT_THROW(bowtie_check(steep, 0.5, 50, mc(100, 1)), HypothesisFailed);
}

TEST(Stripe, ConstantFieldMatchesFubini) {
  const auto ff = constant_ff();
  const Polyball pb = polyball_at(ff.field(), v2(0.5, 0.5), 0.1);
  const Vec u = v2(0.55, 0.52);
  const auto rep = stripe_check(pb, ff, u, 0.01, 0.1, mc(200000, 15));
  const double exact = 2.0 * 0.1 * 2.0 * 0.01;
  EXPECT_NEAR(rep.constant_field_volume, exact, 1e-15);
  EXPECT_LE(std::abs(rep.volume.value - exact), 3.0 * rep.volume.std_error + 1e-12);
  EXPECT_TRUE(rep.ok);
}

TEST(Stripe, ZeroRadiusBothSidesZero) {
  const auto ff = constant_ff();
  const auto rep = stripe_check(polyball_at(ff.field(), v2(0.5, 0.5), 0.1), ff, v2(0.5, 0.5), 0.0, 0.1, mc(100, 16));
  EXPECT_EQ(rep.volume.value, 0.0);
  EXPECT_EQ(rep.bound, 0.0);
}

TEST(Stripe, RotationFieldInequalityHolds) {
  const auto ff = rotation_ff();
  const double r = 0.005 / ff.lambda_effective();
  const Polyball pb = polyball_at(ff.field(), v2(0.5, 0.5), r);
  KeyedStream rng(17, 0, 0);
  for (int k = 0; k < 5; ++k) {
    const Vec u = pb.x0 + pb.w0.basis() * rng.uniform_in_ball(1, r) + pb.w0.complement().basis() * rng.uniform_in_ball(1, 0.3 * r);
    EXPECT_TRUE(stripe_check(pb, ff, u, 0.1 * r, 0.1, mc(50000, 18 + k)).ok);
  }
}

TEST(Stripe, HypothesesChecked) {
  const auto ff = rotation_ff();
  const Polyball pb = polyball_at(ff.field(), v2(0.5, 0.5), 0.005);
  EXPECT_THROW(stripe_check(pb, ff, v2(0.7, 0.7), 0.0001, 0.1, mc(10, 1)), HypothesisFailed);
  EXPECT_THROW(stripe_check(pb, ff, pb.x0, 0.01, 0.1, mc(10, 1)), HypothesisFailed);
  const Polyball big = polyball_at(ff.field(), v2(0.5, 0.5), 0.05);
  EXPECT_THROW(stripe_check(big, ff, big.x0, 0.001, 0.1, mc(10, 1)), HypothesisFailed);
}

TEST(LowerBound, ConstantFieldSetContainingPolyball) {
  const auto ff = constant_ff();
  const Polyball pb = polyball_at(ff.field(), v2(0.5, 0.5), 0.05);
  const auto rep = check_lower_bound_54(pb, box(v2(0, 0), v2(1, 1)), ff, 0.05, 1e-4, mc(20000, 19));
  const double exact = 2.0 * 0.05 * pb.volume();
  EXPECT_LE(std::abs(rep.lhs.value - exact), 3.0 * rep.lhs.std_error + 1e-3 * exact);
  EXPECT_TRUE(rep.ok);
}

TEST(LowerBound, RotationField) {
  const auto ff = rotation_ff();
  const Polyball pb = polyball_at(ff.field(), v2(0.5, 0.5), 0.005);
  const auto a = set_union({ball(v2(0.5, 0.5), 0.1)});
  EXPECT_TRUE(check_lower_bound_54(pb, a, ff, 0.05, 1e-4, mc(20000, 20)).ok);
}

TEST(LowerBound, CoverageHypothesisChecked) {
  const auto ff = constant_ff();
  const Polyball pb = polyball_at(ff.field(), v2(0.5, 0.5), 0.05);
  EXPECT_THROW(check_lower_bound_54(pb, box(v2(0, 0), v2(0.5, 1)), ff, 0.05, 1e-3, mc(20000, 21)), HypothesisFailed);
}

TEST(Density, BoxWithConstantFieldHasNoLowPoints) {
  const auto field = constant_field(coordinate_plane(2, {0}), Box::cube(2, 0, 1));
  const auto res = density_experiment(box(v2(0, 0), v2(1, 1)), field, 200, {0.1, 0.05, 0.02, 0.01}, mc(1000, 22));
  EXPECT_EQ(res.prefixes.back().below_fraction, 0.0);
  EXPECT_TRUE(res.nonincreasing);
  std::size_t interior = 0;
  for (const auto& p : res.points)
    if ((p.x.array() > 0.01).all() && (p.x.array() < 0.99).all()) {
      ++interior;
      EXPECT_NEAR(p.theta.back().value, 1.0, 3.0 * p.theta.back().std_error + 1e-12);
    }
  EXPECT_GT(interior, 150u);
}

TEST(Density, DiskInteriorPointsAboveChordRatio) {
  const auto field = constant_field(coordinate_plane(2, {0}), Box::cube(2, -1, 1));
  const auto res = density_experiment(ball(v2(0, 0), 1.0), field, 200, {0.5, 0.1, 0.01}, mc(1000, 23));
  for (const auto& p : res.points) {
    double best = 0.0;
    for (const auto& t : p.theta) best = std::max(best, t.value);
    EXPECT_GE(best, 0.25);
  }
  EXPECT_EQ(res.prefixes.back().below_fraction, 0.0);
}

TEST(Density, RandomBallUnionRotationField) {
  const auto field = rotation_field_2d(0.5, v2(1.0, 0.0), Box::cube(2, 0, 1));
  const auto a = random_ball_union(50, 0.02, 0.1, 11, Box::cube(2, 0, 1));
  const auto res = density_experiment(a, field, 200, {0.1, 0.05, 0.02, 0.01}, mc(2000, 24));
  EXPECT_TRUE(res.nonincreasing);
  EXPECT_LE(res.prefixes.back().below_fraction, 0.05);
  EXPECT_NEAR(res.threshold, 0.9 / 4.0, 1e-15);
}

TEST(Density, GridValidation) {
  const auto field = constant_field(coordinate_plane(2, {0}), Box::cube(2, 0, 1));
  EXPECT_THROW(density_experiment(box(v2(0, 0), v2(1, 1)), field, 10, {0.1, 0.2}, mc(10, 1)), ConfigError);
  EXPECT_THROW(density_experiment(box(v2(0, 0), v2(1, 1)), field, 10, {0.1, 1e-9}, mc(10, 1)), ConfigError);
}

TEST(Density, EmptySetRejected) {
  const auto field = constant_field(coordinate_plane(2, {0}), Box::cube(2, 0, 1));
  SetOracle none = box(v2(0, 0), v2(1, 1));
  none.contains_fn = [](const Vec&) { return false; };
  EXPECT_THROW(density_experiment(none, field, 1, {0.1}, mc(10, 1)), EmptySet);
}

TEST(Density, SolidBodiesWithConstantFieldBelowOnePercent) {
  const auto field = constant_field(coordinate_plane(3, {0, 1}), Box::cube(3, -1, 1));
  const auto res = density_experiment(ball(Vec::Zero(3), 0.8), field, 200, {0.2, 0.05, 0.01}, mc(2000, 25));
  EXPECT_LE(res.prefixes.back().below_fraction, 0.01);
}

TEST(Fubini, EmptySetBothZero) {
  const auto ff = constant_ff();
  const auto rep = fubini_equivalence_check(empty_set(2), ff, Box::cube(2, 0, 1), 0.01, mc(1000, 26));
  EXPECT_TRUE(rep.lebesgue_zero);
  EXPECT_TRUE(rep.slice_zero);
  EXPECT_TRUE(rep.consistent);
}

TEST(Fubini, ThinSlabsShrinkLinearly) {
  const auto ff = frame_field(constant_field(coordinate_plane(2, {1}), Box::cube(2, 0, 1)), v2(0.5, 0.5), 0.9);
  std::vector<double> widths = {0.1, 0.01, 0.001}, leb, mean;
  for (double w : widths) {
    const auto rep = fubini_equivalence_check(box(v2(0, 0.5 - w / 2), v2(1, 0.5 + w / 2)), ff, Box::cube(2, 0, 1),
                                              0.001, mc(20000, 27));
    EXPECT_TRUE(rep.consistent);
    leb.push_back(rep.lebesgue.value);
    mean.push_back(rep.mean_slice.value);
  }
  EXPECT_NEAR(loglog_slope(widths, leb), 1.0, 0.1);
  EXPECT_NEAR(loglog_slope(widths, mean), 1.0, 0.1);
}

TEST(Fubini, BoxWithRotationFieldBothPositive) {
  const auto ff = frame_field(rotation_field_2d(0.5, v2(1.0, 0.0), Box::cube(2, 0, 1)), v2(0.5, 0.5), 0.45);
  const auto rep = fubini_equivalence_check(box(v2(0.4, 0.4), v2(0.6, 0.6)), ff, Box::cube(2, 0.3, 0.7), 0.005,
                                            mc(20000, 28));
  EXPECT_FALSE(rep.lebesgue_zero);
  EXPECT_FALSE(rep.slice_zero);
}

TEST(Positivity, YPositiveOnSolidSet) {
  const auto ff = rotation_ff();
  const auto rep = z_positive_check(ball(v2(0.5, 0.5), 0.1), ff, 50, 0.005, mc(5000, 29));
  EXPECT_LE(rep.fraction, 0.01);
}

TEST(LogLogSlope, ExactPowerLaw) {
  EXPECT_NEAR(loglog_slope({1.0, 0.1, 0.01}, {3.0, 0.03, 0.0003}), 2.0, 1e-12);
}

#pragma once

// Command-line harness: JSON configs, the nine experiments, and their
// artifacts (rows.csv, metadata.json, summary.json).

#include "gmtlab/core.hpp"
#include "gmtlab/density.hpp"
#include "gmtlab/fibration.hpp"
#include "gmtlab/grassmann.hpp"
#include "gmtlab/planefield.hpp"
#include "gmtlab/sampling.hpp"
#include "gmtlab/setlib.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gmtlab::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"frames", "jacobians", "coarea", "sandwich", "stripe",
                                                 "bowtie", "density",   "fubini", "polyball"};
  return names;
}

// ---------------------------------------------------------------------------
// Output records
// ---------------------------------------------------------------------------

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "1" : "0"; }

struct Table {
  std::string file;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  template <class... T>
  void add(const T&... cells) {
    rows.push_back({fmt(cells)...});
  }
  void add_cells(std::vector<std::string> cells) { rows.push_back(std::move(cells)); }

  [[nodiscard]] std::string csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
    out += '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
      out += '\n';
    }
    return out;
  }
};

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double bound = 0.0;
};

struct Outcome {
  std::vector<Table> tables;  // the first one is rows.csv
  std::vector<Check> checks;
  json info = json::object();

  void check(std::string name, bool passed, double value, double bound) {
    checks.push_back({std::move(name), passed, value, bound});
  }
  [[nodiscard]] std::size_t failures() const {
    std::size_t k = 0;
    for (const auto& c : checks) k += c.passed ? 0 : 1;
    return k;
  }
};

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

inline Vec to_vec(const json& j) {
  if (!j.is_array()) throw ConfigError("expected a numeric array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

inline json from_vec(const Vec& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline Box to_box_spec(const json& j) {
  if (!j.contains("lo") || !j.contains("hi")) throw ConfigError("box spec needs 'lo' and 'hi'");
  return Box(to_vec(j.at("lo")), to_vec(j.at("hi")));
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.is_object() && j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline std::vector<double> doubles_or(const json& j, const char* key, std::vector<double> fallback) {
  return j.is_object() && j.contains(key) ? j.at(key).get<std::vector<double>>() : fallback;
}

inline Plane parse_plane(const json& j, int n) {
  if (j.contains("coordinates")) return coordinate_plane(n, j.at("coordinates").get<std::vector<int>>());
  if (j.contains("basis")) {
    std::vector<Vec> vs;
    for (const auto& v : j.at("basis")) vs.push_back(to_vec(v));
    return plane_from_span(vs);
  }
  throw ConfigError("plane spec needs 'coordinates' or 'basis'");
}

inline PlaneField parse_field(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  const Box domain = to_box_spec(j.at("domain"));
  if (type == "constant") return constant_field(parse_plane(j.at("plane"), domain.dim()), domain);
  if (type == "rotation")
    return rotation_field(j.at("n").get<int>(), j.at("m").get<int>(), j.at("kappa").get<double>(), to_vec(j.at("a")),
                          domain);
  if (type == "rotation_2d") return rotation_field_2d(j.at("kappa").get<double>(), to_vec(j.at("a")), domain);
  if (type == "tilt_3d") return tilt_field_3d(j.at("kappa").get<double>(), domain);
  throw ConfigError("unknown field type '" + type + "'");
}

inline SetOracle parse_set(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "empty") return empty_set(j.at("n").get<int>());
  if (type == "ball") return ball(to_vec(j.at("center")), j.at("radius").get<double>());
  if (type == "box") return box(to_vec(j.at("lo")), to_vec(j.at("hi")));
  if (type == "half_space") return half_space(to_vec(j.at("a")), j.at("b").get<double>(), to_box_spec(j.at("within")));
  if (type == "union" || type == "intersection") {
    std::vector<SetOracle> parts;
    for (const auto& p : j.at("parts")) parts.push_back(parse_set(p));
    return type == "union" ? set_union(parts) : set_intersection(parts);
  }
  if (type == "complement") return complement_within_box(parse_set(j.at("of")), to_box_spec(j.at("within")));
  if (type == "random_ball_union")
    return random_ball_union(j.at("count").get<int>(), j.at("r_min").get<double>(), j.at("r_max").get<double>(),
                             j.at("seed").get<std::uint64_t>(), to_box_spec(j.at("region")));
  if (type == "cantor_slab") return cantor_slab(j.at("depth").get<int>(), get_or<int>(j, "n", 2));
  throw ConfigError("unknown set type '" + type + "'");
}

struct Context {
  std::string experiment;
  json config;
  json params = json::object();
  Sampler sampler;
  std::optional<PlaneField> field;
  std::optional<FrameField> frame;
  std::map<std::string, SetOracle> sets;

  [[nodiscard]] const PlaneField& require_field() const {
    if (!field) throw ConfigError(experiment + ": config needs a 'field'");
    return *field;
  }
  [[nodiscard]] const FrameField& require_frame() const {
    if (!frame) throw ConfigError(experiment + ": config needs a 'frame'");
    return *frame;
  }
  [[nodiscard]] const SetOracle& set(const std::string& name) const {
    auto it = sets.find(name);
    if (it == sets.end()) throw ConfigError(experiment + ": config needs set '" + name + "'");
    return it->second;
  }
  [[nodiscard]] bool has_set(const std::string& name) const { return sets.count(name) > 0; }
};

struct RunOptions {
  std::string experiment;
  json config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  unsigned threads = 1;
  std::filesystem::path out;
};

/// Validates the config and builds fields, frames and sets. The frame gate
/// Lambda * radius < 1/4 is enforced by the FrameField constructor.
inline Context load_context(const RunOptions& opt) {
  Context c;
  c.experiment = opt.experiment;
  c.config = opt.config;
  if (!c.config.is_object()) throw ConfigError("config must be a JSON object");
  if (c.config.contains("experiment") && c.config.at("experiment").get<std::string>() != opt.experiment)
    throw ConfigError("config is for experiment '" + c.config.at("experiment").get<std::string>() + "', not '" +
                      opt.experiment + "'");
  if (c.config.contains("params")) c.params = c.config.at("params");
  c.sampler.samples = opt.samples.value_or(get_or<std::size_t>(c.config, "samples", 100000));
  c.sampler.inner_samples = get_or<std::size_t>(c.config, "inner_samples", 64);
  c.sampler.method = method_from_string(get_or<std::string>(c.config, "method", "mc"));
  c.sampler.seed = opt.seed.value_or(get_or<std::uint64_t>(c.config, "seed", 0));
  c.sampler.threads = std::max(1u, opt.threads);
  if (c.sampler.samples == 0) throw ConfigError("samples must be positive");
  if (c.config.contains("field")) c.field = parse_field(c.config.at("field"));
  if (c.config.contains("frame")) {
    const json& f = c.config.at("frame");
    const PlaneField& field = c.require_field();
    const Vec x0 = to_vec(f.at("x0"));
    const double r = f.at("radius").get<double>();
    if (field.lambda_decl * r >= 0.25)
      throw FrameBaseTooFar("frame: Lambda * radius = " + fmt(field.lambda_decl * r) +
                            " violates the gate d(W, W0) < 1/4 on the frame ball (need Lambda * radius < 1/4)");
    c.frame.emplace(field, x0, r);
  }
  if (c.config.contains("sets"))
    for (const auto& [name, spec] : c.config.at("sets").items()) c.sets.emplace(name, parse_set(spec));
  return c;
}

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

inline Vec point_in_ball(const Vec& c, double r, KeyedStream& rng) {
  return c + rng.uniform_in_ball(static_cast<int>(c.size()), r);
}

inline bool within_3sigma(const MeasureEstimate& e, double exact) {
  return std::abs(e.value - exact) <= 3.0 * e.std_error + 1e-12 * std::max(1.0, std::abs(exact));
}

inline bool is_constant(const PlaneField& f) { return f.lambda_decl == 0.0 && f.name == "constant"; }

inline std::uint64_t tag(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : s) h = (h ^ ch) * 0x100000001B3ULL;
  return h;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

/// frames: Gram-Schmidt frames at points of the frame ball.
inline Outcome run_frames(const Context& c) {
  const FrameField& ff = c.require_frame();
  const int m = ff.m();
  const std::size_t count = get_or<std::size_t>(c.params, "count", 1000);
  Outcome o;
  Table t{"rows.csv", {"index", "dist_from_x0", "plane_distance_to_base", "span_residual", "orthonormality_error"}, {}};
  double worst_span = 0.0, worst_orth = 0.0, worst_dist = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    KeyedStream rng(c.sampler.seed, tag("frames"), i);
    const Vec x = point_in_ball(ff.x0(), ff.radius(), rng);
    const Plane p = ff.field()(x);
    const Mat f = ff.frame(x);
    const Mat w = f.leftCols(m), v = f.rightCols(ff.n() - m);
    const double span = std::max(operator_norm(w * w.transpose() - p.proj()),
                                 operator_norm(v * v.transpose() - p.complement().proj()));
    const double orth = operator_norm(f.transpose() * f - Mat::Identity(ff.n(), ff.n()));
    const double dist = grassmann_distance(p, ff.base());
    worst_span = std::max(worst_span, span);
    worst_orth = std::max(worst_orth, orth);
    worst_dist = std::max(worst_dist, dist);
    t.add(i, (x - ff.x0()).norm(), dist, span, orth);
  }
  o.tables.push_back(std::move(t));
  o.check("frame span residual at most 1e-9", worst_span <= 1e-9, worst_span, 1e-9);
  o.check("frame orthonormality error at most 1e-9", worst_orth <= 1e-9, worst_orth, 1e-9);
  o.check("plane distance to the base below 1/4", worst_dist < 0.25, worst_dist, 0.25);
  o.info["frame_lipschitz_estimate"] = ff.frame_lipschitz(FrameField::kLambdaProbes, FrameField::kLambdaSeed);
  return o;
}

/// jacobians: coarea factors at sampled Sigma and Sigma-hat points.
inline Outcome run_jacobians(const Context& c) {
  const FrameField& ff = c.require_frame();
  const int n = ff.n(), m = ff.m(), k = n - m;
  const double lam = ff.lambda_effective();
  const std::size_t count = get_or<std::size_t>(c.params, "count", 1000);
  const double t_max = get_or<double>(c.params, "t_max", lam > 0 ? 0.05 / lam : 0.05);
  const double y_max = get_or<double>(c.params, "y_max", t_max);
  const double x_frac = get_or<double>(c.params, "x_radius_fraction", 0.5);
  struct Row {
    double t = 0;
    JacobianReport p1, p2, p13, p23;
  };
  auto rows = run_batches(count, c.sampler.threads, [&](std::size_t i) {
    KeyedStream rng(c.sampler.seed, tag("jacobians"), i);
    const Vec x = point_in_ball(ff.x0(), x_frac * ff.radius(), rng);
    const Vec t = rng.uniform_in_ball(m, t_max);
    const Vec y = rng.uniform_in_ball(k, y_max);
    Row r;
    r.t = t.norm();
    const auto p = sigma_point(ff, x, t);
    r.p1 = jacobian_pi1(ff, p);
    r.p2 = jacobian_pi2(ff, p);
    const auto q = sigma_hat_point(ff, x, t, y);
    r.p13 = jacobian_pi13(ff, q);
    r.p23 = jacobian_pi23(ff, q);
    return r;
  });
  Outcome o;
  Table t{"rows.csv",
          {"index", "abs_t", "j_pi1", "lb_pi1", "j_pi2", "lb_pi2", "j_pi13", "lb_pi13", "j_pi23"},
          {}};
  std::size_t v1 = 0, v2 = 0, v13 = 0, v23 = 0, nonpos = 0;
  double min_p2 = std::numeric_limits<double>::infinity(), const_err = 0.0;
  const double flat = std::pow(2.0, -0.5 * k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    v1 += r.p1.within_bounds ? 0 : 1;
    v2 += r.p2.within_bounds ? 0 : 1;
    v13 += r.p13.within_bounds ? 0 : 1;
    v23 += r.p23.within_bounds ? 0 : 1;
    nonpos += r.p2.value > 1e-8 ? 0 : 1;
    min_p2 = std::min(min_p2, r.p2.value);
    const_err = std::max({const_err, std::abs(r.p1.value - flat), std::abs(r.p2.value - flat)});
    t.add(i, r.t, r.p1.value, r.p1.lower_bound, r.p2.value, r.p2.lower_bound, r.p13.value, r.p13.lower_bound,
          r.p23.value);
  }
  o.tables.push_back(std::move(t));
  o.check("pi1 Jacobian within its two-sided bound (violations)", v1 == 0, double(v1), 0);
  o.check("pi2 Jacobian within its two-sided bound (violations)", v2 == 0, double(v2), 0);
  o.check("pi2 Jacobian above 1e-8 (minimum)", nonpos == 0, min_p2, 1e-8);
  o.check("pi1 x pi3 Jacobian above its lower bound (violations)", v13 == 0, double(v13), 0);
  o.check("pi2 x pi3 Jacobian at most 1 (violations)", v23 == 0, double(v23), 0);
  if (is_constant(ff.field()))
    o.check("constant field: pi1 and pi2 Jacobians equal 2^{-(n-m)/2}", const_err <= kJacobianTol, const_err,
            kJacobianTol);
  o.info["t_max"] = t_max;
  o.info["y_max"] = y_max;
  return o;
}

/// coarea: both sides of the pi1 and the delta-averaged pi2 x pi3 identities.
inline Outcome run_coarea(const Context& c) {
  const FrameField& ff = c.require_frame();
  const SetOracle& e = c.set("E");
  const SetOracle& b = c.has_set("B") ? c.set("B") : e;
  const double delta = get_or<double>(c.params, "delta", 0.01);
  Outcome o;
  Table t{"rows.csv", {"identity", "left", "left_se", "right", "right_se", "agree"}, {}};
  const auto c1 = coarea_check_pi1(e, b, ff, c.sampler.child(1));
  const auto c2 = coarea_check_pi2(e, b, ff, delta, c.sampler.child(2));
  t.add_cells({"pi1", fmt(c1.left.value), fmt(c1.left.std_error), fmt(c1.right.value), fmt(c1.right.std_error),
               fmt(c1.agree)});
  t.add_cells({"pi2_pi3", fmt(c2.left.value), fmt(c2.left.std_error), fmt(c2.right.value), fmt(c2.right.std_error),
               fmt(c2.agree)});
  o.tables.push_back(std::move(t));
  o.check("coarea for pi1: both sides agree within 3 sigma", c1.agree, c1.left.value - c1.right.value,
          3.0 * std::hypot(c1.left.std_error, c1.right.std_error));
  o.check("delta-averaged coarea for pi2 x pi3: both sides agree within 3 sigma", c2.agree,
          c2.left.value - c2.right.value, 3.0 * std::hypot(c2.left.std_error, c2.right.std_error));
  o.info["delta"] = delta;
  return o;
}

/// sandwich: Y / Z comparison at sampled u, the phi lower bound, and the
/// positivity of Y on E.
inline Outcome run_sandwich(const Context& c) {
  const FrameField& ff = c.require_frame();
  const SetOracle& e = c.set("E");
  const SetOracle& b = c.has_set("B") ? c.set("B") : e;
  const std::size_t u_count = get_or<std::size_t>(c.params, "u_count", 50);
  const double delta = get_or<double>(c.params, "delta", 0.01);
  const double rho = get_or<double>(c.params, "rho", delta);
  const double eps = get_or<double>(c.params, "epsilon", 0.1);
  const std::size_t pos_count = get_or<std::size_t>(c.params, "positivity_points", 50);
  const Box region = c.params.contains("u_region") ? to_box_spec(c.params.at("u_region")) : e.bbox;
  std::vector<Vec> us;
  for (std::size_t i = 0; i < u_count; ++i) {
    KeyedStream rng(c.sampler.seed, tag("sandwich.u"), i);
    us.push_back(rng.uniform_in_box(region));
  }
  const Sampler inner = c.sampler.with_samples(get_or<std::size_t>(c.params, "point_samples", c.sampler.samples));
  const auto rep = check_z1_sandwich(e, ff, us, delta, rho, eps, inner.child(1));
  Outcome o;
  Table t{"rows.csv", {"index", "y", "y_se", "z", "z_se", "lower", "upper", "ok"}, {}};
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    t.add(i, r.y.value, r.y.std_error, r.z.value, r.z.std_error, r.lower, r.upper, r.ok);
  }
  o.tables.push_back(std::move(t));
  o.check("Z between its Y-multiples (violations)", rep.violations == 0, double(rep.violations), 0);
  const auto lb = check_lb1(e, b, ff, delta, eps, c.sampler.child(2));
  o.check("phi lower bound by (1 - eps) 2^{-(n-m)} int Y", lb.ok, lb.lhs.value, lb.rhs.value);
  const auto pos = z_positive_check(e, ff, pos_count, delta, inner.child(3));
  o.check("Y indistinguishable from 0 on at most 1% of E", pos.fraction <= 0.01, pos.fraction, 0.01);
  o.info["delta"] = delta;
  o.info["rho"] = rho;
  o.info["epsilon"] = eps;
  o.info["phi_lower_bound"] = {{"lhs", lb.lhs.value}, {"lhs_se", lb.lhs.std_error}, {"rhs", lb.rhs.value},
                               {"rhs_se", lb.rhs.std_error}};
  return o;
}

inline Polyball parse_polyball(const Context& c, const FrameField& ff) {
  const json pj = c.params.contains("polyball") ? c.params.at("polyball") : json::object();
  const Vec x0 = pj.contains("x0") ? to_vec(pj.at("x0")) : ff.x0();
  const double lam = ff.lambda_effective();
  const double r = get_or<double>(pj, "r", lam > 0 ? 0.005 / lam : 0.1);
  return polyball_at(ff.field(), x0, r);
}

/// stripe: the nonlinear-stripe lower bound and, given a set A, the
/// polyball lower bound for Y.
inline Outcome run_stripe(const Context& c) {
  const FrameField& ff = c.require_frame();
  const Polyball pb = parse_polyball(c, ff);
  const double eps = get_or<double>(c.params, "epsilon", 0.1);
  const double cr = get_or<double>(c.params, "c", eps * pb.r);
  const double gate = get_or<double>(c.params, "gate", kPolyballGate);
  const std::size_t u_count = get_or<std::size_t>(c.params, "u_count", 10);
  const bool constant = is_constant(ff.field());
  Outcome o;
  Table t{"rows.csv", {"index", "height", "volume", "volume_se", "bound", "constant_field_volume", "ok"}, {}};
  std::size_t violations = 0, exact_misses = 0;
  for (std::size_t i = 0; i < u_count; ++i) {
    KeyedStream rng(c.sampler.seed, tag("stripe.u"), i);
    // u = x0 + B a + C b with |a| <= r and |b| <= (1 - 3 eps) r / 2.
    const Vec a = rng.uniform_in_ball(pb.m(), pb.r);
    const Vec bb = rng.uniform_in_ball(pb.n() - pb.m(), 0.5 * (1.0 - 3.0 * eps) * pb.r);
    const Vec u = pb.x0 + pb.w0.basis() * a + pb.w0.complement().basis() * bb;
    const auto rep = stripe_check(pb, ff, u, cr, eps, c.sampler.child(i), gate);
    violations += rep.ok ? 0 : 1;
    if (constant && !within_3sigma(rep.volume, rep.constant_field_volume)) ++exact_misses;
    t.add(i, rep.height, rep.volume.value, rep.volume.std_error, rep.bound, rep.constant_field_volume, rep.ok);
  }
  o.tables.push_back(std::move(t));
  o.check("stripe volume at least alpha(m) r^m L^{n-m}(C) / (1 + eps) (violations)", violations == 0,
          double(violations), 0);
  if (constant)
    o.check("constant field: stripe volume equals alpha(m) r^m L^{n-m}(C) within 3 sigma (misses)", exact_misses == 0,
            double(exact_misses), 0);
  const double c_config = get_or<double>(c.params, "c_config", 8.0);
  if (c.has_set("A")) {
    const double eps54 = get_or<double>(c.params, "epsilon_lower", 0.05);
    const double delta = get_or<double>(c.params, "delta", 1e-3);
    const auto lb = check_lower_bound_54(pb, c.set("A"), ff, eps54, delta, c.sampler.child(1000000), c_config, gate);
    o.check("polyball lower bound int Y >= (1 - c eps) alpha(m) r^m L^n(C_W)", lb.ok, lb.lhs.value, lb.rhs);
    o.info["polyball_lower_bound"] = {{"coverage", lb.coverage.value}, {"coverage_se", lb.coverage.std_error},
                                      {"lhs", lb.lhs.value},           {"lhs_se", lb.lhs.std_error},
                                      {"rhs", lb.rhs},                 {"epsilon", eps54},
                                      {"delta", delta}};
  }
  o.info["polyball"] = {{"x0", from_vec(pb.x0)}, {"r", pb.r}, {"lambda_r", ff.lambda_effective() * pb.r}};
  o.info["epsilon"] = eps;
  o.info["c"] = cr;
  return o;
}

/// bowtie: area bound on random tilted graph patches.
inline Outcome run_bowtie(const Context& c) {
  const std::size_t count = get_or<std::size_t>(c.params, "count", 100);
  const double tau_max = get_or<double>(c.params, "tau_max", 0.9);
  const int n = get_or<int>(c.params, "n", 3);
  const int m = get_or<int>(c.params, "m", 2);
  const std::size_t points = get_or<std::size_t>(c.params, "points", 200);
  if (m < 1 || m >= n) throw ConfigError("bowtie: need 1 <= m < n");
  struct Row {
    double tau = 0;
    BowtieReport rep;
  };
  auto rows = run_batches(count, c.sampler.threads, [&](std::size_t i) {
    KeyedStream rng(c.sampler.seed, tag("bowtie"), i);
    Row r;
    r.tau = rng.uniform(0.0, tau_max);
    const GraphPatch patch = random_graph_patch(n, m, r.tau, rng);
    Sampler s = c.sampler.child(i);
    s.threads = 1;
    r.rep = bowtie_check(patch, r.tau, points, s);
    return r;
  });
  Outcome o;
  Table t{"rows.csv",
          {"index", "tau", "area", "area_se", "diameter", "bound", "max_cone_ratio", "min_projection_ratio", "ok"},
          {}};
  std::size_t violations = 0, noninjective = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i].rep;
    violations += r.area.value - 3.0 * r.area.std_error <= r.bound ? 0 : 1;
    noninjective += r.injective ? 0 : 1;
    t.add(i, rows[i].tau, r.area.value, r.area.std_error, r.diameter, r.bound, r.max_cone_ratio,
          r.min_projection_ratio, r.ok);
  }
  o.tables.push_back(std::move(t));
  o.check("bow-tie bound (1 - tau^2)^{-m/2} alpha(m) diam^m (violations)", violations == 0, double(violations), 0);
  o.check("projection onto W injective with ratio sqrt(1 - tau^2) (violations)", noninjective == 0,
          double(noninjective), 0);
  return o;
}

/// density: Theta(x, r) at sampled x in A for every radius of the grid.
inline Outcome run_density(const Context& c) {
  const PlaneField& field = c.require_field();
  const SetOracle& a = c.set("A");
  const std::size_t x_count = get_or<std::size_t>(c.params, "x_count", 200);
  const auto r_grid = doubles_or(c.params, "r_grid", {0.1, 0.05, 0.02, 0.01});
  const double margin = get_or<double>(c.params, "margin", 0.1);
  const double floor = get_or<double>(c.params, "r_floor", 1e-6);
  const double max_final = get_or<double>(c.params, "max_final_fraction", 0.05);
  const auto res = density_experiment(a, field, x_count, r_grid, c.sampler, margin, floor);
  Outcome o;
  Table t{"rows.csv", {"index", "r", "theta", "theta_se", "running_max"}, {}};
  for (std::size_t i = 0; i < res.points.size(); ++i) {
    double run = 0.0;
    for (std::size_t j = 0; j < r_grid.size(); ++j) {
      run = std::max(run, res.points[i].theta[j].value);
      t.add(i, r_grid[j], res.points[i].theta[j].value, res.points[i].theta[j].std_error, run);
    }
  }
  Table p{"prefix.csv", {"r_min", "below_fraction", "std_error", "min_max_theta"}, {}};
  for (const auto& q : res.prefixes) p.add(q.r_min, q.below_fraction, q.std_error, q.min_max_theta);
  o.tables.push_back(std::move(t));
  o.tables.push_back(std::move(p));
  o.check("below-threshold fraction nonincreasing in r_min within 2 standard errors", res.nonincreasing,
          res.prefixes.back().below_fraction, res.prefixes.front().below_fraction);
  o.check("below-threshold fraction at the finest radius at most the configured limit",
          res.prefixes.back().below_fraction <= max_final, res.prefixes.back().below_fraction, max_final);
  o.info["threshold"] = res.threshold;
  o.info["below_threshold_fraction"] = res.prefixes.back().below_fraction;
  return o;
}

/// fubini: L^n(A) and the mean slice mass vanish together; slab family
/// scaling.
inline Outcome run_fubini(const Context& c) {
  const FrameField& ff = c.require_frame();
  const Box domain = c.params.contains("domain") ? to_box_spec(c.params.at("domain")) : ff.field().domain;
  const double delta = get_or<double>(c.params, "delta", 0.01);
  Outcome o;
  Table t{"rows.csv",
          {"instance", "width", "lebesgue", "lebesgue_se", "mean_slice", "mean_slice_se", "lebesgue_zero",
           "slice_zero", "consistent"},
          {}};
  std::uint64_t id = 0;
  auto row = [&](const std::string& name, double width, const SetOracle& a) {
    const auto rep = fubini_equivalence_check(a, ff, domain, delta, c.sampler.child(++id));
    t.add_cells({name, fmt(width), fmt(rep.lebesgue.value), fmt(rep.lebesgue.std_error), fmt(rep.mean_slice.value),
                 fmt(rep.mean_slice.std_error), fmt(rep.lebesgue_zero), fmt(rep.slice_zero), fmt(rep.consistent)});
    o.check("L^n(A) and the mean slice mass vanish together: " + name, rep.consistent, rep.lebesgue.value,
            rep.mean_slice.value);
    return rep;
  };
  for (const auto& [name, a] : c.sets) row(name, 0.0, a);
  if (c.params.contains("slab")) {
    const json& sj = c.params.at("slab");
    const int axis = get_or<int>(sj, "axis", 1);
    const auto widths = sj.at("widths").get<std::vector<double>>();
    const Box base = sj.contains("box") ? to_box_spec(sj.at("box")) : domain;
    std::vector<double> leb, mean;
    for (double w : widths) {
      Vec lo = base.lo, hi = base.hi;
      const double mid = 0.5 * (lo[axis] + hi[axis]);
      lo[axis] = mid - 0.5 * w;
      hi[axis] = mid + 0.5 * w;
      const auto rep = row("slab", w, box(lo, hi));
      leb.push_back(rep.lebesgue.value);
      mean.push_back(rep.mean_slice.value);
    }
    if (widths.size() >= 2) {
      const double s1 = loglog_slope(widths, leb), s2 = loglog_slope(widths, mean);
      o.check("slab Lebesgue measure scales linearly in width (log-log slope 1 +- 0.1)", std::abs(s1 - 1.0) <= 0.1, s1,
              1.0);
      o.check("slab mean slice mass scales linearly in width (log-log slope 1 +- 0.1)", std::abs(s2 - 1.0) <= 0.1, s2,
              1.0);
    }
  }
  o.tables.insert(o.tables.begin(), std::move(t));
  o.info["delta"] = delta;
  return o;
}

/// polyball: volume, norm gradient and Lipschitz checks, and the slice
/// inclusion bound when a frame is configured.
inline Outcome run_polyball(const Context& c) {
  Outcome o;
  Table t{"rows.csv", {"check", "n", "m", "value", "reference", "std_error", "ok"}, {}};
  std::vector<std::pair<int, int>> dims = {{2, 1}, {3, 1}, {3, 2}, {4, 2}};
  if (c.params.contains("dims")) dims = c.params.at("dims").get<std::vector<std::pair<int, int>>>();
  const double r = get_or<double>(c.params, "r", 1.0);
  const std::size_t fd_points = get_or<std::size_t>(c.params, "fd_points", 10000);
  const std::size_t lip_pairs = get_or<std::size_t>(c.params, "lipschitz_pairs", 100000);
  std::uint64_t id = 0;
  for (auto [n, m] : dims) {
    KeyedStream rng(c.sampler.seed, tag("polyball.plane"), ++id);
    const Polyball pb{rng.uniform_in_box(Box::cube(n, -1.0, 1.0)), r, random_plane(n, m, rng)};
    const auto vol = polyball_measure(pb, c.sampler.child(id));
    const bool vok = within_3sigma(vol.mc, vol.closed_form);
    t.add_cells({"volume", fmt(n), fmt(m), fmt(vol.mc.value), fmt(vol.closed_form), fmt(vol.mc.std_error), fmt(vok)});
    o.check("polyball volume alpha(m) alpha(n-m) r^n within 3 sigma, n=" + fmt(n) + " m=" + fmt(m), vok, vol.mc.value,
            vol.closed_form);
    double worst_grad = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; used < fd_points && i < 100 * fd_points; ++i) {
      KeyedStream g(c.sampler.seed, tag("polyball.grad") + id, i);
      const Vec x = pb.x0 + g.uniform_in_ball(n, 2.0 * r);
      const Vec d = x - pb.x0;
      const double a = pb.w0.project(d).norm(), b = pb.w0.project_perp(d).norm();
      if (std::abs(a - b) <= 1e-3 || std::max(a, b) < 1e-3) continue;
      ++used;
      worst_grad = std::max(worst_grad, std::abs(polyball_norm_gradient(pb, x, 1e-6).norm() - 1.0));
    }
    const bool gok = worst_grad <= 1e-6;
    t.add_cells({"gradient_norm_error", fmt(n), fmt(m), fmt(worst_grad), fmt(1e-6), fmt(0.0), fmt(gok)});
    o.check("norm gradient magnitude 1 +- 1e-6 off the singular set, n=" + fmt(n) + " m=" + fmt(m), gok, worst_grad,
            1e-6);
    double worst_ratio = 0.0;
    for (std::size_t i = 0; i < lip_pairs; ++i) {
      KeyedStream g(c.sampler.seed, tag("polyball.lip") + id, i);
      const Vec x = pb.x0 + g.uniform_in_ball(n, 2.0 * r), y = pb.x0 + g.uniform_in_ball(n, 2.0 * r);
      const double dxy = (x - y).norm();
      if (dxy < 1e-12) continue;
      worst_ratio = std::max(worst_ratio, std::abs(polyball_norm(pb, x) - polyball_norm(pb, y)) / dxy);
    }
    const bool lok = worst_ratio <= 1.0 + 1e-9;
    t.add_cells({"lipschitz_ratio", fmt(n), fmt(m), fmt(worst_ratio), fmt(1.0), fmt(0.0), fmt(lok)});
    o.check("norm 1-Lipschitz, n=" + fmt(n) + " m=" + fmt(m), lok, worst_ratio, 1.0);
  }
  if (c.frame) {
    const FrameField& ff = *c.frame;
    const Polyball pb = parse_polyball(c, ff);
    const std::size_t x_count = get_or<std::size_t>(c.params, "inclusion_points", 10);
    const std::size_t per = get_or<std::size_t>(c.params, "inclusion_samples", 10000) / std::max<std::size_t>(1, x_count);
    const double gate = get_or<double>(c.params, "gate", kPolyballGate);
    if (ff.lambda_effective() * pb.r > gate)
      throw HypothesisFailed("polyball inclusion: Lambda * r exceeds the gate " + fmt(gate));
    std::size_t violations = 0, checked = 0;
    for (std::size_t i = 0; i < x_count; ++i) {
      KeyedStream g(c.sampler.seed, tag("polyball.incl"), i);
      Vec x;
      do {
        x = pb.x0 + g.uniform_in_ball(pb.n(), std::sqrt(2.0) * pb.r);
      } while (!pb.contains(x));
      const auto rep = pb_inclusion_check(pb, ff, x, per, derive_key(c.sampler.seed, i));
      violations += rep.violations;
      checked += rep.checked;
      t.add_cells({"inclusion", fmt(pb.n()), fmt(pb.m()), fmt(rep.max_distance), fmt(rep.bound), fmt(0.0),
                   fmt(rep.violations == 0)});
    }
    o.check("slice of the polyball inside B(x, r(1+t) + 8 m Lambda r^2) (violations)", violations == 0,
            double(violations), 0);
    o.info["inclusion"] = {{"checked", checked}, {"lambda_r", ff.lambda_effective() * pb.r}};
  }
  o.tables.insert(o.tables.begin(), std::move(t));
  return o;
}

inline Outcome run_experiment(const Context& c) {
  const std::string& e = c.experiment;
  if (e == "frames") return run_frames(c);
  if (e == "jacobians") return run_jacobians(c);
  if (e == "coarea") return run_coarea(c);
  if (e == "sandwich") return run_sandwich(c);
  if (e == "stripe") return run_stripe(c);
  if (e == "bowtie") return run_bowtie(c);
  if (e == "density") return run_density(c);
  if (e == "fubini") return run_fubini(c);
  if (e == "polyball") return run_polyball(c);
  throw ConfigError("unknown experiment '" + e + "'");
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

inline json metadata(const Context& c, const Outcome& o) {
  json m;
  m["library"] = "gmtlab";
  m["version"] = kVersion;
  m["experiment"] = c.experiment;
  m["seed"] = c.sampler.seed;
  m["samples"] = c.sampler.samples;
  m["inner_samples"] = c.sampler.inner_samples;
  m["method"] = to_string(c.sampler.method);
  if (c.frame) {
    m["lambda_declared"] = c.frame->field().lambda_decl;
    m["lambda_effective"] = c.frame->lambda_effective();
  }
  json g;
  if (c.frame) {
    g["frame_lambda_times_radius"] = c.frame->field().lambda_decl * c.frame->radius();
    g["frame_lambda_times_radius_limit"] = 0.25;
  }
  g["small_diameter_lambda_times_diam_limit"] = kSmallDiameterGate;
  g["polyball_lambda_times_r_limit"] = get_or<double>(c.params, "gate", kPolyballGate);
  g["jacobian_tolerance"] = kJacobianTol;
  g["max_tangent_condition"] = kMaxTangentCondition;
  m["gates"] = g;
  m["c_config"] = get_or<double>(c.params, "c_config", 8.0);
  m["density_threshold_note"] =
      "threshold (1 - margin) / 2^n, from eta(n,m) / 2^m with eta(n,m) = 2^{-(n-m)}";
  m["info"] = o.info;
  m["config"] = c.config;
  return m;
}

inline json summary(const Context& c, const Outcome& o) {
  json s;
  s["experiment"] = c.experiment;
  json checks = json::array();
  for (const auto& k : o.checks)
    checks.push_back({{"name", k.name}, {"passed", k.passed}, {"value", k.value}, {"bound", k.bound}});
  s["checks"] = checks;
  s["values"] = o.info;
  s["failures"] = o.failures();
  s["passed"] = o.failures() == 0;
  return s;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + p.string());
  f << text;
}

/// Exit codes: 0 all checks pass, 2 some check failed, 1 configuration or
/// hypothesis error.
inline int run(const RunOptions& opt, std::ostream& log = std::cerr) {
  try {
    const Context c = load_context(opt);
    const Outcome o = run_experiment(c);
    std::filesystem::create_directories(opt.out);
    for (const auto& t : o.tables) write_file(opt.out / t.file, t.csv());
    write_file(opt.out / "metadata.json", metadata(c, o).dump(2) + "\n");
    write_file(opt.out / "summary.json", summary(c, o).dump(2) + "\n");
    for (const auto& k : o.checks) log << (k.passed ? "pass  " : "FAIL  ") << k.name << '\n';
    return o.failures() == 0 ? 0 : 2;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
  } catch (const json::exception& e) {
    log << "error: config: " << e.what() << '\n';
  } catch (const std::filesystem::filesystem_error& e) {
    log << "error: " << e.what() << '\n';
  }
  return 1;
}

inline json read_config(const std::filesystem::path& p) {
  std::ifstream f(p);
  if (!f) throw ConfigError("cannot read config " + p.string());
  return json::parse(f, nullptr, true, true);
}

}  // namespace gmtlab::cli

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "gmtlab/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace gmtlab;
using cli::json;

namespace {

struct Verdict {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

unsigned worker_threads() { return std::max(1u, std::min(8u, std::thread::hardware_concurrency())); }

json load(const std::string& name) { return cli::read_config(fs::path(GMTLAB_CONFIGS) / name); }

cli::Outcome run_config(const std::string& experiment, const json& config) {
  cli::RunOptions opt;
  opt.experiment = experiment;
  opt.config = config;
  opt.threads = worker_threads();
  return cli::run_experiment(cli::load_context(opt));
}

void require_all_checks(Verdict& v, const cli::Outcome& o, const std::string& label) {
  v.require(!o.checks.empty(), label + ": no checks ran");
  for (const auto& c : o.checks)
    v.require(c.passed, label + ": " + c.name + " (value " + cli::fmt(c.value) + ", bound " + cli::fmt(c.bound) + ")");
}

bool near_value(const MeasureEstimate& e, double exact, double k = 3.0) {
  return std::abs(e.value - exact) <= k * e.std_error + 1e-12;
}

// Test-side closed forms.
double unit_ball_volume(int m) { return std::pow(kPi, 0.5 * m) / std::tgamma(0.5 * m + 1.0); }

std::size_t choose(int n, int k) {
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
  return r;
}

// ---------------------------------------------------------------------------

Verdict c1_metric_closed_form() {
  Verdict v;
  KeyedStream rng(101, 1, 0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double th = (2.0 * rng.uniform() - 1.0) * kPi;
    worst = std::max(worst, std::abs(grassmann_distance(line_2d(th), line_2d(0.0)) - std::abs(std::sin(th))));
  }
  v.require(worst <= 1e-9, "max error " + cli::fmt(worst));
  v.detail = v.ok ? "max error " + cli::fmt(worst) : v.detail;
  return v;
}

Verdict c2_gram_schmidt_frame() {
  Verdict v;
  double worst_span = 0.0, worst_orth = 0.0, worst_dist = 0.0;
  std::uint64_t id = 0;
  for (auto [n, m] : std::vector<std::pair<int, int>>{{2, 1}, {3, 1}, {3, 2}, {4, 2}}) {
    KeyedStream rng(202, static_cast<std::uint64_t>(n * 10 + m), 0);
    const Plane base = random_plane(n, m, rng);
    const Frame base_frame(base.basis(), 1e-9);
    for (int k = 0; k < 2500; ++k, ++id) {
      const Plane w = random_plane_near(base, 0.45, rng);
      const Frame f = local_frame(base, base_frame, w);
      const Mat q = f.vectors();
      worst_dist = std::max(worst_dist, operator_norm(base.proj() - w.proj()));
      // Independent residuals: q q^T reproduces P_W and q^T q = I.
      worst_span = std::max(worst_span, (q * q.transpose() - w.proj()).cwiseAbs().maxCoeff());
      worst_span = std::max(worst_span, (w.proj() * q - q).cwiseAbs().maxCoeff());
      worst_orth = std::max(worst_orth, (q.transpose() * q - Mat::Identity(m, m)).cwiseAbs().maxCoeff());
    }
  }
  v.require(id == 10000, "plane count " + std::to_string(id));
  v.require(worst_dist <= 0.45 + 1e-12, "base distance " + cli::fmt(worst_dist));
  v.require(worst_span <= 1e-9, "span residual " + cli::fmt(worst_span));
  v.require(worst_orth <= 1e-9, "orthonormality " + cli::fmt(worst_orth));
  if (v.ok) v.detail = "span residual " + cli::fmt(worst_span) + " over 10000 planes";
  return v;
}

Verdict c3_binet_cauchy() {
  Verdict v;
  KeyedStream rng(303, 1, 0);
  double worst_margin = std::numeric_limits<double>::infinity();
  double worst_sum = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const int n = 2 + static_cast<int>(rng.uniform() * 5.0);  // 2..6
    const int q = 1 + static_cast<int>(rng.uniform() * (n - 1));
    const Frame f = random_frame(n, q, rng);
    const auto best = binet_cauchy_best_minor(f);
    // Independent enumeration over row subsets by bitmask.
    double best_mask = 0.0, sum_sq = 0.0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      if (__builtin_popcount(mask) != q) continue;
      Mat sub(q, q);
      int r = 0;
      for (int i = 0; i < n; ++i)
        if (mask & (1u << i)) sub.row(r++) = f.vectors().row(i);
      const double d = sub.determinant();
      best_mask = std::max(best_mask, std::abs(d));
      sum_sq += d * d;
    }
    worst_sum = std::max(worst_sum, std::abs(sum_sq - 1.0));
    v.require(std::abs(best.value - best_mask) <= 1e-12, "best minor differs from enumeration");
    worst_margin = std::min(worst_margin, best.value - 1.0 / std::sqrt(static_cast<double>(choose(n, q))));
    if (!v.ok) break;
  }
  v.require(worst_margin >= -1e-12, "best minor below C(n,q)^{-1/2} by " + cli::fmt(-worst_margin));
  v.require(worst_sum <= 1e-10, "sum of squared minors off 1 by " + cli::fmt(worst_sum));
  if (v.ok) v.detail = "min margin " + cli::fmt(worst_margin) + " over 1000 frames";
  return v;
}

Verdict c4_jacobian_bounds() {
  Verdict v;
  // Constant fields: both Jacobians equal 2^{-(n-m)/2}; checked by the runner
  // and against a test-side value here.
  for (auto [n, m] : std::vector<std::pair<int, int>>{{2, 1}, {3, 1}, {3, 2}, {4, 2}}) {
    std::vector<int> idx;
    for (int i = 0; i < m; ++i) idx.push_back(i);
    const Box dom = Box::cube(n, -1.0, 1.0);
    const FrameField ff(constant_field(coordinate_plane(n, idx), dom), Vec::Zero(n), 0.5);
    KeyedStream rng(404, static_cast<std::uint64_t>(n * 10 + m), 0);
    const double expected = std::pow(2.0, -0.5 * (n - m));
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
      const Vec x = rng.uniform_in_ball(n, 0.2);
      const Vec t = rng.uniform_in_ball(m, 0.2);
      const auto p = sigma_point(ff, x, t);
      worst = std::max({worst, std::abs(jacobian_pi1(ff, p).value - expected),
                        std::abs(jacobian_pi2(ff, p).value - expected)});
    }
    v.require(worst <= 1e-5, "constant field n=" + std::to_string(n) + " m=" + std::to_string(m) + " error " +
                                 cli::fmt(worst));
  }
  // Rotation field, 10^4 points, |t| <= 0.05 / Lambda.
  json cfg = load("jacobians.json");
  cfg["params"]["count"] = 10000;
  cfg["params"].erase("t_max");
  cfg["params"].erase("y_max");
  const auto o = run_config("jacobians", cfg);
  require_all_checks(v, o, "rotation field");
  const double lam_t = o.info.at("t_max").get<double>();
  v.require(lam_t > 0.0, "t_max not reported");
  json cc = cfg;
  cc["field"] = json::parse(R"({"type": "constant", "plane": {"coordinates": [0]},
                                "domain": {"lo": [-1, -1, -1], "hi": [1, 1, 1]}})");
  cc["params"]["count"] = 1000;
  require_all_checks(v, run_config("jacobians", cc), "constant field runner");
  if (v.ok) v.detail = "10000 rotation-field points, t_max " + cli::fmt(lam_t);
  return v;
}

Verdict c5_coarea() {
  Verdict v;
  Sampler s;
  s.samples = 1000000;
  s.seed = 505;
  s.threads = worker_threads();
  const double delta = 1e-4;
  {
    const Box dom = Box::cube(2, -1.0, 2.0);
    const FrameField ff(constant_field(coordinate_plane(2, {0}), dom), Vec::Constant(2, 0.5), 1.0);
    const SetOracle e = box(Vec::Zero(2), Vec::Ones(2));
    const auto c1 = coarea_check_pi1(e, e, ff, s.child(1));
    const auto c2 = coarea_check_pi2(e, e, ff, delta, s.child(2));
    for (const auto* est : {&c1.left, &c1.right, &c2.left, &c2.right}) {
      v.require(near_value(*est, 1.0), "constant field side " + cli::fmt(est->value) + " +- " +
                                           cli::fmt(est->std_error) + " not within 3 sigma of 1");
      v.require(est->std_error <= 0.005, "sigma " + cli::fmt(est->std_error) + " above 0.5%");
    }
    v.require(c1.agree && c2.agree, "constant field sides disagree");
    if (v.ok)
      v.detail = "constant: pi1 " + cli::fmt(c1.left.value) + "/" + cli::fmt(c1.right.value) + ", pi2 " +
                 cli::fmt(c2.left.value) + "/" + cli::fmt(c2.right.value);
  }
  {
    const Box dom = Box::cube(2, 0.0, 1.0);
    Vec a(2);
    a << 1.0, 0.0;
    const FrameField ff(rotation_field_2d(1.0, a, dom), Vec::Constant(2, 0.5), 0.2);
    const SetOracle e = box(Vec::Constant(2, 0.4), Vec::Constant(2, 0.6));
    Sampler r = s.with_samples(200000);
    const auto c1 = coarea_check_pi1(e, e, ff, r.child(3));
    const auto c2 = coarea_check_pi2(e, e, ff, delta, r.child(4));
    v.require(c1.agree, "rotation pi1 disagree: " + cli::fmt(c1.left.value) + " vs " + cli::fmt(c1.right.value));
    v.require(c2.agree, "rotation pi2 disagree: " + cli::fmt(c2.left.value) + " vs " + cli::fmt(c2.right.value));
    if (v.ok)
      v.detail += "; rotation: pi1 " + cli::fmt(c1.left.value) + "/" + cli::fmt(c1.right.value) + ", pi2 " +
                  cli::fmt(c2.left.value) + "/" + cli::fmt(c2.right.value);
  }
  return v;
}

Verdict c6_sandwich() {
  Verdict v;
  const json cfg = load("sandwich.json");
  v.require(cfg.at("params").at("u_count").get<int>() == 50, "u_count is not 50");
  v.require(cfg.at("params").at("epsilon").get<double>() == 0.1, "epsilon is not 0.1");
  const auto o = run_config("sandwich", cfg);
  require_all_checks(v, o, "sandwich");
  if (v.ok) v.detail = std::to_string(o.checks.size()) + " checks at 50 u";
  return v;
}

Verdict c7_polyball() {
  Verdict v;
  for (auto [n, m] : std::vector<std::pair<int, int>>{{2, 1}, {3, 1}, {3, 2}, {4, 2}}) {
    KeyedStream rng(707, static_cast<std::uint64_t>(n * 10 + m), 0);
    const Polyball pb{Vec::Zero(n), 0.7, random_plane(n, m, rng)};
    Sampler s;
    s.samples = 1000000;
    s.seed = 707;
    s.threads = worker_threads();
    const auto vol = polyball_measure(pb, s);
    const double oracle = unit_ball_volume(m) * unit_ball_volume(n - m) * std::pow(0.7, n);
    v.require(std::abs(vol.closed_form - oracle) <= 1e-12 * oracle, "closed form differs from test-side value");
    v.require(near_value(vol.mc, oracle), "volume n=" + std::to_string(n) + " m=" + std::to_string(m) + ": " +
                                              cli::fmt(vol.mc.value) + " vs " + cli::fmt(oracle));
  }
  const json cfg = load("polyball.json");
  const auto o = run_config("polyball", cfg);
  require_all_checks(v, o, "polyball");
  const double lr = o.info.at("inclusion").at("lambda_r").get<double>();
  v.require(lr <= 0.01, "Lambda r = " + cli::fmt(lr));
  v.require(o.info.at("inclusion").at("checked").get<double>() >= 10000, "fewer than 10^4 inclusion samples");
  if (v.ok) v.detail = std::to_string(o.checks.size()) + " runner checks, Lambda r " + cli::fmt(lr);
  return v;
}

Verdict c8_bowtie() {
  Verdict v;
  const json cfg = load("bowtie.json");
  v.require(cfg.at("params").at("count").get<int>() == 100, "count is not 100");
  v.require(cfg.at("params").at("tau_max").get<double>() == 0.9, "tau_max is not 0.9");
  const auto o = run_config("bowtie", cfg);
  require_all_checks(v, o, "bowtie");
  // Flat patch: the area of a disc graph over W equals alpha(m) (diam/2)^m.
  KeyedStream rng(808, 1, 0);
  const auto flat = random_graph_patch(3, 2, 0.0, rng);
  Sampler s;
  s.samples = 200000;
  s.seed = 808;
  const auto rep = bowtie_check(flat, 0.0, 200, s);
  v.require(rep.ok, "flat patch violates the bound");
  if (v.ok) v.detail = "100 patches, tau <= 0.9";
  return v;
}

Verdict c9_stripe() {
  Verdict v;
  json cfg = load("stripe.json");
  const auto o = run_config("stripe", cfg);
  require_all_checks(v, o, "rotation field");
  const double lr = o.info.at("polyball").at("lambda_r").get<double>();
  v.require(lr <= 0.005 + 1e-12, "Lambda r = " + cli::fmt(lr));
  v.require(o.info.at("epsilon").get<double>() == 0.1, "epsilon is not 0.1");
  json cc = cfg;
  cc["field"] = json::parse(R"({"type": "constant", "plane": {"coordinates": [0]},
                                "domain": {"lo": [0, 0], "hi": [1, 1]}})");
  cc["sets"] = json::object();
  const auto oc = run_config("stripe", cc);
  require_all_checks(v, oc, "constant field");
  bool exact_ran = false;
  for (const auto& c : oc.checks) exact_ran = exact_ran || c.name.rfind("constant field", 0) == 0;
  v.require(exact_ran, "constant-field comparison did not run");
  if (v.ok) v.detail = "Lambda r " + cli::fmt(lr) + ", constant field exact";
  return v;
}

Verdict c10_density() {
  Verdict v;
  const json cfg = load("density.json");
  const auto& p = cfg.at("params");
  v.require(p.at("x_count").get<int>() == 200, "x_count is not 200");
  v.require(p.at("r_grid").get<std::vector<double>>() == std::vector<double>{0.1, 0.05, 0.02, 0.01}, "r_grid differs");
  v.require(cfg.at("field").at("kappa").get<double>() == 0.5, "kappa is not 0.5");
  const auto o = run_config("density", cfg);
  require_all_checks(v, o, "rotation field");
  const double thr = o.info.at("threshold").get<double>();
  v.require(std::abs(thr - 0.9 * 0.25) <= 1e-15, "threshold " + cli::fmt(thr));
  const double frac = o.info.at("below_threshold_fraction").get<double>();
  v.require(frac <= 0.05, "final fraction " + cli::fmt(frac));

  // Control: constant field and a box, both with the chord oracle and with
  // Monte Carlo slices.
  const SetOracle a = box(Vec::Zero(2), Vec::Ones(2));
  const PlaneField field = constant_field(coordinate_plane(2, {0}), Box::cube(2, 0.0, 1.0));
  for (bool oracle : {true, false}) {
    Sampler s;
    s.samples = 4000;
    s.seed = 1010;
    s.threads = worker_threads();
    s.use_oracle = oracle;
    const auto res = density_experiment(a, field, 200, {0.1, 0.05, 0.02, 0.01}, s, 0.1, 1e-6);
    v.require(res.prefixes.back().below_fraction == 0.0, "control fraction nonzero");
    std::size_t misses = 0;
    for (const auto& pt : res.points) {
      const bool interior = (pt.x.array() >= 0.1).all() && (pt.x.array() <= 0.9).all();
      if (!interior) continue;
      for (const auto& th : pt.theta) misses += near_value(th, 1.0) ? 0 : 1;
    }
    v.require(misses == 0, std::string(oracle ? "oracle" : "Monte Carlo") + " control: " + std::to_string(misses) +
                               " interior densities off 1");
  }
  if (v.ok) v.detail = "final fraction " + cli::fmt(frac) + ", control fraction 0";
  return v;
}

Verdict c11_fubini() {
  Verdict v;
  const json cfg = load("fubini.json");
  v.require(cfg.at("params").at("slab").at("widths").get<std::vector<double>>() ==
                std::vector<double>{0.1, 0.01, 0.001},
            "widths differ");
  const auto o = run_config("fubini", cfg);
  require_all_checks(v, o, "fubini");
  std::string slopes;
  for (const auto& c : o.checks)
    if (c.name.find("log-log slope") != std::string::npos) slopes += (slopes.empty() ? "" : ", ") + cli::fmt(c.value);
  v.require(!slopes.empty(), "slope checks did not run");
  // Test-side oracle: slab area equals its width on the unit square.
  const auto& rows = o.tables.front().rows;
  for (const auto& r : rows) {
    if (r.at(0) != "slab") continue;
    const double w = std::stod(r.at(1)), leb = std::stod(r.at(2)), se = std::stod(r.at(3));
    v.require(std::abs(leb - w) <= 3.0 * se + 1e-12, "slab width " + r.at(1) + " area " + r.at(2));
  }
  if (v.ok) v.detail = "slopes " + slopes;
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(GMTLAB_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict c12_determinism() {
  Verdict v;
  const fs::path root = fs::temp_directory_path() / "gmtlab_acceptance_determinism";
  fs::remove_all(root);
  std::size_t compared = 0;
  for (const auto& name : cli::experiment_names()) {
    const fs::path cfg = fs::path(GMTLAB_CONFIGS) / (name + ".json");
    if (!fs::exists(cfg)) {
      v.require(false, "no config for " + name);
      continue;
    }
    const std::size_t samples = std::min<std::size_t>(cli::get_or<std::size_t>(load(name + ".json"), "samples", 20000), 20000);
    const std::string base = name + " --config " + cfg.string() + " --seed 1234 --samples " + std::to_string(samples);
    const std::vector<std::pair<std::string, std::string>> runs = {
        {"a", " --threads 1"}, {"b", " --threads 1"}, {"c", " --threads 4"}};
    std::vector<int> codes;
    for (const auto& [dir, extra] : runs) codes.push_back(run_binary(base + " --out " + (root / name / dir).string() + extra));
    v.require(codes[0] == codes[1] && codes[0] == codes[2], name + ": exit codes differ");
    v.require(codes[0] == 0 || codes[0] == 2, name + ": exit code " + std::to_string(codes[0]));
    const fs::path a = root / name / "a";
    if (!fs::exists(a)) continue;
    for (const auto& entry : fs::directory_iterator(a)) {
      const auto file = entry.path().filename();
      if (file.extension() != ".csv" && file != "summary.json") continue;
      const std::string ref = slurp(entry.path());
      v.require(!ref.empty(), name + "/" + file.string() + " is empty");
      v.require(ref == slurp(root / name / "b" / file), name + "/" + file.string() + " differs on rerun");
      v.require(ref == slurp(root / name / "c" / file), name + "/" + file.string() + " differs across thread counts");
      ++compared;
    }
  }
  v.require(compared >= cli::experiment_names().size(), "too few files compared");
  if (v.ok) v.detail = std::to_string(compared) + " files identical across 3 runs each";
  return v;
}

struct Criterion {
  int id;
  std::string name;
  double limit_s;
  std::function<Verdict()> fn;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "Grassmannian metric closed form", 1, c1_metric_closed_form},
      {2, "Gram-Schmidt frame span residual", 10, c2_gram_schmidt_frame},
      {3, "Binet-Cauchy best minor", 10, c3_binet_cauchy},
      {4, "Jacobian factor bounds", 120, c4_jacobian_bounds},
      {5, "coarea identities", 300, c5_coarea},
      {6, "Z sandwich and phi lower bound", 300, c6_sandwich},
      {7, "polyball geometry", 120, c7_polyball},
      {8, "bow-tie lemma", 60, c8_bowtie},
      {9, "stripe lower bound", 120, c9_stripe},
      {10, "density surrogate", 600, c10_density},
      {11, "Fubini equivalence surrogate", 120, c11_fubini},
      {12, "determinism", 1e9, c12_determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.fn();
    } catch (const std::exception& e) {
      v.ok = false;
      v.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= c.limit_s) v.require(false, "runtime " + cli::fmt(secs) + " s over " + cli::fmt(c.limit_s) + " s");
    if (!v.ok) ++failures;
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.2f s", secs);
    std::cout << (v.ok ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << " (" << timing << "): " << v.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}

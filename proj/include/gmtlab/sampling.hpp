#pragma once

// Reproducible stochastic integration.
//
// Every random number is drawn from a counter-based stream keyed by
// (global seed, estimate id, batch index). Work is cut into fixed-size
// batches whose partial sums are combined in batch order, so a result is
// bit-identical whatever the number of worker threads.

#include "gmtlab/core.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace gmtlab {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t parent, std::uint64_t child) {
  return mix64(parent ^ mix64(child + kGolden));
}

/// Counter-based generator: output i is mix64(key + i * golden).
class KeyedStream {
 public:
  using result_type = std::uint64_t;

  KeyedStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t batch)
      : key_(derive_key(derive_key(mix64(seed), stream), batch)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kGolden); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    double u1 = 0.0;
    do u1 = uniform(); while (u1 <= 0.0);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  Vec uniform_in_box(const Box& b) {
    Vec x(b.dim());
    for (int i = 0; i < b.dim(); ++i) x[i] = uniform(b.lo[i], b.hi[i]);
    return x;
  }

  Vec unit_vector(int dim) {
    Vec g(dim);
    double nrm = 0.0;
    do {
      for (int i = 0; i < dim; ++i) g[i] = normal();
      nrm = g.norm();
    } while (nrm < 1e-12);
    return g / nrm;
  }

  Vec uniform_in_ball(int dim, double radius) {
    return unit_vector(dim) * (radius * std::pow(uniform(), 1.0 / dim));
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Runs fn(batch) for every batch index and returns the results in batch
/// order. The thread count only affects wall time.
template <class Fn>
auto run_batches(std::size_t n_batches, unsigned threads, Fn&& fn) {
  using R = std::invoke_result_t<Fn&, std::size_t>;
  std::vector<R> out(n_batches);
  if (threads <= 1 || n_batches <= 1) {
    for (std::size_t b = 0; b < n_batches; ++b) out[b] = fn(b);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n_batches);
  auto worker = [&] {
    for (std::size_t b = next.fetch_add(1); b < n_batches; b = next.fetch_add(1)) {
      try {
        out[b] = fn(b);
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned k = std::min<unsigned>(threads, static_cast<unsigned>(n_batches));
  pool.reserve(k);
  for (unsigned i = 0; i < k; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Estimates and samplers
// ---------------------------------------------------------------------------

enum class Method { grid, mc, qmc, closed_form };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::grid: return "grid";
    case Method::mc: return "mc";
    case Method::qmc: return "qmc";
    case Method::closed_form: return "closed_form";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "grid") return Method::grid;
  if (s == "mc") return Method::mc;
  if (s == "qmc") return Method::qmc;
  if (s == "closed_form") return Method::closed_form;
  throw ConfigError("unknown sampling method '" + s + "'");
}

/// A stochastic (or exact) integral: value, standard error, sample count.
struct MeasureEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  Method method = Method::closed_form;

  static MeasureEstimate exact(double v) { return {v, 0.0, 0, Method::closed_form}; }
};

struct Sampler {
  Method method = Method::mc;
  std::size_t samples = 100000;
  /// Sample count of each inner estimate in a nested integral.
  std::size_t inner_samples = 64;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  unsigned threads = 1;
  /// Use closed-form slice oracles when a set provides one.
  bool use_oracle = true;

  /// Sampler for a sub-estimate: same seed, stream keyed by (this stream, id).
  [[nodiscard]] Sampler child(std::uint64_t id) const {
    Sampler s = *this;
    s.stream = derive_key(stream, id);
    return s;
  }
  [[nodiscard]] Sampler with_samples(std::size_t n) const {
    Sampler s = *this;
    s.samples = n;
    return s;
  }
  [[nodiscard]] Sampler with_method(Method m) const {
    Sampler s = *this;
    s.method = m;
    return s;
  }
};

/// One evaluation of a nested integrand: an inner estimate and its variance.
struct InnerSample {
  double value = 0.0;
  double variance = 0.0;
};

namespace detail {

inline constexpr std::size_t kBatchSize = 2048;

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  double inner_var = 0.0;
  std::size_t n = 0;

  void add(double v, double iv = 0.0) {
    sum += v;
    sum_sq += v * v;
    inner_var += iv;
    ++n;
  }
  void merge(const Moments& o) {
    sum += o.sum;
    sum_sq += o.sum_sq;
    inner_var += o.inner_var;
    n += o.n;
  }
};

template <class F>
void add_value(Moments& m, F&& f, std::span<const double> u) {
  auto r = f(u);
  if constexpr (std::is_same_v<std::decay_t<decltype(r)>, InnerSample>)
    m.add(r.value, r.variance);
  else
    m.add(static_cast<double>(r));
}

inline double radical_inverse(std::uint64_t i, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

inline constexpr std::array<unsigned, 24> kPrimes = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                                     41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};

/// Mean, variance-of-the-mean and count of f over n uniform points of the
/// unit cube [0,1)^dim, drawn from the keyed stream in fixed batches.
template <class F>
Moments mc_moments(int dim, std::size_t n, const Sampler& s, std::uint64_t stream, F&& f) {
  const std::size_t nb = (n + kBatchSize - 1) / kBatchSize;
  auto parts = run_batches(nb, s.threads, [&](std::size_t b) {
    KeyedStream rng(s.seed, stream, b);
    Moments m;
    std::vector<double> u(static_cast<std::size_t>(dim));
    const std::size_t end = std::min(n, (b + 1) * kBatchSize);
    for (std::size_t i = b * kBatchSize; i < end; ++i) {
      for (auto& c : u) c = rng.uniform();
      add_value(m, f, u);
    }
    return m;
  });
  Moments total;
  for (const auto& p : parts) total.merge(p);
  return total;
}

template <class F>
Moments halton_moments(int dim, std::size_t n, const Sampler& s, std::uint64_t stream,
                       const std::vector<double>& shift, F&& f) {
  if (dim > static_cast<int>(kPrimes.size())) throw ConfigError("qmc: dimension too large for Halton");
  const std::size_t nb = (n + kBatchSize - 1) / kBatchSize;
  auto parts = run_batches(nb, s.threads, [&](std::size_t b) {
    Moments m;
    std::vector<double> u(static_cast<std::size_t>(dim));
    const std::size_t end = std::min(n, (b + 1) * kBatchSize);
    for (std::size_t i = b * kBatchSize; i < end; ++i) {
      for (int d = 0; d < dim; ++d) {
        double v = radical_inverse(i + 1, kPrimes[static_cast<std::size_t>(d)]) + shift[static_cast<std::size_t>(d)];
        u[static_cast<std::size_t>(d)] = v - std::floor(v);
      }
      add_value(m, f, u);
    }
    return m;
  });
  (void)stream;
  Moments total;
  for (const auto& p : parts) total.merge(p);
  return total;
}

template <class F>
double grid_mean(int dim, std::size_t per_axis, F&& f) {
  std::size_t total = 1;
  for (int d = 0; d < dim; ++d) total *= per_axis;
  std::vector<double> u(static_cast<std::size_t>(dim));
  double sum = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t k = i;
    for (int d = 0; d < dim; ++d) {
      u[static_cast<std::size_t>(d)] = (static_cast<double>(k % per_axis) + 0.5) / static_cast<double>(per_axis);
      k /= per_axis;
    }
    Moments m;
    add_value(m, f, u);
    sum += m.sum;
  }
  return sum / static_cast<double>(total);
}

}  // namespace detail

/// Integral of f over a region of the given volume, where f receives
/// coordinates in the unit cube [0,1)^dim and returns either a double or an
/// InnerSample (for nested estimates; its variance is propagated with the
/// two-stage formula Var(outer mean) + mean inner variance / N).
///
/// mc:   plain Monte Carlo, std_error from the sample variance.
/// qmc:  Halton points under 8 random Cranley-Patterson shifts; std_error
///       from the spread of the 8 replicate means.
/// grid: midpoint lattice with k = floor(N^(1/dim)) points per axis;
///       std_error is |I_k - I_{k/2}| (refinement difference).
template <class F>
MeasureEstimate integrate(int dim, double volume, const Sampler& s, F&& f) {
  if (volume <= 0.0 || s.samples == 0) return {0.0, 0.0, s.samples, s.method == Method::closed_form ? Method::mc : s.method};
  switch (s.method) {
    case Method::qmc: {
      constexpr int kShifts = 8;
      const std::size_t per = std::max<std::size_t>(1, s.samples / kShifts);
      std::vector<double> means;
      double inner = 0.0;
      for (int r = 0; r < kShifts; ++r) {
        KeyedStream shift_rng(s.seed, derive_key(s.stream, 0xA11CE), static_cast<std::uint64_t>(r));
        std::vector<double> shift(static_cast<std::size_t>(dim));
        for (auto& c : shift) c = shift_rng.uniform();
        auto m = detail::halton_moments(dim, per, s, s.stream, shift, f);
        means.push_back(m.sum / static_cast<double>(m.n));
        inner += m.inner_var / static_cast<double>(m.n);
      }
      double mean = 0.0;
      for (double v : means) mean += v;
      mean /= kShifts;
      double var = 0.0;
      for (double v : means) var += (v - mean) * (v - mean);
      var /= (kShifts - 1) * kShifts;
      var += inner / kShifts / static_cast<double>(per * kShifts);
      return {volume * mean, volume * std::sqrt(var), per * kShifts, Method::qmc};
    }
    case Method::grid: {
      auto k = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(s.samples), 1.0 / dim) + 1e-9));
      k = std::max<std::size_t>(k, 2);
      double fine = detail::grid_mean(dim, k, f);
      double coarse = detail::grid_mean(dim, k / 2, f);
      std::size_t total = 1;
      for (int d = 0; d < dim; ++d) total *= k;
      return {volume * fine, volume * std::abs(fine - coarse), total, Method::grid};
    }
    case Method::mc:
    case Method::closed_form:
    default: {
      auto m = detail::mc_moments(dim, s.samples, s, s.stream, f);
      const double nn = static_cast<double>(m.n);
      const double mean = m.sum / nn;
      double var = std::max(0.0, m.sum_sq / nn - mean * mean);
      double var_mean = (m.n > 1 ? var * nn / (nn - 1.0) : 0.0) / nn + m.inner_var / nn / nn;
      return {volume * mean, volume * std::sqrt(var_mean), m.n, Method::mc};
    }
  }
}

/// Stream id derived from the bit patterns of a sample point; nested
/// estimates key their inner streams with it so they do not depend on the
/// order in which outer samples are evaluated.
inline std::uint64_t hash_point(std::span<const double> u) {
  std::uint64_t h = kGolden;
  for (double v : u) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof bits);
    h = derive_key(h, bits);
  }
  return h;
}

/// Maps unit-cube coordinates onto a box.
inline Vec to_box(std::span<const double> u, const Box& b, std::size_t offset = 0) {
  Vec x(b.dim());
  for (int i = 0; i < b.dim(); ++i) x[i] = b.lo[i] + (b.hi[i] - b.lo[i]) * u[offset + static_cast<std::size_t>(i)];
  return x;
}

}  // namespace gmtlab

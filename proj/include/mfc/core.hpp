#pragma once

// Shared domain types: model constants, time grids, torus geometry and
// seeded random streams.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfc {

/// Raised when a solver detects a numerical failure (as opposed to bad input,
/// which raises std::invalid_argument).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scalar constants of the leader-follower model and its cost.
struct ModelParams {
  double k = 10.0;         // follower-follower interaction strength
  double k_leader = 5.0;   // leader-follower interaction strength
  double sigma = 0.05;     // common diffusion coefficient
  double radius = 0.15;    // interaction radius on the unit torus
  double lambda = 0.01;    // control penalty
  double horizon = 1.0;
  std::size_t n_followers = 99;
  // Half-width of the cosine taper around `radius`; 0 gives the sharp
  // bounded-confidence indicator.
  double kernel_width = 0.0;

  /// Human-readable list of violated invariants; empty when valid.
  std::vector<std::string> violations() const;
  /// Throws std::invalid_argument listing every violation.
  void validate() const;
};

/// Uniform grid 0 = t_0 < ... < t_M = T.
struct TimeGrid {
  double dt = 1e-3;
  std::size_t steps = 1000;

  static TimeGrid with_step(double horizon, double dt);
  double horizon() const { return dt * static_cast<double>(steps); }
  double node(std::size_t j) const { return dt * static_cast<double>(j); }
};

/// Maps a finite real onto [0, 1).
double wrap(double x);

/// Signed displacement r in [-0.5, 0.5) with x + r = y (mod 1).
inline double geodesic_disp(double x, double y) {
  double r = y - x;
  r -= std::floor(r + 0.5);
  // floor(r + 0.5) can round r = 0.5 - ulp up to the next integer.
  if (r >= 0.5) r -= 1.0;
  if (r < -0.5) r += 1.0;
  return r;
}

inline double geodesic_dist(double x, double y) { return std::abs(geodesic_disp(x, y)); }

// ---------------------------------------------------------------------------
// Random streams

enum class Stream : std::uint64_t {
  kFollowerNoise = 1,
  kLeaderNoise = 2,
  kInitialConditions = 3,
  kAuxiliary = 4,
};

struct SeedSpec {
  std::uint64_t master = 20240601;
};

/// SplitMix64 finaliser; used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the substream (label, a, b) under a master seed.
std::uint64_t substream_seed(const SeedSpec& seed, Stream label, std::uint64_t a,
                             std::uint64_t b = 0);

/// Splittable 64-bit generator (Steele, Lea & Flood). Satisfies
/// UniformRandomBitGenerator; one instance per substream.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t state) : state_(state) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }
  /// Uniform double in [0, 1) from the top 53 bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

/// Standard normal variates on top of any engine (ziggurat).
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : engine_(seed) {}
  double operator()();
  SplitMix64& engine() { return engine_; }

 private:
  SplitMix64 engine_;
};

// ---------------------------------------------------------------------------
// Initial data

struct VonMisesComponent {
  double mean;   // location on [0, 1)
  double kappa;  // concentration
};

/// Equal-weight mixture of von Mises laws on the unit torus,
/// f(x | m, kappa) = exp(kappa cos(2 pi (x - m))) / I0(kappa).
class VonMisesMixture {
 public:
  explicit VonMisesMixture(std::vector<VonMisesComponent> components);
  /// Two-cluster opinion profile: components (0.65, 4) and (0.25, 8).
  static VonMisesMixture opinion_clusters();

  double density(double x) const;
  /// Mass in [a, b] for 0 <= a <= b <= 1 by composite Gauss-Legendre.
  double mass(double a, double b) const;
  double cdf(double x) const { return mass(0.0, x); }
  const std::vector<VonMisesComponent>& components() const { return components_; }

  /// Rejection sampler; deterministic in (seed, count, path).
  std::vector<double> sample(const SeedSpec& seed, std::size_t count,
                             std::uint64_t path = 0) const;

 private:
  std::vector<VonMisesComponent> components_;
  std::vector<double> normalisers_;
};

/// Rejection sample from a single component. Engine supplied by caller.
double sample_von_mises(const VonMisesComponent& c, SplitMix64& engine);

std::vector<double> sample_von_mises_mixture(const SeedSpec& seed, std::size_t count);

// ---------------------------------------------------------------------------
// Execution

enum class Execution { kSerial, kParallel };

/// Runs body(i) for i in [0, n). kParallel distributes over OpenMP threads;
/// the first exception thrown by any iteration is rethrown on the caller.
template <class Body>
void for_each_index(std::size_t n, Execution exec, Body&& body) {
  if (exec == Execution::kSerial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Caps OpenMP worker count; 0 restores the runtime default.
void set_worker_count(int threads);

}  // namespace mfc

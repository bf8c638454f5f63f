#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fourierflow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
// Point sets are stored column-wise: one 3D point per column.
using Points3 = Eigen::Matrix3Xd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Deterministic random source. Gaussian draws use an explicit Box-Muller
/// transform instead of std::normal_distribution so that a fixed seed gives
/// the same stream on every standard library implementation.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return mean + stddev * r * std::cos(kTwoPi * u2);
  }

  Vec3 normal_vec3(double stddev) {
    return Vec3(normal(0.0, stddev), normal(0.0, stddev), normal(0.0, stddev));
  }

  Vec3 uniform_in_box(const Vec3& lo, const Vec3& hi) {
    return Vec3(uniform(lo.x(), hi.x()), uniform(lo.y(), hi.y()),
                uniform(lo.z(), hi.z()));
  }

  std::uint64_t raw() { return engine_(); }

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

namespace detail {

inline int& thread_count_override() {
  static int count = 0;  // 0 = resolve from env / hardware
  return count;
}

}  // namespace detail

/// Set the worker thread count for parallel loops. 0 restores the default
/// (FOURIERFLOW_THREADS env var if set, otherwise hardware concurrency).
inline void set_thread_count(int count) {
  detail::thread_count_override() = count < 0 ? 0 : count;
}

inline int thread_count() {
  if (detail::thread_count_override() > 0) return detail::thread_count_override();
  if (const char* env = std::getenv("FOURIERFLOW_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

/// Chunked parallel loop over [0, n). The body must only write to
/// index-disjoint state; results are then identical for any thread count.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
  const int workers = thread_count();
  if (n <= 0) return;
  if (workers <= 1 || n < 2 * workers) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::int64_t lo = w * chunk;
    const std::int64_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace fourierflow

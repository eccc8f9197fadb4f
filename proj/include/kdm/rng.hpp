#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "kdm/errors.hpp"

namespace kdm {

/// Counter-based random stream: the sequence is a pure function of
/// (seed, stream, counter), so identical state reproduces identical draws
/// on any platform and parallel callers can split off independent streams.
struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t counter = 0;

  explicit RngState(std::uint64_t seed_ = 0, std::uint64_t stream_ = 0)
      : seed(seed_), stream(stream_) {}

  /// A fresh stream derived from this one; does not disturb this state.
  RngState split(std::uint64_t substream) const {
    return RngState(seed, stream * 0x9E3779B97F4A7C15ull + substream + 1);
  }

  std::uint64_t next_u64() {
    std::uint64_t x = key() + (++counter) * 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller on two counter draws. Always consumes
  /// exactly two uniforms (no cached partner), keeping the draw count a
  /// pure function of the number of calls.
  double next_gaussian() {
    double u1 = 1.0 - next_double();  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Inverse-CDF draw from a weight vector (need not be exactly normalized).
  Eigen::Index next_categorical(const Eigen::VectorXd& weights) {
    double total = weights.sum();
    if (!(total > 0.0)) {
      throw Error(ErrorCode::bad_weights, "categorical draw from nonpositive weights");
    }
    double u = next_double() * total;
    double cum = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
      cum += weights[i];
      if (u < cum) return i;
    }
    return weights.size() - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// First `count` entries of a Fisher-Yates shuffle of 0..n-1
  /// (sampling without replacement).
  std::vector<Eigen::Index> sample_without_replacement(Eigen::Index n,
                                                       Eigen::Index count);

  /// `count` independent uniform draws from 0..n-1.
  std::vector<Eigen::Index> sample_with_replacement(Eigen::Index n,
                                                    Eigen::Index count);

 private:
  std::uint64_t key() const {
    std::uint64_t x = seed ^ (stream * 0xDA942042E4DD58B5ull + 0x2545F4914F6CDD1Dull);
    x = (x ^ (x >> 33)) * 0xFF51AFD7ED558CCDull;
    x = (x ^ (x >> 33)) * 0xC4CEB9FE1A85EC53ull;
    return x ^ (x >> 33);
  }
};

}  // namespace kdm

#pragma once

#include "vibrato/common.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace vibrato {

/// xoshiro256** by Blackman & Vigna, seeded with splitmix64. Chosen over
/// std::mt19937_64 so that the generated input signals are identical across
/// platforms and standard-library versions.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& si : s_) {
      // splitmix64
      x += 0x9e3779b97f4a7c15ull;
      std::uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      si = z ^ (z >> 31);
    }
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) using the top 53 bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform double in [-1, 1).
  double next_symmetric() { return 2.0 * next_double() - 1.0; }

 private:
  static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }
  std::uint64_t s_[4];
};

enum class SignalType { WhiteNoise, Sine, File };

struct SignalSpec {
  SignalType type = SignalType::WhiteNoise;
  std::uint64_t seed = 1;
  double amplitude = 1.0;   // Pa
  double frequency_hz = 2000.0;  // sine only
  std::string path;              // file only
};

/// Samples the incoming pressure p_in at t_n = n*dt for n = 0..nsteps.
/// White noise draws one value per sample in [-amplitude, amplitude).
inline Vector sample_signal(const SignalSpec& spec, int nsteps, double dt) {
  require(nsteps >= 1, "signal: nsteps must be >= 1");
  Vector p(nsteps + 1);
  switch (spec.type) {
    case SignalType::WhiteNoise: {
      Xoshiro256 rng(spec.seed);
      for (int n = 0; n <= nsteps; ++n) p[n] = spec.amplitude * rng.next_symmetric();
      break;
    }
    case SignalType::Sine: {
      const double w = 2.0 * M_PI * spec.frequency_hz;
      for (int n = 0; n <= nsteps; ++n) p[n] = spec.amplitude * std::sin(w * n * dt);
      break;
    }
    case SignalType::File: {
      std::ifstream in(spec.path);
      require(in.good(), "signal: cannot open " + spec.path);
      std::vector<double> samples;
      double v;
      while (in >> v) samples.push_back(v);
      require(static_cast<int>(samples.size()) >= nsteps + 1,
              "signal: file holds " + std::to_string(samples.size()) + " samples, need " +
                  std::to_string(nsteps + 1));
      for (int n = 0; n <= nsteps; ++n) p[n] = spec.amplitude * samples[n];
      break;
    }
  }
  return p;
}

/// d(p_in)/dt by second-order central differences, one-sided at both ends.
inline Vector time_derivative(const Vector& p, double dt) {
  const int m = static_cast<int>(p.size());
  require(m >= 2, "time_derivative: need at least 2 samples");
  Vector d(m);
  d[0] = (p[1] - p[0]) / dt;
  for (int n = 1; n + 1 < m; ++n) d[n] = (p[n + 1] - p[n - 1]) / (2.0 * dt);
  d[m - 1] = (p[m - 1] - p[m - 2]) / dt;
  return d;
}

}  // namespace vibrato

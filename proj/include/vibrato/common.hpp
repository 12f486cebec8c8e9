#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vibrato {

using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using ComplexSparseMatrix = Eigen::SparseMatrix<std::complex<double>>;
using Triplet = Eigen::Triplet<double>;

/// Throws std::runtime_error with a message when a runtime precondition fails.
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::runtime_error(msg);
}

/// Static partition of [0, n) over nthreads; f(begin, end) per chunk.
/// Chunk boundaries depend only on (n, nthreads), so any per-index output
/// written into preallocated slots is deterministic.
template <typename F>
void parallel_for_chunks(std::size_t n, int nthreads, F&& f) {
  if (nthreads <= 1 || n < 64) {
    f(std::size_t{0}, n);
    return;
  }
  const std::size_t nt = static_cast<std::size_t>(nthreads);
  std::vector<std::thread> workers;
  workers.reserve(nt);
  const std::size_t chunk = (n + nt - 1) / nt;
  for (std::size_t t = 0; t < nt; ++t) {
    const std::size_t b = t * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    workers.emplace_back([&f, b, e] { f(b, e); });
  }
  for (auto& w : workers) w.join();
}

/// FNV-1a 64-bit hash, used for config fingerprints and cache keys.
inline std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace vibrato

#pragma once

#include "vibrato/common.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <utility>
#include <vector>

namespace vibrato {

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

inline ComplexVector fftw_transform(const ComplexVector& in, int sign) {
  const int n = static_cast<int>(in.size());
  ComplexVector work = in;
  ComplexVector out(n);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(work.data()),
                            reinterpret_cast<fftw_complex*>(out.data()), sign,
                            FFTW_ESTIMATE | FFTW_PRESERVE_INPUT);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

}  // namespace detail

/// Forward DFT, X_m = sum_n x_n exp(-i 2 pi m n / N). No 1/N on the forward
/// transform.
inline ComplexVector dft(const ComplexVector& x) {
  return detail::fftw_transform(x, FFTW_FORWARD);
}

inline ComplexVector dft(const Vector& x) { return dft(ComplexVector(x.cast<std::complex<double>>())); }

/// Inverse DFT with the 1/N normalization; dft followed by idft is the
/// identity.
inline ComplexVector idft(const ComplexVector& X) {
  ComplexVector out = detail::fftw_transform(X, FFTW_BACKWARD);
  out /= static_cast<double>(X.size());
  return out;
}

/// Hann weights w_n = 0.5 (1 - cos(2 pi n / (N-1))), zero at both ends.
inline Vector hann_window(int n) {
  require(n >= 2, "hann_window: need at least 2 samples");
  Vector w(n);
  for (int k = 0; k < n; ++k) w[k] = 0.5 * (1.0 - std::cos(2.0 * M_PI * k / (n - 1)));
  return w;
}

/// Windowed spectrum of a real trace: DFT(hann .* trace).
inline ComplexVector windowed_spectrum(const Vector& trace) {
  const Vector w = hann_window(static_cast<int>(trace.size()));
  return dft(Vector(w.cwiseProduct(trace)));
}

/// Inclusive bin range [lo, hi].
struct BinRange {
  int lo = 0;
  int hi = -1;
  bool contains(int m) const { return m >= lo && m <= hi; }
  int count() const { return hi - lo + 1; }
};

/// Per-bin transmission magnitude ratio |p(f)| / |p0(f)|.
inline Vector transmission(const ComplexVector& design, const ComplexVector& baseline) {
  require(design.size() == baseline.size(), "transmission: spectra length mismatch");
  Vector S(design.size());
  for (Eigen::Index m = 0; m < design.size(); ++m) {
    const double den = std::max(std::abs(baseline[m]), 1e-300);
    S[m] = std::abs(design[m]) / den;
  }
  return S;
}

/// The excitation must put energy into every active bin; a near-silent
/// baseline bin makes the ratio meaningless.
inline void check_baseline_strength(const ComplexVector& baseline,
                                    const std::vector<BinRange>& active) {
  double peak = 0.0;
  for (Eigen::Index m = 0; m < baseline.size(); ++m)
    peak = std::max(peak, std::abs(baseline[m]));
  for (const auto& band : active)
    for (int m = band.lo; m <= band.hi; ++m)
      require(std::abs(baseline[m]) >= 1e-3 * peak,
              "baseline spectrum too weak at bin " + std::to_string(m) +
                  "; excitation does not cover the active band");
}

/// Phi = sum over band bins of (S - tau)^2 / tau^2.
inline double constraint_value(const Vector& S, const std::vector<BinRange>& bands,
                               double tau) {
  require(tau > 0.0, "constraint: target must be positive");
  double phi = 0.0;
  for (const auto& band : bands) {
    require(band.lo >= 0 && band.hi < S.size() && band.lo <= band.hi,
            "constraint: band outside spectrum");
    for (int m = band.lo; m <= band.hi; ++m) {
      const double d = (S[m] - tau) / tau;
      phi += d * d;
    }
  }
  return phi;
}

/// Gradient of Phi with respect to the raw (unwindowed) trace samples.
///
/// Per active bin, d Phi / d spec_m treated through real and imaginary parts
/// gives the complex weight D_m = 2 (S_m - tau) / (tau^2 |spec_m| |base_m|)
/// * spec_m; mapping back to the time axis multiplies by the conjugate-
/// transposed DFT, i.e. an unnormalized inverse-kernel sum Re sum_m D_m
/// exp(+i 2 pi m n / N), and the window weights chain through last.
inline Vector constraint_seed(const Vector& S, const ComplexVector& design,
                              const ComplexVector& baseline,
                              const std::vector<BinRange>& bands, double tau) {
  const int n = static_cast<int>(design.size());
  ComplexVector D = ComplexVector::Zero(n);
  for (const auto& band : bands)
    for (int m = band.lo; m <= band.hi; ++m) {
      const double mag = std::abs(design[m]);
      const double base = std::max(std::abs(baseline[m]), 1e-300);
      const double c = 2.0 * (S[m] - tau) / (tau * tau * (mag + 1e-30) * base);
      D[m] = c * design[m];
    }
  const ComplexVector back = detail::fftw_transform(D, FFTW_BACKWARD);
  const Vector w = hann_window(n);
  Vector seed(n);
  for (int k = 0; k < n; ++k) seed[k] = w[k] * back[k].real();
  return seed;
}

/// Sound pressure level re 20 uPa; reporting only.
inline double spl_db(double pressure_magnitude) {
  return 20.0 * std::log10(std::max(pressure_magnitude, 1e-300) / 20e-6);
}

}  // namespace vibrato

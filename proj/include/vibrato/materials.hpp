#pragma once

#include <cmath>

namespace vibrato {

/// Physical parameters of the coupled system. Tilde quantities of the paper
/// are the plain members here; the contrast alpha_void extends each physics
/// into the other's region (void structure, rigid acoustics).
struct MaterialParams {
  double E_s = 50e6;      // Pa
  double nu = 0.4;
  double rho_s = 1000.0;  // kg/m^3
  double c_a = 343.0;     // m/s
  double rho_a = 1.21;    // kg/m^3
  double alpha_void = 1e-8;
  double zeta = 0.1;            // Rayleigh damping ratio
  double omega1 = 2.0 * M_PI * 1600.0;  // rad/s
  double omega2 = 2.0 * M_PI * 2200.0;  // rad/s

  double bulk_modulus() const { return rho_a * c_a * c_a; }
  double alpha_d() const { return 2.0 * zeta * omega1 * omega2 / (omega1 + omega2); }
  double beta_d() const { return 2.0 * zeta / (omega1 + omega2); }
};

}  // namespace vibrato

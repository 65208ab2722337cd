#pragma once

namespace cylflow::calib {

// Constants measured once on the seeded corpora in the test suites (the
// sweep cases print the measured peaks) and frozen with ~25% headroom.
// Placeholders are generous; tightened after calibration runs.

inline constexpr double pointwise_N_C = 10.0;  // |N| <= C (1+|y|) |jet|^2 at nodes
inline constexpr double projected_N_c = 10.0;  // ||P N|| <= c ||xi||_s^2
inline constexpr double lipschitz_N_C = 10.0;  // Lipschitz modulus of N on the delta1 ball
inline constexpr double phi_quadratic_C = 10.0; // ||Phi(eta)||_s <= C ||eta||_s^2
inline constexpr double phi_lipschitz_C = 10.0; // Lipschitz modulus of Phi
inline constexpr double sigma_drift_C = 10.0;  // |sigma(tau) - sigma(0)| <= C delta <tau>^{-1}
inline constexpr double beta_decay_C = 10.0;   // |beta_i(tau)| <= C delta^2 <tau>^{-3}

} // namespace cylflow::calib

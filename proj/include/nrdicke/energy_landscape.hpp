/// @file energy_landscape.hpp
/// @brief Ground-state analysis in the reciprocal limit: minimization of the
///        spin-only effective energy, degeneracy counting, and the resulting
///        phase label at zero cavity loss.

#pragma once

#include <array>
#include <vector>

#include "nrdicke/model.hpp"
#include "nrdicke/stationary.hpp"

namespace nrdicke {

// ============================================================================
// Derivatives of the effective energy (energy_eff lives in model.hpp)
// ============================================================================

/// Analytic gradient of energy_eff.
std::array<double, 3> energy_gradient(const std::array<double, 3>& sx,
                                      const ModelParams& p);

/// Analytic Hessian of energy_eff, row-major.
std::array<std::array<double, 3>, 3> energy_hessian(
    const std::array<double, 3>& sx, const ModelParams& p);

// ============================================================================
// Minimization
// ============================================================================

struct GroundConfig {
  std::array<double, 3> sx{};    ///< minimizer components, each in (-1, 1)
  double energy{0.0};            ///< energy_eff at sx
  bool hessian_positive{false};  ///< strict positive definiteness
};

struct LandscapeOptions {
  double grad_tol{1e-10};   ///< max-norm gradient bound at convergence
  double e_tol{1e-9};       ///< degeneracy window in units of Omega
  double dedup_tol{1e-8};   ///< minimizer identification distance
  int max_iter{200};        ///< damped Newton iteration cap per seed
};

/// All distinct local minima of the effective energy, found by damped Newton
/// refinement from sign-pattern seeds at |s_x| in {0.3, 0.7, 0.95} plus the
/// origin, closed under the global spin flip, and sorted by energy.
std::vector<GroundConfig> minimize_energy(const ModelParams& p,
                                          const LandscapeOptions& opts = {});

/// The subset of `minima` within `e_tol * Omega` of the least energy.
std::vector<GroundConfig> global_minima(const std::vector<GroundConfig>& minima,
                                        const ModelParams& p,
                                        double e_tol = 1e-9);

/// Phase label from the global-minimum count {1, 2, 4, 6}; other counts map
/// to the nearest lower label and set the flag, as in the root census.
PhaseLabel ground_phase(double phi, double lambda, const ModelParams& base,
                        const LandscapeOptions& opts = {});

/// Positive minimizer of the single-spin energy
///   f(s) = -(Omega/2) sqrt(1 - s^2) - (lambda^2 / 4 omega_c) s^2
/// by golden-section search to 1e-12, or 0 at couplings up to the
/// single- to double-well threshold sqrt(Omega * omega_c).
double local_spin_minimum(double lambda, const ModelParams& p);

}  // namespace nrdicke

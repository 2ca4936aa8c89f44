/// @file compensate.hpp
/// @brief Species-dependent couplings of the spinor-BEC realization and the
///        population / frequency compensation that restores the homogeneous
///        steady-state diagram.

#pragma once

#include <string>

#include "nrdicke/dynamics.hpp"
#include "nrdicke/integrate.hpp"
#include "nrdicke/model.hpp"

namespace nrdicke {

// ============================================================================
// Compensation plan
// ============================================================================

/// Ratios that trade species-dependent couplings for population imbalance.
/// With populations N_0 / N_(+-1) = sqrt(1 + tan^2 phi), the renormalized
/// coupling lambda_m sqrt(N_m / N_(+-1)) becomes species independent; tuning
/// the middle spin frequency so that Omega_m N_m is also species independent
/// then restores the homogeneous stationary states in normalized spins.
struct CompensationPlan {
  double phi{0.0};             ///< interaction phase the plan is built for
  double pop_ratio{1.0};       ///< N_0 / N_(+-1)
  double coupling_ratio{1.0};  ///< lambda_(+-1) / lambda_0
  double freq_ratio{1.0};      ///< Omega_0 / Omega_(+-1)
  double lambda_renorm{0.0};   ///< uniform renormalized coupling Lambda
};

/// Builds the plan for the given phase and renormalized coupling.  With
/// `compensate_freq` the middle spin frequency is lowered by the population
/// ratio so that Omega_m N_m is constant; otherwise every species keeps the
/// base frequency.  Throws std::domain_error at phi = pi/2, where the
/// population ratio diverges, and std::invalid_argument for phi outside
/// [0, pi] or Lambda <= 0.
CompensationPlan make_plan(double phi, double Lambda, bool compensate_freq);

/// Installs the plan's per-species couplings, weights, and frequencies on a
/// copy of `base`, keeping its cavity parameters, spin damping, and outer
/// spin frequency.  The result satisfies lam_m sqrt(weight_m) =
/// lambda_renorm for every species to 1e-12.
ModelParams params_from_plan(const CompensationPlan& plan,
                             const ModelParams& base);

// ============================================================================
// Orbit distortion
// ============================================================================

/// How far a swap orbit departs from a regular polygon: each distinct vertex
/// gets the mean cavity amplitude |a| over the samples dwelling there, and
/// the metric is the largest absolute deviation of those radii from their
/// mean, divided by that mean.  Zero for a perfectly regular orbit.  Throws
/// std::invalid_argument when the dwell record is empty or the radii all
/// vanish.
double vertex_radius_distortion(const Trajectory& traj,
                                const DwellRecord& dwell);

// ============================================================================
// Serialization
// ============================================================================

std::string plan_to_json(const CompensationPlan& plan);

/// Parses and validates a plan.  Throws std::invalid_argument on malformed
/// JSON, missing fields, or ratios inconsistent with the stored phase.
CompensationPlan plan_from_json(const std::string& text);

}  // namespace nrdicke

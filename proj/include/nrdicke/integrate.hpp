/// @file integrate.hpp
/// @brief Adaptive time integration of the cavity-spin equations of motion.
///
/// The stepper is an embedded Dormand-Prince 5(4) pair with a fourth-order
/// continuous extension; output samples are produced by dense interpolation
/// on the accepted steps, so the sampling grid never constrains the step
/// size.  Spins are NOT renormalized during integration: the distance of the
/// spin block from the unit spheres is a free accuracy diagnostic.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "nrdicke/model.hpp"

namespace nrdicke {

/// Which degrees of freedom are propagated.
///   Full:      spins + cavity (resolves the fast cavity scale).
///   Adiabatic: spins only, cavity slaved to cavity_adiabatic.
enum class CavityMode { Full, Adiabatic };

struct IntegratorConfig {
  double rel_tol{1e-9};
  double abs_tol{1e-12};
  double max_step{1.0};
  double init_step{0.0};   ///< 0 selects the step automatically
  double min_step{1e-12};  ///< steps below this abort the run
};

struct Trajectory {
  std::vector<double> t;
  std::vector<SystemState> states;  ///< cavity filled in both modes
  ModelParams params;
  CavityMode mode{CavityMode::Adiabatic};
  double sample_dt{0.0};

  [[nodiscard]] std::size_t size() const { return t.size(); }
};

struct IntegrationResult {
  Trajectory traj;
  bool ok{true};
  double fail_time{0.0};  ///< last good time when !ok
  std::string message;
  std::size_t n_steps{0};
  std::size_t n_rejected{0};
};

/// Integrates from t = 0 to t_end, sampling at k * sample_dt.
/// On step underflow or non-finite state the result carries ok = false, the
/// failure time, and the samples produced so far.
IntegrationResult integrate(const SystemState& init, const ModelParams& p,
                            CavityMode mode, double t_end, double sample_dt,
                            const IntegratorConfig& cfg = {});

/// Deterministic pseudo-random kick: each spin is displaced along a random
/// tangent direction by `magnitude` and renormalized to its sphere; the
/// cavity amplitude gains `magnitude` at a random phase.  magnitude = 0
/// returns the input unchanged.
SystemState perturb(const SystemState& s, double magnitude, std::uint64_t seed);

/// CSV export, one row per sample:
///   t,sx_-1,sy_-1,sz_-1,sx_0,sy_0,sz_0,sx_1,sy_1,sz_1,a_re,a_im
/// `header_lines` are emitted first, each prefixed with "# ".
void write_csv(const Trajectory& traj, std::ostream& os,
               const std::vector<std::string>& header_lines = {});

}  // namespace nrdicke

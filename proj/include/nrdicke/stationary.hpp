/// @file stationary.hpp
/// @brief Stationary states of the adiabatic spin flow: damped Newton search,
///        deterministic multi-seed census, and phase labeling.
///
/// Roots are found in the 6-dimensional reduced chart (s_z eliminated through
/// the sphere constraint, lower sheet by default).  The census deduplicates
/// to symmetry-distinct representatives plus their parity partners, so the
/// returned set is closed under the spin-flip symmetry.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nrdicke/model.hpp"

namespace nrdicke {

struct FixedPoint {
  SystemState state;      ///< cavity slot holds the adiabatic amplitude
  double residual{0.0};   ///< max-norm of the adiabatic spin derivative

  // Filled by annotate_stability (stability module).
  bool has_stability{false};
  bool stable{false};    ///< max_re < -stab_tol
  bool marginal{false};  ///< |max_re| <= stab_tol
  double max_re{0.0};
  std::array<std::complex<double>, 6> eigenvalues{};

  /// Not driven away by the linearization: stable or marginal.  This is the
  /// notion of stability used for phase labels; at gamma = 0 every attractor
  /// of the damped system appears as a marginal center.
  [[nodiscard]] bool attracting() const { return stable || marginal; }
};

/// True when the transverse spin components vanish (the trivial state).
bool is_trivial(const FixedPoint& fp, double tol = 1e-8);

struct NewtonOptions {
  double tol{1e-11};       ///< max-norm convergence threshold on the rhs
  int max_iter{200};
  double min_damp{1e-4};   ///< smallest line-search fraction before failure
  /// If positive, a stalled iterate whose residual is already below this is
  /// accepted instead of failing.  Lets continuation demand machine-precision
  /// roots (tiny tol) without losing track when rounding stops progress.
  double stall_accept{0.0};
};

/// Damped Newton iteration from a chart seed.  Returns the converged root or
/// nullopt (singular Jacobian, stalled line search, or iteration budget).
/// Damped Newton on the product of spin spheres (tangent-space steps with
/// per-spin renormalization, Levenberg fallback near singular Jacobians).
/// Works at any point of the spheres, equators included.  Returns the root
/// with the slaved cavity amplitude filled in, or nullopt when the iteration
/// stalls.
std::optional<FixedPoint> newton_fixed_point(const SystemState& seed,
                                             const ModelParams& p,
                                             const NewtonOptions& opts = {});
std::optional<FixedPoint> newton_fixed_point(const ReducedChart& seed,
                                             const ModelParams& p,
                                             const NewtonOptions& opts = {});

struct CensusOptions {
  std::array<double, 2> seed_amplitudes{0.5, 0.9};
  int n_random{128};
  std::uint64_t seed{0xa5eedULL};
  double dedup_tol{1e-6};
  NewtonOptions newton{};
};

/// Multi-seed root census: the trivial seed, all eight sign patterns of s_x
/// at each seed amplitude, and n_random deterministic points drawn uniformly
/// on the product of spin spheres.  Deduplicated by max-norm distance and
/// closed under parity; sorted deterministically.  Stability fields are NOT
/// filled here.
std::vector<FixedPoint> find_all_stationary(const ModelParams& p,
                                            const CensusOptions& opts = {});

enum class PhaseTag { NP, SOP, pFSOP, FSOP, DP };

struct PhaseLabel {
  PhaseTag tag{PhaseTag::NP};
  int degeneracy{1};         ///< canonical count: 1, 2, 4, 6, or 0 for DP
  int raw_stable_count{0};   ///< attracting nontrivial roots actually seen
  bool flagged{false};       ///< raw count outside {0, 2, 4, 6}
};

std::string to_string(PhaseTag tag);

/// Labels a parameter point from its stability-annotated census:
/// no attracting root -> DP; only the trivial root attracting -> NP;
/// otherwise by the count of attracting nontrivial roots (2/4/6).
/// Other counts are mapped to the nearest lower label and flagged.
PhaseLabel classify_phase(const std::vector<FixedPoint>& annotated_roots,
                          const ModelParams& p);

/// One JSON object per root:
///   {"sx":[...],"sy":[...],"sz":[...],"cavity":[re,im],
///    "residual":...,"stable":...}
void write_jsonl(const std::vector<FixedPoint>& roots, std::ostream& os);

}  // namespace nrdicke

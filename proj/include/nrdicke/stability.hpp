/// @file stability.hpp
/// @brief Linear stability of stationary states: dynamical matrices, the
///        closed-form trivial-state spectrum, instability boundaries, and
///        exceptional-point detection along parameter paths.
///
/// The dynamical matrix acts on chart deviations ordered as
/// (ds_x,+1, ds_x,0, ds_x,-1, ds_y,+1, ds_y,0, ds_y,-1): species descending,
/// x block before y block.

#pragma once

#include <array>
#include <complex>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nrdicke/model.hpp"
#include "nrdicke/stationary.hpp"

namespace nrdicke {

struct SpectralDefaults {
  double stab_tol{1e-8};     ///< dead band around Re = 0
  double ep_tol{1e-4};       ///< eigenvalue-coalescence distance (units of Omega)
  double cond_thresh{1e6};   ///< eigenvector condition number at an EP
};

/// Analytic dynamical matrix of the trivial state (homogeneous parameters):
///   M = [[-gamma I, -Omega I], [Omega I + B, -gamma I]],
///   B_mm' = -lambda^2 / (omega_c^2 + kappa^2) d((m - m') phi).
Mat6 dyn_matrix_np(const ModelParams& p);

/// Dynamical matrix at an arbitrary root (numeric route, any weights).
Mat6 dyn_matrix_at(const FixedPoint& fp, const ModelParams& p);

/// Closed-form trivial-state eigenvalues: the pair -gamma +- i Omega from the
/// coupling kernel, and the quartet
///   -gamma +- i sqrt(Omega^2 - lambda^2 Omega (3 omega_c +- sqrt(P))
///                                  / (2 (omega_c^2 + kappa^2)))
/// with principal complex branches when P < 0.
std::array<std::complex<double>, 6> mu_nu_np_analytic(const ModelParams& p);

/// Branch discriminant
///   P(phi) = omega_c^2 (2 cos 2phi + 1)^2 - 8 kappa^2 sin^2(phi) (cos 2phi + 2).
/// P < 0 marks the coupling-phase band where the trivial state is unstable at
/// every coupling strength (gamma = 0).
double p_function(double phi, const ModelParams& p);

/// Zeros of P in (0, pi), sorted ascending:
///   phi_c = arccos( +- 1/2 sqrt(1 +- 3 kappa / sqrt(kappa^2 + omega_c^2)) ).
/// Four angles when kappa / omega_c < 1 / (2 sqrt(2)), two otherwise; empty
/// at kappa = 0 where P only touches zero.
std::vector<double> phi_c(const ModelParams& p);

/// Critical coupling of the trivial state at gamma = 0, in the rationalized
/// form lambda_c = sqrt(2 Omega (omega_c^2 + kappa^2) / (3 omega_c + sqrt(P)))
/// which carries the removable limits at phi = 0 and pi.  nullopt when P < 0.
std::optional<double> lambda_c(double phi, const ModelParams& p);

struct StabilityReport {
  std::array<std::complex<double>, 6> eigenvalues{};  ///< sorted by (Re, Im)
  double max_re{0.0};
  bool stable{false};
  bool marginal{false};
  double min_gap{0.0};      ///< smallest pairwise eigenvalue distance
  double eigvec_cond{0.0};  ///< condition number of the eigenvector matrix
  bool ep_flag{false};      ///< min_gap < ep_tol and eigvec_cond > cond_thresh
};

StabilityReport stability_report(const Mat6& M,
                                 const SpectralDefaults& defs = {});

/// Fills the stability fields of each census root in place.
void annotate_stability(std::vector<FixedPoint>& roots, const ModelParams& p,
                        const SpectralDefaults& defs = {});

// ============================================================================
// Parameter paths
// ============================================================================

enum class SweepAxis { Phi, Lambda };

/// Copy of `base` with the axis value replaced; on the Lambda axis all
/// per-species couplings are scaled together, preserving their ratios.
ModelParams with_axis(const ModelParams& base, SweepAxis axis, double value);

struct EpPoint {
  double param{0.0};                    ///< refined location on the path
  double min_gap{0.0};
  double eigvec_cond{0.0};
  std::complex<double> value{0.0, 0.0}; ///< coalescing eigenvalue
  double max_re{0.0};                   ///< spectrum max Re at the EP
};

struct EpScanResult {
  std::vector<EpPoint> eps;
  std::optional<double> lost_track_at;  ///< root tracking broke here
};

struct EpScanConfig {
  SpectralDefaults defs{};
  double param_resolution{1e-6};
};

/// Exceptional points of the trivial branch along a parameter path.
/// Candidates are sign changes of (imaginary splitting - real splitting) of
/// the closest eigenvalue pair, refined by bisection and confirmed by the
/// coalescence-distance and eigenvector-degeneracy thresholds; plain level
/// crossings produce no sign change and are ignored.
EpScanResult detect_ep_np(SweepAxis axis, double lo, double hi, int n,
                          const ModelParams& base,
                          const EpScanConfig& cfg = {});

/// Same scan along a continuously tracked nontrivial root starting from
/// `start_root` at the `lo` end of the path.  If Newton tracking fails, the
/// scan stops and reports the break position.
EpScanResult detect_ep_tracked(SweepAxis axis, double lo, double hi, int n,
                               const ModelParams& base,
                               const SystemState& start_root,
                               const EpScanConfig& cfg = {});

// ============================================================================
// Spectrum flows
// ============================================================================

struct SpectrumFlow {
  SweepAxis axis{SweepAxis::Phi};
  std::vector<double> param;
  std::vector<std::array<std::complex<double>, 6>> eigenvalues;
  std::optional<double> lost_track_at;
};

/// Eigenvalue flow of the trivial branch; columns are continuity-matched
/// between consecutive path points (best of all pairings).
SpectrumFlow spectrum_flow_np(SweepAxis axis, double lo, double hi, int n,
                              const ModelParams& base);

SpectrumFlow spectrum_flow_tracked(SweepAxis axis, double lo, double hi, int n,
                                   const ModelParams& base,
                                   const SystemState& start_root);

/// CSV rows: param,re_1,...,re_6,im_1,...,im_6
void write_spectrum_csv(const SpectrumFlow& flow, std::ostream& os,
                        const std::vector<std::string>& header_lines = {});

}  // namespace nrdicke

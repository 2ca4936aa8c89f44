/// @file dynamics.hpp
/// @brief Long-time attractor analysis: phase extraction, Fourier spectra,
///        dwell segmentation on frustrated vertices, Lyapunov exponents, and
///        the critical scaling of the emergent swap frequency.

#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "nrdicke/integrate.hpp"
#include "nrdicke/model.hpp"
#include "nrdicke/stability.hpp"
#include "nrdicke/stationary.hpp"

namespace nrdicke {

// ============================================================================
// Trajectory windows and phase angles
// ============================================================================

/// Suffix window of a trajectory: drops the leading `fraction` of the samples
/// (default transient handling).  Requires 0 <= fraction < 1 and at least 64
/// samples remaining; throws std::invalid_argument otherwise.
Trajectory trim_transient(const Trajectory& traj, double fraction = 0.5);

/// Per-species unwrapped azimuthal angles theta_m(t) = atan2(s_y, s_x),
/// continuous across samples.  Throws std::domain_error naming the first time
/// at which the transverse magnitude |s_x| + |s_y| drops below 1e-6.
std::array<std::vector<double>, 3> phase_angles(const Trajectory& traj);

// ============================================================================
// Fourier spectra
// ============================================================================

struct SpectrumPeak {
  double freq{0.0};
  double power{0.0};
};

struct SpectrumOptions {
  double peak_snr{25.0};    ///< broadband floor = median power * peak_snr
  double floor_rel{1e-3};   ///< line floor = strongest bin * floor_rel
};

struct SpectrumReport {
  double resolution{0.0};           ///< frequency bin width 2*pi / T_window
  std::vector<double> freqs;        ///< angular frequencies, uniform grid
  std::vector<double> power;        ///< Hann-windowed periodogram
  std::vector<SpectrumPeak> peaks;  ///< floor-passing local maxima, ascending
  std::optional<double> omega0;     ///< emergent fundamental, if identified
  double odd_harmonic_score{0.0};   ///< fraction of peaks on (2k+1) * omega0
};

/// Windowed periodogram of a uniformly sampled series (at least 1024 samples;
/// throws std::invalid_argument otherwise).  Peaks are local maxima above the
/// noise floor with parabolically refined frequencies; the floor combines a
/// broadband median estimate with a fraction of the strongest line, so quiet
/// combs are not flooded by window sidelobes.  omega0 is the lowest peak
/// whose odd integer multiples account for at least 80% of the other peaks,
/// with a per-multiple allowance for sub-bin error in the fundamental; a
/// constant series yields no peaks and no omega0.
SpectrumReport fourier_spectrum(const std::vector<double>& series, double dt,
                                const SpectrumOptions& opt = {});

/// CSV export, one "freq,power" row per bin after a "freq,power" header.
void write_spectrum_csv(const SpectrumReport& rep, std::ostream& os);

// ============================================================================
// Dwell segmentation
// ============================================================================

enum class Chirality { CCW, CW, Mixed };

struct DwellVisit {
  int vertex{0};      ///< index into the supplied vertex list
  double entry{0.0};  ///< first time inside the membership radius
  double exit{0.0};   ///< next time outside it
};

struct DwellRecord {
  std::vector<DwellVisit> visits;  ///< consecutive vertices distinct
  Chirality chirality{Chirality::Mixed};
};

/// Segments the smoothed collective-plane track (x_d1, x_d2) into visits to
/// the given vertex anchors.  Membership radius is `membership_fraction` of
/// the minimum inter-vertex distance, with hysteresis: the track must leave
/// the radius before a new entry counts, and re-entries to the same vertex
/// merge into one visit.  A moving average over `smooth_window` time units
/// removes the fast precession before proximity testing.
DwellRecord dwell_segments(const Trajectory& traj,
                           const std::vector<std::array<double, 2>>& vertices,
                           double smooth_window = 63.0,
                           double membership_fraction = 0.25);

// ============================================================================
// Lyapunov exponent
// ============================================================================

struct LyapunovConfig {
  double horizon{2000.0};         ///< total measured time, at least 2000/Omega
  double renorm_interval{1.0};    ///< separation reset period (1/Omega)
  double offset{1e-8};            ///< renormalized separation
  int n_segments{40};             ///< averaging blocks for the standard error
  double skip_fraction{0.05};     ///< leading intervals dropped (alignment)
  /// Integration accuracy inside the estimator.  The defaults are much
  /// tighter than the trajectory defaults: local error at the trajectory
  /// tolerances is comparable to the 1e-8 offset and biases limit-cycle
  /// exponents upward.
  IntegratorConfig integ{1e-12, 1e-14};
};

struct LyapunovEstimate {
  double value{0.0};      ///< mean log-growth rate per unit time
  double std_error{0.0};  ///< standard error over segments
};

/// Largest Lyapunov exponent by two-trajectory separation with periodic
/// renormalization, started from `state0` (callers settle onto the attractor
/// first).  Throws std::invalid_argument if the horizon is below 2000/Omega
/// and std::runtime_error if integration fails.
LyapunovEstimate lyapunov_max(const SystemState& state0, const ModelParams& p,
                              const LyapunovConfig& cfg = {});

// ============================================================================
// Attractor classification
// ============================================================================

enum class AttractorKind { Stationary, Chiral, Swap, Chaotic, Unresolved };

const char* to_string(AttractorKind kind);
const char* to_string(Chirality c);

struct StationaryMetrics {
  double residual{0.0};      ///< stationarity residual of the final state
  double displacement{0.0};  ///< max distance to the final state, last 10%
};

struct ChiralMetrics {
  std::array<double, 3> rates{};  ///< mean phase velocities, species ascending
  double rate_spread{0.0};        ///< relative spread of the three rates
  double rate_cv{0.0};            ///< worst per-species subwindow rate scatter
  double lock_residual{0.0};      ///< worst pair |circular mean - 2*pi/3|
  double radius_mean{0.0};        ///< collective-plane orbit radius
  double radius_cv{0.0};          ///< its coefficient of variation
  Chirality chirality{Chirality::CCW};
};

struct SwapMetrics {
  DwellRecord dwell;
  int n_vertices{0};             ///< distinct vertices visited
  double cycle_period_mean{0.0};  ///< same-vertex return time
  double cycle_period_cv{0.0};
  std::optional<double> omega0;  ///< winding rate of the smoothed track
};

struct AttractorVerdict {
  AttractorKind kind{AttractorKind::Unresolved};
  std::optional<StationaryMetrics> stationary;
  std::optional<ChiralMetrics> chiral;
  std::optional<SwapMetrics> swap;
  std::optional<LyapunovEstimate> lyapunov;
};

struct ClassifyConfig {
  /// Stage 1: end-state flow-magnitude bound.  Relaxed enough that the
  /// integrator's accuracy plateau around a genuine sink passes, yet orders
  /// of magnitude below any sustained motion in this model.
  double stationary_residual{1e-6};
  double stationary_drift{1e-6};      ///< stage 1: last-10% displacement bound
  double rate_spread_max{0.01};       ///< stage 2: phase-velocity spread
  double rate_cv_max{0.02};           ///< stage 2: subwindow rate scatter;
                                      ///< rejects symmetric phase diffusion
                                      ///< whose long-run rates agree
  int rate_subwindows{8};             ///< stage 2: scatter estimate blocks
  double lock_residual_max{0.05};     ///< stage 2: relative-phase lock, rad
  double min_turns{1.0};              ///< stage 2: rotation floor, full turns
  double smooth_window{63.0};         ///< stage 3: dwell smoothing, time units
  double membership_fraction{0.25};   ///< stage 3: vertex radius fraction
  double cycle_cv_max{0.05};          ///< stage 3: per-cycle period stability
  double lyap_thresh{1e-3};           ///< stage 4: threshold in units of Omega
  LyapunovConfig lyap{};              ///< stage 4: estimator settings
};

/// Decision cascade over a trimmed trajectory: Stationary, then Chiral (phase
/// metrics), then Swap (cyclic dwell on the attracting vertices of `fps`),
/// then Chaotic (Lyapunov), else Unresolved.  `fps` supplies the vertex
/// anchors; pass the census of an adjacent parameter point when the orbit
/// circulates between roots that have just lost stability.  Later-stage
/// metrics that were computed on the way to the verdict are retained.
AttractorVerdict classify_attractor(const Trajectory& traj,
                                    const std::vector<FixedPoint>& fps,
                                    const ModelParams& p,
                                    const ClassifyConfig& cfg = {});

/// JSON export: kind plus whichever metric records the cascade filled.
void write_verdict_json(const AttractorVerdict& v, std::ostream& os);

// ============================================================================
// Symmetry restoration
// ============================================================================

struct RestorationReport {
  std::array<std::array<double, 2>, 3> spin_mean{};  ///< averaged (s_x, s_y)
  std::array<double, 2> cavity_mean{};               ///< averaged cavity field
  double orbit_scale{0.0};         ///< max cavity magnitude over the window
  bool period_detected{false};     ///< averages cover whole periods
  double period{0.0};              ///< detected orbit period, if any
};

/// Time averages of the transverse spin components and the cavity field over
/// an integer number of orbit periods (detected from the cavity winding rate;
/// at least three periods must fit, otherwise the full window is averaged and
/// flagged).  On a symmetry-restoring orbit the averages collapse toward the
/// origin; orbit_scale supplies the comparison magnitude.
RestorationReport symmetry_restoration(const Trajectory& traj,
                                       const ModelParams& p);

// ============================================================================
// Critical scaling of the emergent frequency
// ============================================================================

struct PowerLawFit {
  double beta{0.0};          ///< exponent of y = A * x^beta
  double amplitude{0.0};     ///< prefactor A
  double rms_residual{0.0};  ///< log-log fit residual
};

/// Least-squares power-law fit in log-log coordinates.  Requires equal-sized
/// inputs with at least two strictly positive points.
PowerLawFit fit_power_law(const std::vector<double>& x,
                          const std::vector<double>& y);

struct ScalingPoint {
  double lambda{0.0};
  std::optional<double> omega0;  ///< none when the winding was unresolved
};

struct ScalingResult {
  double lambda_star{0.0};            ///< branch-end coupling from the EP scan
  double beta{0.0};
  double amplitude{0.0};
  std::vector<ScalingPoint> points;   ///< fit inputs, one per requested lambda
};

struct ScalingConfig {
  double anchor_lambda{54.0};   ///< census anchor above the branch end
  double ep_scan_margin{0.5};   ///< EP scan reaches below the smallest lambda
  int ep_scan_points{101};
  double settle_first{20000.0};  ///< transient before the first point
  double settle{6000.0};         ///< transient after each continuation step
  double window{20000.0};        ///< measurement window per point
  double sample_dt{0.1};
  double smooth_window{63.0};
  double min_turns{3.0};         ///< winding resolvability floor
  double kick{0.05};             ///< initial deviation from the trivial state
  unsigned seed{11};
  /// Tracked EP scan settings; the eigenvector-condition threshold is lowered
  /// because parameter quantization caps the attainable condition number near
  /// the branch-end coalescence.
  EpScanConfig ep{SpectralDefaults{1e-8, 1e-4, 1e5}, 1e-6};
};

/// omega0 along a list of couplings approaching the branch end at fixed phi:
/// integrates the swap attractor by sequential continuation, measures the
/// winding rate per point, locates lambda_star with the tracked
/// exceptional-point scan from the anchor census, and fits
/// omega0 = A * |lambda - lambda_star|^beta.  Points with unresolved winding
/// are excluded; fewer than four resolved points is an error
/// (std::runtime_error), as is a failed EP scan.
ScalingResult omega0_scaling(double phi, const std::vector<double>& lambdas,
                             const ModelParams& base,
                             const ScalingConfig& cfg = {});

}  // namespace nrdicke

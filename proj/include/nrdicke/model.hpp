/// @file model.hpp
/// @brief Core types and equations of motion for three spin species coupled to
///        a lossy cavity mode with species-dependent coupling phases.
///
/// Spin species are labeled m in {-1, 0, +1}.  All per-species arrays use the
/// ascending storage order (m = -1, 0, +1); helpers species_m / species_slot
/// convert between labels and slots.  Spins are normalized classical vectors
/// (|s| = 1), the cavity amplitude is normalized as a = alpha / sqrt(N).
///
/// Two right-hand sides are provided:
///   - rhs_full:      spins + cavity (11 real components),
///   - rhs_adiabatic: spins only, with the cavity slaved to its stationary
///                    value cavity_adiabatic(s_x).
/// The adiabatic spin block agrees with the full spin block evaluated at the
/// slaved cavity amplitude by construction.

#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <numbers>

#include <Eigen/Dense>

namespace nrdicke {

inline constexpr double pi = std::numbers::pi_v<double>;
inline constexpr int n_species = 3;

/// Species label (-1, 0, +1) of a storage slot (0, 1, 2).
constexpr int species_m(int slot) { return slot - 1; }
/// Storage slot (0, 1, 2) of a species label (-1, 0, +1).
constexpr int species_slot(int m) { return m + 1; }

// ============================================================================
// Parameters
// ============================================================================

/// Model parameters.  Homogeneous runs keep lam/omega/weight identical across
/// species; population-imbalanced runs set weight_m = N_m / N_ref together
/// with per-species couplings and frequencies.
struct ModelParams {
  double omega_c{500.0};  ///< cavity frequency
  double kappa{150.0};    ///< cavity decay rate
  double gamma{0.05};     ///< spin damping rate
  double phi{0.0};        ///< coupling phase step between neighboring species

  std::array<double, 3> lam{0.0, 0.0, 0.0};     ///< coupling strengths
  std::array<double, 3> omega{1.0, 1.0, 1.0};   ///< spin frequencies
  std::array<double, 3> weight{1.0, 1.0, 1.0};  ///< population fractions

  [[nodiscard]] bool homogeneous(double tol = 1e-12) const;
  /// Common coupling strength; throws std::logic_error unless homogeneous.
  [[nodiscard]] double lambda_h() const;
  /// Common spin frequency; throws std::logic_error unless homogeneous.
  [[nodiscard]] double omega_h() const;
};

/// Homogeneous parameter set with the benchmark cavity defaults.
ModelParams make_params(double lambda, double phi, double gamma = 0.05,
                        double omega = 1.0, double omega_c = 500.0,
                        double kappa = 150.0);

/// Throws std::invalid_argument on non-physical values (omega_c <= 0,
/// kappa < 0, gamma < 0, weight <= 0).
void validate(const ModelParams& p);

// ============================================================================
// State
// ============================================================================

struct SpinVector {
  double x{0.0};
  double y{0.0};
  double z{-1.0};
};

struct SystemState {
  std::array<SpinVector, 3> spin{};   ///< ascending species order
  std::complex<double> a{0.0, 0.0};   ///< cavity amplitude
};

/// All spins down, cavity empty: the trivial stationary state.
SystemState np_state();

SystemState make_state(const std::array<double, 3>& sx,
                       const std::array<double, 3>& sy,
                       const std::array<double, 3>& sz,
                       std::complex<double> a = {0.0, 0.0});

/// max_m | |s_m| - 1 |: distance of the spin block from the unit spheres.
double norm_error(const SystemState& s);

// Flat layout used by the integrator and file exports:
//   [sx_-1, sy_-1, sz_-1, sx_0, sy_0, sz_0, sx_1, sy_1, sz_1, a_re, a_im]
inline constexpr int flat_dim_spin = 9;
inline constexpr int flat_dim_full = 11;
void state_to_flat(const SystemState& s, double* y);
SystemState state_from_flat(const double* y, bool with_cavity);

// ============================================================================
// Couplings
// ============================================================================

/// Directional coupling weight d(Phi) = omega_c cos(Phi) + kappa sin(Phi).
/// d(Phi) != d(-Phi) whenever kappa > 0 and sin(Phi) != 0: the cavity loss
/// makes the inter-species coupling nonreciprocal.
double d_coupling(double Phi, const ModelParams& p);

/// Stationary cavity amplitude for frozen spins:
///   a = -(omega_c + i kappa) / (2 (omega_c^2 + kappa^2))
///       * sum_m lam_m sqrt(weight_m) e^{i m phi} s_x,m
std::complex<double> cavity_adiabatic(const SystemState& s,
                                      const ModelParams& p);

// ============================================================================
// Right-hand sides
// ============================================================================

/// Time derivative of spins and cavity.  The cavity slot of the returned
/// state holds da/dt.
SystemState rhs_full(const SystemState& s, const ModelParams& p);

/// Time derivative of the spins with the cavity adiabatically eliminated.
/// The cavity slot of the returned state is zero; the input cavity value is
/// ignored.
SystemState rhs_adiabatic(const SystemState& s, const ModelParams& p);

/// max-norm of the adiabatic spin derivative (all nine components).
double stationary_residual(const SystemState& s, const ModelParams& p);

/// Precomputed per-parameter quantities for the hot paths.  Values are
/// derived once from a ModelParams snapshot.
class RhsContext {
 public:
  explicit RhsContext(const ModelParams& p);

  void full(const double* y, double* dy) const;       ///< 11 -> 11
  void adiabatic(const double* y, double* dy) const;  ///< 9 -> 9
  [[nodiscard]] std::complex<double> cavity(const double* y) const;

  [[nodiscard]] const ModelParams& params() const { return p_; }

 private:
  ModelParams p_;
  std::array<std::complex<double>, 3> phase_;   // e^{i m phi}
  std::array<double, 3> cav_coupling_;          // lam_m sqrt(weight_m)
  std::array<double, 3> spin_coupling_;         // lam_m / sqrt(weight_m)
  std::complex<double> ad_factor_;              // adiabatic cavity prefactor
};

// ============================================================================
// Symmetries
// ============================================================================

/// State-space symmetry operations.
///   Parity: (s_x, s_y, a) -> (-s_x, -s_y, -a); an equation-of-motion
///     symmetry at every parameter point.
///   Mirror: species +1 <-> -1 with (s_x, s_y) sign flipped on the swapped
///     pair; maps the flow at phase phi onto the flow at pi - phi.
///   Z3: cyclic species shift s'_m = s_{m-1} with cavity rotation by
///     e^{i 2 pi / 3}; an equation-of-motion symmetry at phi = 2 pi / 3.
enum class SymmetryOp { Parity, Mirror, Z3 };

SystemState apply_symmetry(const SystemState& s, SymmetryOp op);

// ============================================================================
// Collective spin coordinates
// ============================================================================

/// Orthonormal combinations of the three s_x components.  The pair
/// (xd1, xd2) spans the plane that couples to the cavity at phi = 2 pi / 3:
/// a is proportional to xd1 + i xd2 through a fixed complex factor.
struct CollectiveCoords {
  double xc{};   ///< (s_x,+1 + s_x,0 + s_x,-1) / sqrt(3)
  double xd1{};  ///< (s_x,+1 - 2 s_x,0 + s_x,-1) / sqrt(6)
  double xd2{};  ///< (-s_x,+1 + s_x,-1) / sqrt(2)
};

CollectiveCoords collective_coords(const std::array<double, 3>& sx);
CollectiveCoords collective_coords(const SystemState& s);

// ============================================================================
// Energies
// ============================================================================

/// Mean-field energy per spin; conserved by rhs_full when kappa = gamma = 0.
double energy_mean_field(const SystemState& s, const ModelParams& p);

/// Effective spin energy after cavity elimination, valid as a gradient
/// landscape only at kappa = 0 (homogeneous lam/omega required):
///   E = sum_m [ -(Omega/2) sqrt(1 - s_m^2) - (lambda^2/(4 omega_c)) s_m^2 ]
///       - (lambda^2/(2 omega_c)) [ s_-1 s_0 cos(phi) + s_+1 s_0 cos(phi)
///                                  + s_-1 s_+1 cos(2 phi) ]
/// where s_m = s_x,m.  Throws std::domain_error if any |s_m| > 1.
double energy_eff(const std::array<double, 3>& sx, const ModelParams& p);

// ============================================================================
// Reduced chart (spins only, cavity eliminated)
// ============================================================================

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat9x6 = Eigen::Matrix<double, 9, 6>;

/// Jacobian of the adiabatic spin flow in Cartesian spin coordinates
/// (flat layout order, 9x9).  Free of coordinate singularities; valid at any
/// point including the spin equators.
Mat9 cartesian_jacobian_adiabatic(const SystemState& s, const ModelParams& p);

/// Orthonormal basis of the product tangent space at s: two columns per
/// species (ascending order), each orthogonal to its spin direction.
Mat9x6 tangent_basis(const SystemState& s);

/// Stability matrix of the adiabatic flow restricted to the spin spheres:
/// B^T J B with B = tangent_basis(s).  Similar to reduced_jacobian wherever
/// the chart is regular, but well defined on the equators too.
Mat6 tangent_jacobian(const SystemState& s, const ModelParams& p);

// The reduced chart parameterizes the two spin spheres' upper/lower sheets:
//   u = (s_x,+1, s_x,0, s_x,-1, s_y,+1, s_y,0, s_y,-1),
//   s_z,m = sigma_m sqrt(1 - s_x,m^2 - s_y,m^2),  sigma_m in {-1, +1}.
// Note the chart vector orders species in DESCENDING label order, matching
// the block layout conventionally used for the dynamical matrix; everywhere
// else arrays are ascending.
struct ReducedChart {
  Vec6 u{Vec6::Zero()};
  std::array<int, 3> sigma{-1, -1, -1};  ///< ascending species order
};

ReducedChart reduced_from_state(const SystemState& s);
/// Inverse chart map; the cavity slot is filled with cavity_adiabatic.
SystemState state_from_reduced(const ReducedChart& c, const ModelParams& p);

/// Spin-only adiabatic flow in chart coordinates.
Vec6 reduced_rhs(const ReducedChart& c, const ModelParams& p);
/// Analytic Jacobian of reduced_rhs at c (6x6, chart coordinate order).
Mat6 reduced_jacobian(const ReducedChart& c, const ModelParams& p);

}  // namespace nrdicke

#include "nrdicke/model.hpp"

#include <cmath>
#include <stdexcept>

namespace nrdicke {

namespace {

// Chart position of species m in the descending (s  +1, 0, -1) block order.
constexpr int chart_pos(int m) { return 1 - m; }

}  // namespace

// ============================================================================
// Parameters
// ============================================================================

bool ModelParams::homogeneous(double tol) const {
  auto close = [tol](const std::array<double, 3>& v) {
    return std::abs(v[0] - v[1]) <= tol && std::abs(v[1] - v[2]) <= tol;
  };
  return close(lam) && close(omega) && close(weight) &&
         std::abs(weight[0] - 1.0) <= tol;
}

double ModelParams::lambda_h() const {
  if (!homogeneous())
    throw std::logic_error("lambda_h: parameters are not homogeneous");
  return lam[0];
}

double ModelParams::omega_h() const {
  if (!homogeneous())
    throw std::logic_error("omega_h: parameters are not homogeneous");
  return omega[0];
}

ModelParams make_params(double lambda, double phi, double gamma, double omega,
                        double omega_c, double kappa) {
  ModelParams p;
  p.omega_c = omega_c;
  p.kappa = kappa;
  p.gamma = gamma;
  p.phi = phi;
  p.lam = {lambda, lambda, lambda};
  p.omega = {omega, omega, omega};
  p.weight = {1.0, 1.0, 1.0};
  validate(p);
  return p;
}

void validate(const ModelParams& p) {
  if (!(p.omega_c > 0.0)) throw std::invalid_argument("omega_c must be > 0");
  if (!(p.kappa >= 0.0)) throw std::invalid_argument("kappa must be >= 0");
  if (!(p.gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  for (int i = 0; i < n_species; ++i) {
    if (!(p.weight[i] > 0.0))
      throw std::invalid_argument("weight must be > 0");
    if (!(p.lam[i] >= 0.0)) throw std::invalid_argument("lam must be >= 0");
    if (!(p.omega[i] > 0.0)) throw std::invalid_argument("omega must be > 0");
  }
}

// ============================================================================
// State
// ============================================================================

SystemState np_state() { return SystemState{}; }

SystemState make_state(const std::array<double, 3>& sx,
                       const std::array<double, 3>& sy,
                       const std::array<double, 3>& sz,
                       std::complex<double> a) {
  SystemState s;
  for (int i = 0; i < n_species; ++i) s.spin[i] = SpinVector{sx[i], sy[i], sz[i]};
  s.a = a;
  return s;
}

double norm_error(const SystemState& s) {
  double err = 0.0;
  for (const auto& sp : s.spin) {
    const double n = std::sqrt(sp.x * sp.x + sp.y * sp.y + sp.z * sp.z);
    err = std::max(err, std::abs(n - 1.0));
  }
  return err;
}

void state_to_flat(const SystemState& s, double* y) {
  for (int i = 0; i < n_species; ++i) {
    y[3 * i + 0] = s.spin[i].x;
    y[3 * i + 1] = s.spin[i].y;
    y[3 * i + 2] = s.spin[i].z;
  }
  y[9] = s.a.real();
  y[10] = s.a.imag();
}

SystemState state_from_flat(const double* y, bool with_cavity) {
  SystemState s;
  for (int i = 0; i < n_species; ++i)
    s.spin[i] = SpinVector{y[3 * i + 0], y[3 * i + 1], y[3 * i + 2]};
  if (with_cavity) s.a = {y[9], y[10]};
  return s;
}

// ============================================================================
// Couplings and right-hand sides
// ============================================================================

double d_coupling(double Phi, const ModelParams& p) {
  return p.omega_c * std::cos(Phi) + p.kappa * std::sin(Phi);
}

RhsContext::RhsContext(const ModelParams& p) : p_(p) {
  validate(p);
  const double denom = p.omega_c * p.omega_c + p.kappa * p.kappa;
  for (int i = 0; i < n_species; ++i) {
    const int m = species_m(i);
    phase_[i] = {std::cos(m * p.phi), std::sin(m * p.phi)};
    const double rw = std::sqrt(p.weight[i]);
    cav_coupling_[i] = p.lam[i] * rw;
    spin_coupling_[i] = p.lam[i] / rw;
  }
  ad_factor_ = -std::complex<double>{p.omega_c, p.kappa} / (2.0 * denom);
}

std::complex<double> RhsContext::cavity(const double* y) const {
  std::complex<double> sum{0.0, 0.0};
  for (int i = 0; i < n_species; ++i)
    sum += cav_coupling_[i] * phase_[i] * y[3 * i];
  return ad_factor_ * sum;
}

void RhsContext::full(const double* y, double* dy) const {
  const std::complex<double> a{y[9], y[10]};
  std::complex<double> sum{0.0, 0.0};
  for (int i = 0; i < n_species; ++i) {
    const double sx = y[3 * i], sy = y[3 * i + 1], sz = y[3 * i + 2];
    // 2 Re(e^{-i m phi} a), the quadrature seen by species m
    const double field =
        2.0 * (phase_[i].real() * a.real() + phase_[i].imag() * a.imag());
    const double drive = spin_coupling_[i] * field;
    dy[3 * i + 0] = -p_.omega[i] * sy + p_.gamma * sx * sz;
    dy[3 * i + 1] = p_.omega[i] * sx - drive * sz + p_.gamma * sy * sz;
    dy[3 * i + 2] = drive * sy - p_.gamma * (1.0 - sz * sz);
    sum += cav_coupling_[i] * phase_[i] * sx;
  }
  // da/dt = -(i omega_c + kappa) a - (i/2) sum_m lam_m sqrt(w_m) e^{i m phi} s_x,m
  dy[9] = -p_.kappa * a.real() + p_.omega_c * a.imag() + 0.5 * sum.imag();
  dy[10] = -p_.omega_c * a.real() - p_.kappa * a.imag() - 0.5 * sum.real();
}

void RhsContext::adiabatic(const double* y, double* dy) const {
  const std::complex<double> a = cavity(y);
  for (int i = 0; i < n_species; ++i) {
    const double sx = y[3 * i], sy = y[3 * i + 1], sz = y[3 * i + 2];
    const double field =
        2.0 * (phase_[i].real() * a.real() + phase_[i].imag() * a.imag());
    const double drive = spin_coupling_[i] * field;
    dy[3 * i + 0] = -p_.omega[i] * sy + p_.gamma * sx * sz;
    dy[3 * i + 1] = p_.omega[i] * sx - drive * sz + p_.gamma * sy * sz;
    dy[3 * i + 2] = drive * sy - p_.gamma * (1.0 - sz * sz);
  }
}

std::complex<double> cavity_adiabatic(const SystemState& s,
                                      const ModelParams& p) {
  double y[flat_dim_full];
  state_to_flat(s, y);
  return RhsContext(p).cavity(y);
}

SystemState rhs_full(const SystemState& s, const ModelParams& p) {
  double y[flat_dim_full], dy[flat_dim_full];
  state_to_flat(s, y);
  RhsContext(p).full(y, dy);
  return state_from_flat(dy, true);
}

SystemState rhs_adiabatic(const SystemState& s, const ModelParams& p) {
  double y[flat_dim_full], dy[flat_dim_full];
  state_to_flat(s, y);
  RhsContext(p).adiabatic(y, dy);
  SystemState out = state_from_flat(dy, false);
  out.a = {0.0, 0.0};
  return out;
}

double stationary_residual(const SystemState& s, const ModelParams& p) {
  const SystemState f = rhs_adiabatic(s, p);
  double r = 0.0;
  for (const auto& sp : f.spin) {
    r = std::max(r, std::abs(sp.x));
    r = std::max(r, std::abs(sp.y));
    r = std::max(r, std::abs(sp.z));
  }
  return r;
}

// ============================================================================
// Symmetries
// ============================================================================

namespace {

SpinVector flip_xy(const SpinVector& s) { return SpinVector{-s.x, -s.y, s.z}; }

}  // namespace

SystemState apply_symmetry(const SystemState& s, SymmetryOp op) {
  SystemState out;
  switch (op) {
    case SymmetryOp::Parity:
      for (int i = 0; i < n_species; ++i) out.spin[i] = flip_xy(s.spin[i]);
      out.a = -s.a;
      return out;
    case SymmetryOp::Mirror:
      out.spin[species_slot(+1)] = flip_xy(s.spin[species_slot(-1)]);
      out.spin[species_slot(-1)] = flip_xy(s.spin[species_slot(+1)]);
      out.spin[species_slot(0)] = s.spin[species_slot(0)];
      out.a = s.a;
      return out;
    case SymmetryOp::Z3: {
      // s'_m = s_{m-1} (cyclic in {-1, 0, +1}), a' = e^{i 2 pi / 3} a
      out.spin[species_slot(+1)] = s.spin[species_slot(0)];
      out.spin[species_slot(0)] = s.spin[species_slot(-1)];
      out.spin[species_slot(-1)] = s.spin[species_slot(+1)];
      const std::complex<double> rot{-0.5, std::sqrt(3.0) / 2.0};
      out.a = rot * s.a;
      return out;
    }
  }
  throw std::invalid_argument("apply_symmetry: unknown operation");
}

// ============================================================================
// Collective coordinates
// ============================================================================

CollectiveCoords collective_coords(const std::array<double, 3>& sx) {
  const double s_m1 = sx[species_slot(-1)];
  const double s_0 = sx[species_slot(0)];
  const double s_p1 = sx[species_slot(+1)];
  CollectiveCoords c;
  c.xc = (s_p1 + s_0 + s_m1) / std::sqrt(3.0);
  c.xd1 = (s_p1 - 2.0 * s_0 + s_m1) / std::sqrt(6.0);
  c.xd2 = (-s_p1 + s_m1) / std::sqrt(2.0);
  return c;
}

CollectiveCoords collective_coords(const SystemState& s) {
  return collective_coords(
      std::array<double, 3>{s.spin[0].x, s.spin[1].x, s.spin[2].x});
}

// ============================================================================
// Energies
// ============================================================================

double energy_mean_field(const SystemState& s, const ModelParams& p) {
  double e = p.omega_c * std::norm(s.a);
  for (int i = 0; i < n_species; ++i) {
    const int m = species_m(i);
    const double lam_cav = p.lam[i] * std::sqrt(p.weight[i]);
    const double re_field = std::cos(m * p.phi) * s.a.real() +
                            std::sin(m * p.phi) * s.a.imag();
    e += 0.5 * p.omega[i] * p.weight[i] * s.spin[i].z;
    e += lam_cav * re_field * s.spin[i].x;
  }
  return e;
}

double energy_eff(const std::array<double, 3>& sx, const ModelParams& p) {
  const double lambda = p.lambda_h();
  const double omega = p.omega_h();
  for (double s : sx)
    if (std::abs(s) > 1.0)
      throw std::domain_error("energy_eff: |s_x| exceeds 1");
  const double s_m1 = sx[species_slot(-1)];
  const double s_0 = sx[species_slot(0)];
  const double s_p1 = sx[species_slot(+1)];
  const double lam2 = lambda * lambda;
  double e = 0.0;
  for (double s : sx)
    e += -0.5 * omega * std::sqrt(1.0 - s * s) -
         lam2 / (4.0 * p.omega_c) * s * s;
  e -= lam2 / (2.0 * p.omega_c) *
       (s_m1 * s_0 * std::cos(p.phi) + s_p1 * s_0 * std::cos(p.phi) +
        s_m1 * s_p1 * std::cos(2.0 * p.phi));
  return e;
}

// ============================================================================
// Reduced chart
// ============================================================================

ReducedChart reduced_from_state(const SystemState& s) {
  ReducedChart c;
  for (int i = 0; i < n_species; ++i) {
    const int pos = chart_pos(species_m(i));
    c.u[pos] = s.spin[i].x;
    c.u[3 + pos] = s.spin[i].y;
    c.sigma[i] = s.spin[i].z >= 0.0 ? +1 : -1;
  }
  return c;
}

SystemState state_from_reduced(const ReducedChart& c, const ModelParams& p) {
  SystemState s;
  for (int i = 0; i < n_species; ++i) {
    const int pos = chart_pos(species_m(i));
    const double sx = c.u[pos], sy = c.u[3 + pos];
    const double r2 = sx * sx + sy * sy;
    if (r2 > 1.0)
      throw std::domain_error("state_from_reduced: point outside chart");
    s.spin[i] = SpinVector{sx, sy, c.sigma[i] * std::sqrt(1.0 - r2)};
  }
  s.a = cavity_adiabatic(s, p);
  return s;
}

Vec6 reduced_rhs(const ReducedChart& c, const ModelParams& p) {
  const SystemState s = state_from_reduced(c, p);
  const SystemState f = rhs_adiabatic(s, p);
  Vec6 out;
  for (int i = 0; i < n_species; ++i) {
    const int pos = chart_pos(species_m(i));
    out[pos] = f.spin[i].x;
    out[3 + pos] = f.spin[i].y;
  }
  return out;
}

Mat6 reduced_jacobian(const ReducedChart& c, const ModelParams& p) {
  const double denom = p.omega_c * p.omega_c + p.kappa * p.kappa;
  const SystemState s = state_from_reduced(c, p);

  // Per-species values in chart (descending) order.
  double sx[3], sy[3], sz[3], omega[3], g[3], Lam[3];
  for (int i = 0; i < n_species; ++i) {
    const int m = species_m(i);
    const int pos = chart_pos(m);
    sx[pos] = s.spin[i].x;
    sy[pos] = s.spin[i].y;
    sz[pos] = s.spin[i].z;
    omega[pos] = p.omega[i];
    const double rw = std::sqrt(p.weight[i]);
    g[pos] = p.lam[i] / rw;
    Lam[pos] = p.lam[i] * rw;
  }

  // D[pq] = d_coupling((m_p - m_q) phi) with m_p = 1 - p (descending order),
  // so m_p - m_q = q - p.
  double D[3][3];
  for (int pp = 0; pp < 3; ++pp)
    for (int q = 0; q < 3; ++q) D[pp][q] = d_coupling((q - pp) * p.phi, p);

  double G[3];
  for (int pp = 0; pp < 3; ++pp) {
    G[pp] = 0.0;
    for (int q = 0; q < 3; ++q) G[pp] += Lam[q] * D[pp][q] * sx[q];
  }

  Mat6 J = Mat6::Zero();
  const double gamma = p.gamma;
  for (int pp = 0; pp < 3; ++pp) {
    if (sz[pp] == 0.0)
      throw std::domain_error("reduced_jacobian: s_z = 0 (chart boundary)");
    const double zx = -sx[pp] / sz[pp];  // d s_z / d s_x
    const double zy = -sy[pp] / sz[pp];  // d s_z / d s_y
    // f_x = -omega s_y + gamma s_x s_z
    J(pp, pp) = gamma * (sz[pp] + sx[pp] * zx);
    J(pp, 3 + pp) = -omega[pp] + gamma * sx[pp] * zy;
    // f_y = omega s_x + (g/denom) s_z G + gamma s_y s_z
    for (int q = 0; q < 3; ++q)
      J(3 + pp, q) = g[pp] / denom * sz[pp] * Lam[q] * D[pp][q];
    J(3 + pp, pp) += omega[pp] + g[pp] / denom * zx * G[pp] + gamma * sy[pp] * zx;
    J(3 + pp, 3 + pp) =
        g[pp] / denom * zy * G[pp] + gamma * (sz[pp] + sy[pp] * zy);
  }
  return J;
}

Mat9 cartesian_jacobian_adiabatic(const SystemState& s, const ModelParams& p) {
  const double denom = p.omega_c * p.omega_c + p.kappa * p.kappa;
  std::array<double, 3> lam_cav, g;
  for (int i = 0; i < n_species; ++i) {
    const double rw = std::sqrt(p.weight[i]);
    lam_cav[i] = p.lam[i] * rw;
    g[i] = p.lam[i] / rw;
  }
  // Drive on species m: r_m = -sum_m' Lam_m' d((m-m') phi) s_x,m' / denom.
  std::array<std::array<double, 3>, 3> R{};
  std::array<double, 3> r{};
  for (int i = 0; i < n_species; ++i)
    for (int j = 0; j < n_species; ++j) {
      R[i][j] = -lam_cav[j] *
                d_coupling((species_m(i) - species_m(j)) * p.phi, p) / denom;
      r[i] += R[i][j] * s.spin[j].x;
    }

  Mat9 J = Mat9::Zero();
  for (int i = 0; i < n_species; ++i) {
    const int x = 3 * i, y = 3 * i + 1, z = 3 * i + 2;
    const auto& sp = s.spin[i];
    J(x, y) = -p.omega[i];
    J(x, x) = p.gamma * sp.z;
    J(x, z) = p.gamma * sp.x;
    J(y, y) = p.gamma * sp.z;
    J(y, z) = -g[i] * r[i] + p.gamma * sp.y;
    J(z, y) = g[i] * r[i];
    J(z, z) = 2.0 * p.gamma * sp.z;
    for (int j = 0; j < n_species; ++j) {
      J(y, 3 * j) += (i == j ? p.omega[i] : 0.0) - g[i] * sp.z * R[i][j];
      J(z, 3 * j) += g[i] * sp.y * R[i][j];
    }
  }
  return J;
}

Mat9x6 tangent_basis(const SystemState& s) {
  Mat9x6 B = Mat9x6::Zero();
  for (int i = 0; i < n_species; ++i) {
    const Eigen::Vector3d n(s.spin[i].x, s.spin[i].y, s.spin[i].z);
    // Cross with the axis least aligned with the spin for a stable basis.
    const Eigen::Vector3d ref = std::abs(n.z()) < 0.9
                                    ? Eigen::Vector3d::UnitZ()
                                    : Eigen::Vector3d::UnitX();
    const Eigen::Vector3d t1 = ref.cross(n).normalized();
    const Eigen::Vector3d t2 = n.cross(t1);
    B.block<3, 1>(3 * i, 2 * i) = t1;
    B.block<3, 1>(3 * i, 2 * i + 1) = t2;
  }
  return B;
}

Mat6 tangent_jacobian(const SystemState& s, const ModelParams& p) {
  const Mat9x6 B = tangent_basis(s);
  return B.transpose() * cartesian_jacobian_adiabatic(s, p) * B;
}

}  // namespace nrdicke

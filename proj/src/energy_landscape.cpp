#include "nrdicke/energy_landscape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace nrdicke {

namespace {

/// Couplings of the three interaction bonds: (-1,0) and (0,+1) carry
/// cos(phi), the (-1,+1) bond carries cos(2 phi).
struct BondWeights {
  double g;    ///< lambda^2 / (2 omega_c)
  double c1;   ///< cos(phi)
  double c2;   ///< cos(2 phi)
};

BondWeights bonds(const ModelParams& p) {
  const double lam = p.lambda_h();
  return {lam * lam / (2.0 * p.omega_c), std::cos(p.phi),
          std::cos(2.0 * p.phi)};
}

constexpr double kEdge = 1.0 - 1e-9;

/// One damped Newton descent on the gradient from `seed`; returns true on
/// convergence to grad_tol.
bool refine(std::array<double, 3>& s, const ModelParams& p,
            const LandscapeOptions& opts) {
  const double omega = p.omega_h();
  double mu = 1e-8 * omega;  // Levenberg damping, adapted multiplicatively
  auto grad_norm = [&](const std::array<double, 3>& x) {
    const auto g = energy_gradient(x, p);
    return std::max({std::abs(g[0]), std::abs(g[1]), std::abs(g[2])});
  };
  double gn = grad_norm(s);
  for (int it = 0; it < opts.max_iter; ++it) {
    if (gn < opts.grad_tol) return true;
    const auto g = energy_gradient(s, p);
    const auto h = energy_hessian(s, p);
    Eigen::Matrix3d H;
    Eigen::Vector3d G;
    for (int i = 0; i < 3; ++i) {
      G(i) = g[static_cast<std::size_t>(i)];
      for (int j = 0; j < 3; ++j)
        H(i, j) = h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      const Eigen::Vector3d step =
          (H + mu * Eigen::Matrix3d::Identity()).ldlt().solve(-G);
      std::array<double, 3> trial = s;
      for (int i = 0; i < 3; ++i)
        trial[static_cast<std::size_t>(i)] =
            std::clamp(trial[static_cast<std::size_t>(i)] + step(i), -kEdge,
                       kEdge);
      const double trial_gn = grad_norm(trial);
      if (trial_gn < gn || trial_gn < opts.grad_tol) {
        s = trial;
        gn = trial_gn;
        mu = std::max(mu / 3.0, 1e-14 * omega);
        accepted = true;
        break;
      }
      mu *= 10.0;
    }
    if (!accepted) return false;
  }
  return gn < opts.grad_tol;
}

double min_eigenvalue(const std::array<std::array<double, 3>, 3>& h) {
  Eigen::Matrix3d H;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      H(i, j) = h[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(H)
      .eigenvalues()
      .minCoeff();
}

}  // namespace

// ============================================================================
// Gradient and Hessian of energy_eff
// ============================================================================

std::array<double, 3> energy_gradient(const std::array<double, 3>& sx,
                                      const ModelParams& p) {
  const double omega = p.omega_h();
  const auto [g, c1, c2] = bonds(p);
  auto local = [&](double s) {
    return 0.5 * omega * s / std::sqrt(1.0 - s * s) - g * s;
  };
  return {local(sx[0]) - g * (sx[1] * c1 + sx[2] * c2),
          local(sx[1]) - g * (sx[0] * c1 + sx[2] * c1),
          local(sx[2]) - g * (sx[1] * c1 + sx[0] * c2)};
}

std::array<std::array<double, 3>, 3> energy_hessian(
    const std::array<double, 3>& sx, const ModelParams& p) {
  const double omega = p.omega_h();
  const auto [g, c1, c2] = bonds(p);
  auto curv = [&](double s) {
    const double q = 1.0 - s * s;
    return 0.5 * omega / (q * std::sqrt(q)) - g;
  };
  return {{{curv(sx[0]), -g * c1, -g * c2},
           {-g * c1, curv(sx[1]), -g * c1},
           {-g * c2, -g * c1, curv(sx[2])}}};
}

// ============================================================================
// Minimization
// ============================================================================

std::vector<GroundConfig> minimize_energy(const ModelParams& p,
                                          const LandscapeOptions& opts) {
  std::vector<std::array<double, 3>> seeds;
  seeds.push_back({0.0, 0.0, 0.0});
  for (double amp : {0.3, 0.7, 0.95})
    for (int mask = 0; mask < 8; ++mask)
      seeds.push_back({(mask & 1) ? amp : -amp, (mask & 2) ? amp : -amp,
                       (mask & 4) ? amp : -amp});

  std::vector<GroundConfig> minima;
  auto add = [&](const std::array<double, 3>& s) {
    for (const auto& m : minima) {
      const double d = std::max({std::abs(m.sx[0] - s[0]),
                                 std::abs(m.sx[1] - s[1]),
                                 std::abs(m.sx[2] - s[2])});
      if (d < opts.dedup_tol) return;
    }
    const double min_eig = min_eigenvalue(energy_hessian(s, p));
    if (min_eig < -1e-10 * p.omega_h()) return;  // saddle or maximum
    minima.push_back({s, energy_eff(s, p), min_eig > 1e-10 * p.omega_h()});
  };

  for (auto seed : seeds) {
    if (!refine(seed, p, opts)) continue;
    add(seed);
    // the energy is even under the global spin flip, so the mirror of a
    // minimum is a minimum at exactly the same energy
    add({-seed[0], -seed[1], -seed[2]});
  }

  std::sort(minima.begin(), minima.end(),
            [](const GroundConfig& a, const GroundConfig& b) {
              if (a.energy != b.energy) return a.energy < b.energy;
              return a.sx < b.sx;
            });
  return minima;
}

std::vector<GroundConfig> global_minima(const std::vector<GroundConfig>& minima,
                                        const ModelParams& p, double e_tol) {
  std::vector<GroundConfig> out;
  if (minima.empty()) return out;
  double least = std::numeric_limits<double>::max();
  for (const auto& m : minima) least = std::min(least, m.energy);
  for (const auto& m : minima)
    if (m.energy <= least + e_tol * p.omega_h()) out.push_back(m);
  return out;
}

PhaseLabel ground_phase(double phi, double lambda, const ModelParams& base,
                        const LandscapeOptions& opts) {
  ModelParams p = base;
  p.phi = phi;
  p.lam = {lambda, lambda, lambda};
  const auto ground = global_minima(minimize_energy(p, opts), p, opts.e_tol);

  PhaseLabel label;
  const int count = static_cast<int>(ground.size());
  label.raw_stable_count = count;
  // the origin alone signals the unordered phase
  const bool trivial =
      count == 1 && std::abs(ground[0].sx[0]) < 1e-6 &&
      std::abs(ground[0].sx[1]) < 1e-6 && std::abs(ground[0].sx[2]) < 1e-6;
  if (trivial || count == 0) {
    label.tag = PhaseTag::NP;
    label.degeneracy = 1;
    label.flagged = count == 0;
    return label;
  }
  if (count >= 6) {
    label.tag = PhaseTag::FSOP;
    label.degeneracy = 6;
  } else if (count >= 4) {
    label.tag = PhaseTag::pFSOP;
    label.degeneracy = 4;
  } else {
    label.tag = PhaseTag::SOP;
    label.degeneracy = 2;
  }
  label.flagged = count != label.degeneracy;
  return label;
}

double local_spin_minimum(double lambda, const ModelParams& p) {
  const double omega = p.omega_h();
  if (lambda * lambda <= omega * p.omega_c) return 0.0;
  const double coeff = lambda * lambda / (4.0 * p.omega_c);
  auto f = [&](double s) {
    return -0.5 * omega * std::sqrt(1.0 - s * s) - coeff * s * s;
  };
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = kEdge;
  double x1 = b - invphi * (b - a), x2 = a + invphi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > 1e-12) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace nrdicke

#include "nrdicke/stationary.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <random>

#include <Eigen/Dense>

namespace nrdicke {

namespace {

using Vec9 = Eigen::Matrix<double, 9, 1>;

// Spin block of the adiabatic flow, flattened species-ascending.
Vec9 spin_rhs(const SystemState& s, const ModelParams& p) {
  const SystemState ds = rhs_adiabatic(s, p);
  Vec9 f;
  for (int i = 0; i < n_species; ++i) {
    f[3 * i] = ds.spin[i].x;
    f[3 * i + 1] = ds.spin[i].y;
    f[3 * i + 2] = ds.spin[i].z;
  }
  return f;
}

// Move along `delta` and pull each spin back onto its unit sphere.  Fails
// only if a spin would land at the origin (hopelessly large step).
bool retract(SystemState& s, const Vec9& delta) {
  for (int i = 0; i < n_species; ++i) {
    const double x = s.spin[i].x + delta[3 * i];
    const double y = s.spin[i].y + delta[3 * i + 1];
    const double z = s.spin[i].z + delta[3 * i + 2];
    const double n = std::sqrt(x * x + y * y + z * z);
    if (!(n > 1e-6)) return false;
    s.spin[i] = SpinVector{x / n, y / n, z / n};
  }
  return true;
}

double state_distance(const SystemState& a, const SystemState& b) {
  double d = 0.0;
  for (int i = 0; i < n_species; ++i) {
    d = std::max(d, std::abs(a.spin[i].x - b.spin[i].x));
    d = std::max(d, std::abs(a.spin[i].y - b.spin[i].y));
    d = std::max(d, std::abs(a.spin[i].z - b.spin[i].z));
  }
  return d;
}

}  // namespace

bool is_trivial(const FixedPoint& fp, double tol) {
  for (const auto& sp : fp.state.spin)
    if (std::abs(sp.x) > tol || std::abs(sp.y) > tol) return false;
  return true;
}

std::optional<FixedPoint> newton_fixed_point(const SystemState& seed,
                                             const ModelParams& p,
                                             const NewtonOptions& opts) {
  SystemState s = seed;
  if (!retract(s, Vec9::Zero())) return std::nullopt;  // normalize the seed

  Vec9 f = spin_rhs(s, p);
  double fn = f.cwiseAbs().maxCoeff();

  for (int it = 0; it < opts.max_iter; ++it) {
    if (fn < opts.tol) {
      FixedPoint fp;
      fp.state = s;
      fp.state.a = cavity_adiabatic(s, p);
      fp.residual = stationary_residual(fp.state, p);
      return fp;
    }
    // Tangent-space Newton: the flow is tangent to each unit sphere, so the
    // 9d residual lives in the 6d tangent space spanned by B.
    const Mat9x6 B = tangent_basis(s);
    const Mat6 M = B.transpose() * cartesian_jacobian_adiabatic(s, p) * B;
    const Vec6 f6 = B.transpose() * f;
    bool moved = false;

    Eigen::FullPivLU<Mat6> lu(M);
    if (lu.isInvertible()) {
      const Vec6 step = lu.solve(-f6);
      // Backtracking line search on the retracted trial point.
      double damp = 1.0;
      while (damp >= opts.min_damp) {
        SystemState trial = s;
        if (retract(trial, B * (damp * step))) {
          const Vec9 ft = spin_rhs(trial, p);
          const double ftn = ft.cwiseAbs().maxCoeff();
          if (ftn < fn || ftn < opts.tol) {
            s = trial;
            f = ft;
            fn = ftn;
            moved = true;
            break;
          }
        }
        damp *= 0.5;
      }
    }

    if (!moved) {
      // Levenberg fallback for near-singular tangent Jacobians (close to a
      // bifurcation the Newton direction blows up along the soft mode):
      // descend 0.5|f|^2 with escalating diagonal damping.
      const Mat6 mtm = M.transpose() * M;
      const Vec6 grad = M.transpose() * f6;
      double mu = 1e-8 * std::max(1.0, mtm.trace() / 6.0);
      for (int k = 0; k < 24 && !moved; ++k, mu *= 10.0) {
        Mat6 a = mtm;
        a.diagonal().array() += mu;
        SystemState trial = s;
        if (!retract(trial, B * a.ldlt().solve(-grad))) continue;
        const Vec9 ft = spin_rhs(trial, p);
        const double ftn = ft.cwiseAbs().maxCoeff();
        if (ftn < fn) {
          s = trial;
          f = ft;
          fn = ftn;
          moved = true;
        }
      }
    }
    if (!moved) {
      if (opts.stall_accept > 0.0 && fn < opts.stall_accept) break;
      return std::nullopt;
    }
  }
  if (opts.stall_accept > 0.0 && fn < opts.stall_accept) {
    FixedPoint fp;
    fp.state = s;
    fp.state.a = cavity_adiabatic(s, p);
    fp.residual = stationary_residual(fp.state, p);
    return fp;
  }
  return std::nullopt;
}

std::optional<FixedPoint> newton_fixed_point(const ReducedChart& seed,
                                             const ModelParams& p,
                                             const NewtonOptions& opts) {
  for (int i = 0; i < 3; ++i)
    if (seed.u[i] * seed.u[i] + seed.u[3 + i] * seed.u[3 + i] > 1.0)
      return std::nullopt;
  return newton_fixed_point(state_from_reduced(seed, p), p, opts);
}

std::vector<FixedPoint> find_all_stationary(const ModelParams& p,
                                            const CensusOptions& opts) {
  std::vector<SystemState> seeds;

  seeds.push_back(np_state());

  // Deterministic sign-pattern seeds on the lower hemispheres: every
  // combination of transverse displacement directions at two amplitudes.
  for (double amp : opts.seed_amplitudes) {
    const double sz = -std::sqrt(std::max(0.0, 1.0 - amp * amp));
    for (int mask = 0; mask < 8; ++mask) {
      SystemState s;
      for (int pos = 0; pos < 3; ++pos)
        s.spin[pos] = SpinVector{(mask & (1 << pos)) ? amp : -amp, 0.0, sz};
      seeds.push_back(s);
    }
  }

  // Uniform random points on the full product of spheres, so roots in any
  // hemisphere combination are reachable.
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int k = 0; k < opts.n_random; ++k) {
    SystemState s;
    for (int pos = 0; pos < 3; ++pos) {
      double x, y, z, n;
      do {
        x = g(rng);
        y = g(rng);
        z = g(rng);
        n = std::sqrt(x * x + y * y + z * z);
      } while (n < 1e-6);
      s.spin[pos] = SpinVector{x / n, y / n, z / n};
    }
    seeds.push_back(s);
  }

  std::vector<FixedPoint> roots;
  auto add_root = [&](const FixedPoint& fp) {
    for (const FixedPoint& r : roots)
      if (state_distance(r.state, fp.state) < opts.dedup_tol) return;
    roots.push_back(fp);
  };

  auto add_with_parity = [&](const FixedPoint& fp) {
    add_root(fp);
    // Parity closure: the flipped partner is a root of the same flow.
    FixedPoint mirror = fp;
    mirror.state = apply_symmetry(fp.state, SymmetryOp::Parity);
    mirror.residual = stationary_residual(mirror.state, p);
    add_root(mirror);
  };

  for (const SystemState& seed : seeds) {
    auto fp = newton_fixed_point(seed, p, opts.newton);
    if (!fp) continue;
    add_with_parity(*fp);
    // Cyclic-relabeling closure: species-shift images of a root are exact
    // roots at the symmetric coupling phase and excellent Newton seeds
    // anywhere nearby, so polish them instead of trusting them outright.
    SystemState image = fp->state;
    for (int shift = 0; shift < 2; ++shift) {
      image = apply_symmetry(image, SymmetryOp::Z3);
      if (auto z = newton_fixed_point(image, p, opts.newton))
        add_with_parity(*z);
    }
  }

  std::sort(roots.begin(), roots.end(),
            [](const FixedPoint& a, const FixedPoint& b) {
              const bool ta = is_trivial(a), tb = is_trivial(b);
              if (ta != tb) return ta;
              for (int i = 0; i < n_species; ++i) {
                if (a.state.spin[i].x != b.state.spin[i].x)
                  return a.state.spin[i].x < b.state.spin[i].x;
                if (a.state.spin[i].y != b.state.spin[i].y)
                  return a.state.spin[i].y < b.state.spin[i].y;
              }
              return false;
            });
  return roots;
}

std::string to_string(PhaseTag tag) {
  switch (tag) {
    case PhaseTag::NP: return "NP";
    case PhaseTag::SOP: return "SOP";
    case PhaseTag::pFSOP: return "pFSOP";
    case PhaseTag::FSOP: return "FSOP";
    case PhaseTag::DP: return "DP";
  }
  return "?";
}

PhaseLabel classify_phase(const std::vector<FixedPoint>& annotated_roots,
                          const ModelParams& p) {
  // With no single-spin dissipation every counted root is at best marginal,
  // and spurious marginal centers exist with spins tipped above their
  // equators.  The physical phases are the weak-dissipation limit, reached by
  // downward-pumped spins: count marginal roots only when all spins stay in
  // the closed lower hemispheres.
  const bool zero_gamma = p.gamma <= 0.0;
  auto counted = [&](const FixedPoint& fp) {
    if (!fp.attracting()) return false;
    if (zero_gamma && !fp.stable)
      for (const auto& sp : fp.state.spin)
        if (sp.z > 1e-9) return false;
    return true;
  };

  int nontrivial = 0;
  bool trivial_attracting = false;
  for (const FixedPoint& fp : annotated_roots) {
    if (!fp.has_stability) continue;
    if (is_trivial(fp)) {
      trivial_attracting = trivial_attracting || counted(fp);
    } else if (counted(fp)) {
      ++nontrivial;
    }
  }

  PhaseLabel label;
  label.raw_stable_count = nontrivial;
  if (nontrivial == 0) {
    label.tag = trivial_attracting ? PhaseTag::NP : PhaseTag::DP;
    label.degeneracy = trivial_attracting ? 1 : 0;
    label.flagged = false;
    return label;
  }
  if (nontrivial >= 6) {
    label.tag = PhaseTag::FSOP;
    label.degeneracy = 6;
  } else if (nontrivial >= 4) {
    label.tag = PhaseTag::pFSOP;
    label.degeneracy = 4;
  } else {
    label.tag = PhaseTag::SOP;
    label.degeneracy = 2;
  }
  label.flagged = nontrivial != label.degeneracy;
  return label;
}

namespace {

void append_double(std::string& line, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  line.append(buf, ptr);
}

void append_triplet(std::string& line, const char* key,
                    const SystemState& s, double SpinVector::*member) {
  line += '"';
  line += key;
  line += "\":[";
  for (int i = 0; i < n_species; ++i) {
    if (i) line += ',';
    append_double(line, s.spin[i].*member);
  }
  line += ']';
}

}  // namespace

void write_jsonl(const std::vector<FixedPoint>& roots, std::ostream& os) {
  std::string line;
  for (const FixedPoint& fp : roots) {
    line = "{";
    append_triplet(line, "sx", fp.state, &SpinVector::x);
    line += ',';
    append_triplet(line, "sy", fp.state, &SpinVector::y);
    line += ',';
    append_triplet(line, "sz", fp.state, &SpinVector::z);
    line += ",\"cavity\":[";
    append_double(line, fp.state.a.real());
    line += ',';
    append_double(line, fp.state.a.imag());
    line += "],\"residual\":";
    append_double(line, fp.residual);
    line += ",\"stable\":";
    line += fp.stable ? "true" : "false";
    line += "}\n";
    os << line;
  }
}

}  // namespace nrdicke

#include "nrdicke/integrate.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>

namespace nrdicke {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// Embedded 4th-order weights.
constexpr double e1 = 5179.0 / 57600, e3 = 7571.0 / 16695, e4 = 393.0 / 640,
                 e5 = -92097.0 / 339200, e6 = 187.0 / 2100, e7 = 1.0 / 40;
// Fourth-order continuous-extension weights.
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

constexpr int max_dim = flat_dim_full;
using Buf = std::array<double, max_dim>;

bool all_finite(const double* y, int n) {
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(y[i])) return false;
  return true;
}

struct Stepper {
  const RhsContext& ctx;
  CavityMode mode;
  int dim;

  void eval(const double* y, double* dy) const {
    if (mode == CavityMode::Full)
      ctx.full(y, dy);
    else
      ctx.adiabatic(y, dy);
  }
};

double error_norm(const Buf& err, const Buf& y0, const Buf& y1, int dim,
                  const IntegratorConfig& cfg) {
  double sum = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double sc =
        cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double q = err[i] / sc;
    sum += q * q;
  }
  return std::sqrt(sum / dim);
}

double initial_step(const Stepper& st, const Buf& y, const Buf& f,
                    const IntegratorConfig& cfg) {
  if (cfg.init_step > 0.0) return std::min(cfg.init_step, cfg.max_step);
  double dn = 0.0, fn = 0.0;
  for (int i = 0; i < st.dim; ++i) {
    const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
    dn = std::max(dn, std::abs(y[i]) / sc);
    fn = std::max(fn, std::abs(f[i]) / sc);
  }
  double h0 = (dn < 1e-10 || fn < 1e-10) ? 1e-6 : 0.01 * dn / fn;
  h0 = std::min(h0, cfg.max_step);
  // One explicit Euler probe to estimate the second derivative scale.
  Buf y1{}, f1{};
  for (int i = 0; i < st.dim; ++i) y1[i] = y[i] + h0 * f[i];
  st.eval(y1.data(), f1.data());
  double d2 = 0.0;
  for (int i = 0; i < st.dim; ++i) {
    const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
    d2 = std::max(d2, std::abs(f1[i] - f[i]) / sc);
  }
  d2 /= h0;
  const double m = std::max(fn, d2);
  const double h1 = (m <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                                 : std::pow(0.01 / m, 0.2);
  return std::min({100.0 * h0, h1, cfg.max_step});
}

}  // namespace

IntegrationResult integrate(const SystemState& init, const ModelParams& p,
                            CavityMode mode, double t_end, double sample_dt,
                            const IntegratorConfig& cfg) {
  if (!(t_end > 0.0)) throw std::invalid_argument("integrate: t_end must be > 0");
  if (!(sample_dt > 0.0))
    throw std::invalid_argument("integrate: sample_dt must be > 0");

  const RhsContext ctx(p);
  const int dim = mode == CavityMode::Full ? flat_dim_full : flat_dim_spin;
  const Stepper st{ctx, mode, dim};

  IntegrationResult res;
  res.traj.params = p;
  res.traj.mode = mode;
  res.traj.sample_dt = sample_dt;

  const std::size_t n_samples =
      static_cast<std::size_t>(std::floor(t_end / sample_dt + 1e-9)) + 1;
  res.traj.t.reserve(n_samples);
  res.traj.states.reserve(n_samples);

  Buf y{}, ynew{}, err{}, ytmp{};
  Buf k1{}, k2{}, k3{}, k4{}, k5{}, k6{}, k7{};
  state_to_flat(init, y.data());

  auto emit = [&](double ts, const double* ys) {
    SystemState s = state_from_flat(ys, mode == CavityMode::Full);
    if (mode == CavityMode::Adiabatic) s.a = ctx.cavity(ys);
    res.traj.t.push_back(ts);
    res.traj.states.push_back(s);
  };

  double t = 0.0;
  std::size_t next_sample = 0;
  emit(0.0, y.data());
  ++next_sample;

  st.eval(y.data(), k1.data());
  if (!all_finite(k1.data(), dim)) {
    res.ok = false;
    res.fail_time = 0.0;
    res.message = "non-finite derivative at initial state";
    return res;
  }
  double h = initial_step(st, y, k1, cfg);
  bool last_rejected = false;

  while (t < t_end - 1e-14 * std::max(1.0, t_end)) {
    h = std::min({h, cfg.max_step, t_end - t});
    if (h < cfg.min_step) {
      res.ok = false;
      res.fail_time = t;
      res.message = "step size underflow";
      return res;
    }

    auto stage = [&](Buf& out, std::initializer_list<std::pair<const Buf*, double>> terms) {
      for (int i = 0; i < dim; ++i) {
        double acc = y[i];
        for (const auto& [k, w] : terms) acc += h * w * (*k)[i];
        out[i] = acc;
      }
    };

    stage(ytmp, {{&k1, a21}});
    st.eval(ytmp.data(), k2.data());
    stage(ytmp, {{&k1, a31}, {&k2, a32}});
    st.eval(ytmp.data(), k3.data());
    stage(ytmp, {{&k1, a41}, {&k2, a42}, {&k3, a43}});
    st.eval(ytmp.data(), k4.data());
    stage(ytmp, {{&k1, a51}, {&k2, a52}, {&k3, a53}, {&k4, a54}});
    st.eval(ytmp.data(), k5.data());
    stage(ytmp, {{&k1, a61}, {&k2, a62}, {&k3, a63}, {&k4, a64}, {&k5, a65}});
    st.eval(ytmp.data(), k6.data());
    stage(ynew, {{&k1, b1}, {&k3, b3}, {&k4, b4}, {&k5, b5}, {&k6, b6}});
    st.eval(ynew.data(), k7.data());

    if (!all_finite(ynew.data(), dim) || !all_finite(k7.data(), dim)) {
      res.ok = false;
      res.fail_time = t;
      res.message = "non-finite state encountered";
      return res;
    }

    for (int i = 0; i < dim; ++i) {
      const double y4 = y[i] + h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                                    e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      err[i] = ynew[i] - y4;
    }
    const double en = error_norm(err, y, ynew, dim, cfg);

    if (en <= 1.0) {
      // Accepted: serve all samples inside (t, t + h] by dense interpolation.
      const double t_new = t + h;
      if (next_sample < n_samples) {
        Buf rc2{}, rc3{}, rc4{}, rc5{};
        for (int i = 0; i < dim; ++i) {
          const double dy = ynew[i] - y[i];
          rc2[i] = dy;
          rc3[i] = h * k1[i] - dy;
          rc4[i] = dy - h * k7[i] - rc3[i];
          rc5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] +
                        d6 * k6[i] + d7 * k7[i]);
        }
        while (next_sample < n_samples) {
          const double ts = next_sample * sample_dt;
          if (ts > t_new + 1e-12 * std::max(1.0, t_new)) break;
          const double th = std::clamp((ts - t) / h, 0.0, 1.0);
          Buf ys{};
          for (int i = 0; i < dim; ++i) {
            const double th1 = 1.0 - th;
            ys[i] = y[i] + th * (rc2[i] +
                                 th1 * (rc3[i] + th * (rc4[i] + th1 * rc5[i])));
          }
          emit(ts, ys.data());
          ++next_sample;
        }
      }
      t = t_new;
      y = ynew;
      k1 = k7;  // first-same-as-last
      ++res.n_steps;
      double fac = 0.9 * std::pow(std::max(en, 1e-16), -0.2);
      fac = std::clamp(fac, 0.2, 5.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      h *= fac;
      last_rejected = false;
    } else {
      ++res.n_rejected;
      last_rejected = true;
      double fac = 0.9 * std::pow(en, -0.2);
      h *= std::clamp(fac, 0.1, 0.9);
    }
  }

  return res;
}

SystemState perturb(const SystemState& s, double magnitude,
                    std::uint64_t seed) {
  if (magnitude == 0.0) return s;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uangle(0.0, 2.0 * pi);

  SystemState out = s;
  for (int i = 0; i < n_species; ++i) {
    const SpinVector& sp = s.spin[i];
    const double n0 =
        std::sqrt(sp.x * sp.x + sp.y * sp.y + sp.z * sp.z);
    const double nx = sp.x / n0, ny = sp.y / n0, nz = sp.z / n0;
    double tx = 0, ty = 0, tz = 0, tn = 0;
    do {
      const double vx = gauss(rng), vy = gauss(rng), vz = gauss(rng);
      const double proj = vx * nx + vy * ny + vz * nz;
      tx = vx - proj * nx;
      ty = vy - proj * ny;
      tz = vz - proj * nz;
      tn = std::sqrt(tx * tx + ty * ty + tz * tz);
    } while (tn < 1e-12);
    double px = sp.x + magnitude * tx / tn;
    double py = sp.y + magnitude * ty / tn;
    double pz = sp.z + magnitude * tz / tn;
    const double pn = std::sqrt(px * px + py * py + pz * pz);
    out.spin[i] = SpinVector{px / pn, py / pn, pz / pn};
  }
  const double psi = uangle(rng);
  out.a = s.a + magnitude * std::complex<double>{std::cos(psi), std::sin(psi)};
  return out;
}

namespace {

void append_double(std::string& line, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  line.append(buf, ptr);
}

}  // namespace

void write_csv(const Trajectory& traj, std::ostream& os,
               const std::vector<std::string>& header_lines) {
  for (const auto& hl : header_lines) os << "# " << hl << "\n";
  os << "t,sx_-1,sy_-1,sz_-1,sx_0,sy_0,sz_0,sx_1,sy_1,sz_1,a_re,a_im\n";
  std::string line;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    line.clear();
    append_double(line, traj.t[k]);
    const SystemState& s = traj.states[k];
    for (int i = 0; i < n_species; ++i) {
      line.push_back(',');
      append_double(line, s.spin[i].x);
      line.push_back(',');
      append_double(line, s.spin[i].y);
      line.push_back(',');
      append_double(line, s.spin[i].z);
    }
    line.push_back(',');
    append_double(line, s.a.real());
    line.push_back(',');
    append_double(line, s.a.imag());
    line.push_back('\n');
    os << line;
  }
}

}  // namespace nrdicke

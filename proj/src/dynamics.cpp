#include "nrdicke/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fftw3.h>
#include <nlohmann/json.hpp>

namespace nrdicke {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kTwoThirdsPi = 2.0 * M_PI / 3.0;

double dist9(const SystemState& a, const SystemState& b) {
  double d2 = 0.0;
  for (int m = 0; m < 3; ++m) {
    const double dx = a.spin[m].x - b.spin[m].x;
    const double dy = a.spin[m].y - b.spin[m].y;
    const double dz = a.spin[m].z - b.spin[m].z;
    d2 += dx * dx + dy * dy + dz * dz;
  }
  return std::sqrt(d2);
}

/// Least-squares slope of y against uniformly indexed samples spaced dt.
double lsq_slope(const std::vector<double>& y, double dt) {
  const double n = static_cast<double>(y.size());
  double si = 0.0, sy = 0.0, sii = 0.0, siy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = static_cast<double>(i);
    si += x;
    sy += y[i];
    sii += x * x;
    siy += x * y[i];
  }
  return (n * siy - si * sy) / (n * sii - si * si) / dt;
}

/// Collective-plane track smoothed by a centered moving average spanning
/// `window` time units.  Returns the smoothed points and their times; empty
/// when the trajectory is shorter than the smoothing window.
struct SmoothTrack {
  std::vector<std::array<double, 2>> xy;
  std::vector<double> t;
};

SmoothTrack smooth_plane_track(const Trajectory& traj, double window) {
  SmoothTrack out;
  const double dt = traj.sample_dt > 0.0 ? traj.sample_dt : 1.0;
  const long half = std::lround(window / (2.0 * dt));
  const long n = static_cast<long>(traj.size());
  if (n < 2 * half + 1) return out;
  std::vector<double> px(n + 1, 0.0), py(n + 1, 0.0);
  for (long i = 0; i < n; ++i) {
    const auto cc = collective_coords(traj.states[i]);
    px[i + 1] = px[i] + cc.xd1;
    py[i + 1] = py[i] + cc.xd2;
  }
  const double width = static_cast<double>(2 * half + 1);
  for (long i = half; i + half < n; ++i) {
    out.xy.push_back({(px[i + half + 1] - px[i - half]) / width,
                      (py[i + half + 1] - py[i - half]) / width});
    out.t.push_back(traj.t[i]);
  }
  return out;
}

/// Unwrapped polar angle along a plane track.
std::vector<double> unwrap_angle(const std::vector<std::array<double, 2>>& xy) {
  std::vector<double> th(xy.size());
  for (std::size_t i = 0; i < xy.size(); ++i) {
    double a = std::atan2(xy[i][1], xy[i][0]);
    if (i > 0) {
      while (a - th[i - 1] > M_PI) a -= kTwoPi;
      while (a - th[i - 1] < -M_PI) a += kTwoPi;
    }
    th[i] = a;
  }
  return th;
}

std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

// ============================================================================
// Trajectory windows and phase angles
// ============================================================================

Trajectory trim_transient(const Trajectory& traj, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw std::invalid_argument("trim_transient: fraction must lie in [0, 1)");
  const std::size_t i0 =
      static_cast<std::size_t>(fraction * static_cast<double>(traj.size()));
  if (traj.size() - i0 < 64)
    throw std::invalid_argument(
        "trim_transient: fewer than 64 samples would remain");
  if (i0 == 0) return traj;
  Trajectory out;
  out.t.assign(traj.t.begin() + static_cast<long>(i0), traj.t.end());
  out.states.assign(traj.states.begin() + static_cast<long>(i0),
                    traj.states.end());
  out.params = traj.params;
  out.mode = traj.mode;
  out.sample_dt = traj.sample_dt;
  return out;
}

std::array<std::vector<double>, 3> phase_angles(const Trajectory& traj) {
  std::array<std::vector<double>, 3> th;
  for (auto& v : th) v.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    for (int m = 0; m < 3; ++m) {
      const auto& s = traj.states[i].spin[m];
      if (std::abs(s.x) + std::abs(s.y) < 1e-6) {
        std::ostringstream os;
        os << "phase_angles: angle undefined at t = " << traj.t[i]
           << " (species index " << m << ")";
        throw std::domain_error(os.str());
      }
      double a = std::atan2(s.y, s.x);
      if (!th[m].empty()) {
        while (a - th[m].back() > M_PI) a -= kTwoPi;
        while (a - th[m].back() < -M_PI) a += kTwoPi;
      }
      th[m].push_back(a);
    }
  }
  return th;
}

// ============================================================================
// Fourier spectra
// ============================================================================

SpectrumReport fourier_spectrum(const std::vector<double>& series, double dt,
                                const SpectrumOptions& opt) {
  if (series.size() < 1024)
    throw std::invalid_argument(
        "fourier_spectrum: at least 1024 samples required");
  if (!(dt > 0.0))
    throw std::invalid_argument("fourier_spectrum: dt must be positive");

  const std::size_t n = series.size();
  const std::size_t nbins = n / 2 + 1;
  SpectrumReport rep;
  rep.resolution = kTwoPi / (static_cast<double>(n) * dt);
  rep.freqs.resize(nbins);
  for (std::size_t k = 0; k < nbins; ++k)
    rep.freqs[k] = static_cast<double>(k) * rep.resolution;

  const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
  if (*lo == *hi) {  // constant series: no peaks, no fundamental
    rep.power.assign(nbins, 0.0);
    return rep;
  }

  double mean = std::accumulate(series.begin(), series.end(), 0.0) /
                static_cast<double>(n);
  std::vector<double> in(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w =
        0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(i) /
                              static_cast<double>(n - 1)));
    in[i] = (series[i] - mean) * w;
  }

  std::vector<std::complex<double>> out(nbins);
  {
    fftw_plan plan;
    {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(),
                                  reinterpret_cast<fftw_complex*>(out.data()),
                                  FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      fftw_destroy_plan(plan);
    }
  }
  rep.power.resize(nbins);
  for (std::size_t k = 0; k < nbins; ++k)
    rep.power[k] = std::norm(out[k]) / static_cast<double>(n);

  // Noise floor: the median catches broadband backgrounds, while a fixed
  // fraction of the strongest line dominates for quiet combs whose true
  // background sits at rounding level below the window sidelobes.
  std::vector<double> sorted(rep.power.begin() + 1, rep.power.end());
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                   sorted.end());
  const double max_power =
      *std::max_element(rep.power.begin() + 1, rep.power.end());
  const double floor_power = std::max(sorted[sorted.size() / 2] * opt.peak_snr,
                                      max_power * opt.floor_rel);

  // floor-passing local maxima with parabolic refinement
  struct RawPeak {
    std::size_t bin;
    double freq, power;
  };
  std::vector<RawPeak> raw;
  for (std::size_t k = 2; k + 1 < nbins; ++k) {
    const double p = rep.power[k];
    if (p <= floor_power) continue;
    if (!(p > rep.power[k - 1] && p >= rep.power[k + 1])) continue;
    const double denom = rep.power[k - 1] - 2.0 * p + rep.power[k + 1];
    double delta = 0.0;
    if (denom != 0.0)
      delta = 0.5 * (rep.power[k - 1] - rep.power[k + 1]) / denom;
    delta = std::clamp(delta, -0.5, 0.5);
    raw.push_back({k, (static_cast<double>(k) + delta) * rep.resolution, p});
  }
  // window sidelobes of strong lines also clear the floor; suppress any
  // local maximum within a few bins of a stronger one
  constexpr long kSuppressBins = 4;
  for (const auto& cand : raw) {
    bool dominated = false;
    for (const auto& other : raw) {
      if (&other == &cand) continue;
      if (std::labs(static_cast<long>(other.bin) -
                    static_cast<long>(cand.bin)) <= kSuppressBins &&
          other.power > cand.power) {
        dominated = true;
        break;
      }
    }
    if (!dominated) rep.peaks.push_back({cand.freq, cand.power});
  }

  // Emergent fundamental: the lowest peak whose odd multiples account for at
  // least 80% of the other peaks.  The allowance grows with the multiple,
  // since a sub-bin error in the refined fundamental scales linearly up the
  // comb, and stays far below the two-unit gap between odd harmonics.
  const double bin_tol = rep.resolution;
  auto odd_match = [&](double f, double f0) {
    const double ratio = f / f0;
    const long k = std::max(std::lround((ratio - 1.0) / 2.0), 0L);
    const double m = static_cast<double>(2 * k + 1);
    const double allowed = std::min(0.5, bin_tol / f0 + 0.01 * m);
    return std::abs(ratio - m) <= allowed;
  };
  for (const auto& cand : rep.peaks) {
    std::size_t matched = 0, others = 0;
    for (const auto& pk : rep.peaks) {
      if (&pk == &cand) continue;
      ++others;
      if (odd_match(pk.freq, cand.freq)) ++matched;
    }
    if (others == 0 ||
        static_cast<double>(matched) >= 0.8 * static_cast<double>(others)) {
      rep.omega0 = cand.freq;
      break;
    }
  }
  if (rep.omega0) {
    std::size_t matched = 0;
    for (const auto& pk : rep.peaks)
      if (odd_match(pk.freq, *rep.omega0)) ++matched;
    rep.odd_harmonic_score =
        static_cast<double>(matched) / static_cast<double>(rep.peaks.size());
  }
  return rep;
}

void write_spectrum_csv(const SpectrumReport& rep, std::ostream& os) {
  os << "freq,power\n";
  os.precision(17);
  for (std::size_t k = 0; k < rep.freqs.size(); ++k)
    os << rep.freqs[k] << ',' << rep.power[k] << '\n';
}

// ============================================================================
// Dwell segmentation
// ============================================================================

DwellRecord dwell_segments(const Trajectory& traj,
                           const std::vector<std::array<double, 2>>& vertices,
                           double smooth_window, double membership_fraction) {
  if (vertices.size() < 2)
    throw std::invalid_argument("dwell_segments: at least two vertices");
  double dmin = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i < vertices.size(); ++i)
    for (std::size_t j = i + 1; j < vertices.size(); ++j)
      dmin = std::min(dmin, std::hypot(vertices[i][0] - vertices[j][0],
                                       vertices[i][1] - vertices[j][1]));
  const double rin = membership_fraction * dmin;

  const SmoothTrack track = smooth_plane_track(traj, smooth_window);
  DwellRecord rec;
  int cur = -1;
  for (std::size_t i = 0; i < track.xy.size(); ++i) {
    int best = -1;
    double bd = std::numeric_limits<double>::max();
    for (std::size_t v = 0; v < vertices.size(); ++v) {
      const double d = std::hypot(track.xy[i][0] - vertices[v][0],
                                  track.xy[i][1] - vertices[v][1]);
      if (d < bd) {
        bd = d;
        best = static_cast<int>(v);
      }
    }
    if (cur < 0 && bd < rin) {
      cur = best;
      if (!rec.visits.empty() && rec.visits.back().vertex == best) {
        // brief excursion out of the same disc: extend the visit
      } else {
        rec.visits.push_back({best, track.t[i], track.t[i]});
      }
    } else if (cur >= 0 && bd > rin) {
      rec.visits.back().exit = track.t[i];
      cur = -1;
    }
  }
  if (cur >= 0 && !rec.visits.empty()) rec.visits.back().exit = track.t.back();

  // direction census over consecutive hops in the plane
  std::size_t ccw = 0, cw = 0;
  for (std::size_t k = 1; k < rec.visits.size(); ++k) {
    const auto& a = vertices[static_cast<std::size_t>(rec.visits[k - 1].vertex)];
    const auto& b = vertices[static_cast<std::size_t>(rec.visits[k].vertex)];
    const double step =
        std::remainder(std::atan2(b[1], b[0]) - std::atan2(a[1], a[0]), kTwoPi);
    if (std::abs(std::abs(step) - M_PI) < 1e-9) continue;  // ambiguous half-turn
    if (step > 0.0)
      ++ccw;
    else
      ++cw;
  }
  if (ccw > 0 && cw == 0)
    rec.chirality = Chirality::CCW;
  else if (cw > 0 && ccw == 0)
    rec.chirality = Chirality::CW;
  else
    rec.chirality = Chirality::Mixed;
  return rec;
}

// ============================================================================
// Lyapunov exponent
// ============================================================================

LyapunovEstimate lyapunov_max(const SystemState& state0, const ModelParams& p,
                              const LyapunovConfig& cfg) {
  const double omega = p.omega_h();
  if (cfg.horizon * omega < 2000.0)
    throw std::invalid_argument("lyapunov_max: horizon below 2000 / Omega");
  const long intervals = std::lround(cfg.horizon / cfg.renorm_interval);
  const long skip = std::lround(cfg.skip_fraction * static_cast<double>(intervals));
  const long seg_len = (intervals - skip) / cfg.n_segments;
  if (seg_len < 1)
    throw std::invalid_argument("lyapunov_max: too many segments");

  SystemState ref = state0;
  SystemState off = perturb(state0, cfg.offset, 99);
  const double d_init = dist9(ref, off);
  for (int m = 0; m < 3; ++m) {
    off.spin[m].x = ref.spin[m].x + (off.spin[m].x - ref.spin[m].x) * cfg.offset / d_init;
    off.spin[m].y = ref.spin[m].y + (off.spin[m].y - ref.spin[m].y) * cfg.offset / d_init;
    off.spin[m].z = ref.spin[m].z + (off.spin[m].z - ref.spin[m].z) * cfg.offset / d_init;
  }

  std::vector<double> seg_means;
  double acc = 0.0;
  long in_seg = 0;
  for (long k = 0; k < skip + static_cast<long>(cfg.n_segments) * seg_len; ++k) {
    auto r1 = integrate(ref, p, CavityMode::Adiabatic, cfg.renorm_interval,
                        cfg.renorm_interval, cfg.integ);
    auto r2 = integrate(off, p, CavityMode::Adiabatic, cfg.renorm_interval,
                        cfg.renorm_interval, cfg.integ);
    if (!r1.ok || !r2.ok) {
      std::ostringstream os;
      os << "lyapunov_max: integration failed near t = "
         << static_cast<double>(k) * cfg.renorm_interval;
      throw std::runtime_error(os.str());
    }
    ref = r1.traj.states.back();
    off = r2.traj.states.back();
    const double d = dist9(ref, off);
    if (k >= skip) {
      acc += std::log(d / cfg.offset);
      if (++in_seg == seg_len) {
        seg_means.push_back(acc / (static_cast<double>(seg_len) * cfg.renorm_interval));
        acc = 0.0;
        in_seg = 0;
      }
    }
    for (int m = 0; m < 3; ++m) {
      off.spin[m].x = ref.spin[m].x + (off.spin[m].x - ref.spin[m].x) * cfg.offset / d;
      off.spin[m].y = ref.spin[m].y + (off.spin[m].y - ref.spin[m].y) * cfg.offset / d;
      off.spin[m].z = ref.spin[m].z + (off.spin[m].z - ref.spin[m].z) * cfg.offset / d;
    }
  }
  LyapunovEstimate est;
  for (double v : seg_means) est.value += v;
  est.value /= static_cast<double>(seg_means.size());
  double var = 0.0;
  for (double v : seg_means) var += (v - est.value) * (v - est.value);
  var /= static_cast<double>(seg_means.size() - 1);
  est.std_error = std::sqrt(var / static_cast<double>(seg_means.size()));
  return est;
}

// ============================================================================
// Attractor classification
// ============================================================================

const char* to_string(AttractorKind kind) {
  switch (kind) {
    case AttractorKind::Stationary: return "stationary";
    case AttractorKind::Chiral: return "chiral";
    case AttractorKind::Swap: return "swap";
    case AttractorKind::Chaotic: return "chaotic";
    case AttractorKind::Unresolved: return "unresolved";
  }
  return "unresolved";
}

const char* to_string(Chirality c) {
  switch (c) {
    case Chirality::CCW: return "ccw";
    case Chirality::CW: return "cw";
    case Chirality::Mixed: return "mixed";
  }
  return "mixed";
}

AttractorVerdict classify_attractor(const Trajectory& traj,
                                    const std::vector<FixedPoint>& fps,
                                    const ModelParams& p,
                                    const ClassifyConfig& cfg) {
  AttractorVerdict verdict;
  const std::size_t n = traj.size();
  if (n < 64) return verdict;
  const double t_window = traj.t.back() - traj.t.front();

  // ---- stage 1: stationary ----
  {
    StationaryMetrics sm;
    sm.residual = stationary_residual(traj.states.back(), p);
    const std::size_t i0 = (9 * n) / 10;
    for (std::size_t i = i0; i < n; ++i)
      sm.displacement =
          std::max(sm.displacement, dist9(traj.states[i], traj.states.back()));
    verdict.stationary = sm;
    if (sm.residual < cfg.stationary_residual &&
        sm.displacement < cfg.stationary_drift) {
      verdict.kind = AttractorKind::Stationary;
      return verdict;
    }
  }

  // ---- stage 2: chiral ----
  bool have_angles = false;
  std::array<std::vector<double>, 3> th;
  try {
    th = phase_angles(traj);
    have_angles = true;
  } catch (const std::domain_error&) {
  }
  if (have_angles) {
    ChiralMetrics cm;
    const double dt = traj.sample_dt > 0.0 ? traj.sample_dt : t_window / static_cast<double>(n - 1);
    double mean_rate = 0.0;
    for (int m = 0; m < 3; ++m) {
      cm.rates[static_cast<std::size_t>(m)] = lsq_slope(th[static_cast<std::size_t>(m)], dt);
      mean_rate += cm.rates[static_cast<std::size_t>(m)] / 3.0;
    }
    for (int m = 0; m < 3; ++m)
      cm.rate_spread = std::max(
          cm.rate_spread,
          std::abs(cm.rates[static_cast<std::size_t>(m)] - mean_rate));
    cm.rate_spread = std::abs(mean_rate) > 0.0
                         ? cm.rate_spread / std::abs(mean_rate)
                         : std::numeric_limits<double>::infinity();
    // subwindow rate scatter
    const std::size_t len = n / static_cast<std::size_t>(cfg.rate_subwindows);
    if (len >= 2) {
      for (int m = 0; m < 3; ++m) {
        std::vector<double> rs;
        for (int k = 0; k < cfg.rate_subwindows; ++k) {
          const std::size_t a = static_cast<std::size_t>(k) * len;
          const std::size_t b = a + len - 1;
          rs.push_back((th[static_cast<std::size_t>(m)][b] -
                        th[static_cast<std::size_t>(m)][a]) /
                       (static_cast<double>(b - a) * dt));
        }
        double rm = 0.0;
        for (double r : rs) rm += r;
        rm /= static_cast<double>(rs.size());
        double rv = 0.0;
        for (double r : rs) rv += (r - rm) * (r - rm);
        rv /= static_cast<double>(rs.size());
        cm.rate_cv = std::max(cm.rate_cv,
                              std::abs(rm) > 0.0
                                  ? std::sqrt(rv) / std::abs(rm)
                                  : std::numeric_limits<double>::infinity());
      }
    }
    // relative-phase lock: circular mean against +-2*pi/3
    for (int a = 0; a < 3; ++a) {
      const int b = (a + 1) % 3;
      double cs = 0.0, sn = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = th[static_cast<std::size_t>(b)][i] -
                         th[static_cast<std::size_t>(a)][i];
        cs += std::cos(d);
        sn += std::sin(d);
      }
      const double mean = std::atan2(sn, cs);
      const double dev =
          std::min(std::abs(std::remainder(mean - kTwoThirdsPi, kTwoPi)),
                   std::abs(std::remainder(mean + kTwoThirdsPi, kTwoPi)));
      cm.lock_residual = std::max(cm.lock_residual, dev);
    }
    // collective-plane radius statistics
    double rsum = 0.0, rsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto cc = collective_coords(traj.states[i]);
      const double r = std::hypot(cc.xd1, cc.xd2);
      rsum += r;
      rsq += r * r;
    }
    cm.radius_mean = rsum / static_cast<double>(n);
    const double rvar =
        std::max(0.0, rsq / static_cast<double>(n) - cm.radius_mean * cm.radius_mean);
    cm.radius_cv =
        cm.radius_mean > 0.0 ? std::sqrt(rvar) / cm.radius_mean : 0.0;
    cm.chirality = mean_rate > 0.0 ? Chirality::CCW : Chirality::CW;
    verdict.chiral = cm;

    const double turns = std::abs(mean_rate) * t_window / kTwoPi;
    if (turns >= cfg.min_turns && cm.rate_spread < cfg.rate_spread_max &&
        cm.rate_cv < cfg.rate_cv_max &&
        cm.lock_residual < cfg.lock_residual_max) {
      verdict.kind = AttractorKind::Chiral;
      return verdict;
    }
  }

  // ---- stage 3: swap ----
  {
    std::vector<std::array<double, 2>> anchors;
    for (const auto& fp : fps)
      if (!is_trivial(fp) && fp.attracting()) {
        const auto cc = collective_coords(fp.state);
        anchors.push_back({cc.xd1, cc.xd2});
      }
    if (anchors.size() >= 2) {
      SwapMetrics sw;
      sw.dwell = dwell_segments(traj, anchors, cfg.smooth_window,
                                cfg.membership_fraction);
      std::vector<int> distinct;
      for (const auto& v : sw.dwell.visits)
        if (std::find(distinct.begin(), distinct.end(), v.vertex) ==
            distinct.end())
          distinct.push_back(v.vertex);
      sw.n_vertices = static_cast<int>(distinct.size());
      // same-vertex return times, pooled over vertices
      std::vector<double> cycles;
      for (int id : distinct) {
        double prev = -1.0;
        for (const auto& v : sw.dwell.visits) {
          if (v.vertex != id) continue;
          if (prev >= 0.0) cycles.push_back(v.entry - prev);
          prev = v.entry;
        }
      }
      if (!cycles.empty()) {
        for (double c : cycles) sw.cycle_period_mean += c;
        sw.cycle_period_mean /= static_cast<double>(cycles.size());
        double var = 0.0;
        for (double c : cycles)
          var += (c - sw.cycle_period_mean) * (c - sw.cycle_period_mean);
        var /= static_cast<double>(cycles.size());
        sw.cycle_period_cv = sw.cycle_period_mean > 0.0
                                 ? std::sqrt(var) / sw.cycle_period_mean
                                 : 0.0;
      }
      // winding rate of the smoothed track
      const SmoothTrack track = smooth_plane_track(traj, cfg.smooth_window);
      if (track.xy.size() >= 64) {
        const auto th_track = unwrap_angle(track.xy);
        const double dt = traj.sample_dt > 0.0 ? traj.sample_dt : 1.0;
        const double w = std::abs(lsq_slope(th_track, dt));
        if (w > 0.0) sw.omega0 = w;
      }
      // cyclic order: constant step through the angle-ranked vertex ids
      bool cyclic = sw.n_vertices >= 2 &&
                    static_cast<int>(sw.dwell.visits.size()) >= sw.n_vertices + 2;
      if (cyclic) {
        std::vector<int> ranked = distinct;
        std::sort(ranked.begin(), ranked.end(), [&](int a, int b) {
          const auto& va = anchors[static_cast<std::size_t>(a)];
          const auto& vb = anchors[static_cast<std::size_t>(b)];
          return std::atan2(va[1], va[0]) < std::atan2(vb[1], vb[0]);
        });
        auto rank_of = [&](int id) {
          return static_cast<int>(std::find(ranked.begin(), ranked.end(), id) -
                                  ranked.begin());
        };
        const int nv = sw.n_vertices;
        int step = -1;
        for (std::size_t k = 1; k < sw.dwell.visits.size() && cyclic; ++k) {
          const int s = ((rank_of(sw.dwell.visits[k].vertex) -
                          rank_of(sw.dwell.visits[k - 1].vertex)) %
                             nv +
                         nv) %
                        nv;
          if (s == 0) {
            cyclic = false;
          } else if (step < 0) {
            step = s;
          } else if (s != step) {
            cyclic = false;
          }
        }
        if (cyclic && step >= 0 && std::gcd(step, nv) != 1) cyclic = false;
      }
      verdict.swap = sw;
      if (cyclic && !cycles.empty() && sw.cycle_period_cv <= cfg.cycle_cv_max) {
        verdict.kind = AttractorKind::Swap;
        return verdict;
      }
    }
  }

  // ---- stage 4: chaotic ----
  try {
    const LyapunovEstimate le = lyapunov_max(traj.states.back(), p, cfg.lyap);
    verdict.lyapunov = le;
    if (le.value > cfg.lyap_thresh * p.omega_h()) {
      verdict.kind = AttractorKind::Chaotic;
      return verdict;
    }
  } catch (const std::exception&) {
    // unresolved is the fallback
  }
  verdict.kind = AttractorKind::Unresolved;
  return verdict;
}

void write_verdict_json(const AttractorVerdict& v, std::ostream& os) {
  nlohmann::json j;
  j["kind"] = to_string(v.kind);
  if (v.stationary) {
    j["stationary"] = {{"residual", v.stationary->residual},
                       {"displacement", v.stationary->displacement}};
  }
  if (v.chiral) {
    const auto& c = *v.chiral;
    j["chiral"] = {{"rates", c.rates},
                   {"rate_spread", c.rate_spread},
                   {"rate_cv", c.rate_cv},
                   {"lock_residual", c.lock_residual},
                   {"radius_mean", c.radius_mean},
                   {"radius_cv", c.radius_cv},
                   {"chirality", to_string(c.chirality)}};
  }
  if (v.swap) {
    const auto& s = *v.swap;
    nlohmann::json visits = nlohmann::json::array();
    for (const auto& visit : s.dwell.visits)
      visits.push_back({visit.vertex, visit.entry, visit.exit});
    j["swap"] = {{"n_vertices", s.n_vertices},
                 {"cycle_period_mean", s.cycle_period_mean},
                 {"cycle_period_cv", s.cycle_period_cv},
                 {"chirality", to_string(s.dwell.chirality)},
                 {"visits", visits}};
    if (s.omega0) j["swap"]["omega0"] = *s.omega0;
  }
  if (v.lyapunov) {
    j["lyapunov"] = {{"value", v.lyapunov->value},
                     {"std_error", v.lyapunov->std_error}};
  }
  os << j.dump(2) << '\n';
}

// ============================================================================
// Symmetry restoration
// ============================================================================

RestorationReport symmetry_restoration(const Trajectory& traj,
                                       const ModelParams& p) {
  (void)p;
  RestorationReport rep;
  const std::size_t n = traj.size();
  if (n == 0) return rep;
  for (std::size_t i = 0; i < n; ++i)
    rep.orbit_scale = std::max(rep.orbit_scale, std::abs(traj.states[i].a));

  // orbit period from the winding rate of the smoothed cavity-plane track
  const double t_window = traj.t.back() - traj.t.front();
  const SmoothTrack track = smooth_plane_track(traj, 63.0);
  std::size_t i0 = 0;
  if (track.xy.size() >= 64) {
    const auto th = unwrap_angle(track.xy);
    const double dt = traj.sample_dt > 0.0 ? traj.sample_dt : 1.0;
    const double w = std::abs(lsq_slope(th, dt));
    if (w > 0.0) {
      const double period = kTwoPi / w;
      if (t_window >= 3.0 * period) {
        rep.period_detected = true;
        rep.period = period;
        const double covered =
            std::floor(t_window / period) * period;
        const double t_start = traj.t.back() - covered;
        while (i0 + 1 < n && traj.t[i0] < t_start) ++i0;
      }
    }
  }

  const double count = static_cast<double>(n - i0);
  for (std::size_t i = i0; i < n; ++i) {
    const auto& s = traj.states[i];
    for (int m = 0; m < 3; ++m) {
      rep.spin_mean[static_cast<std::size_t>(m)][0] += s.spin[m].x / count;
      rep.spin_mean[static_cast<std::size_t>(m)][1] += s.spin[m].y / count;
    }
    rep.cavity_mean[0] += s.a.real() / count;
    rep.cavity_mean[1] += s.a.imag() / count;
  }
  return rep;
}

// ============================================================================
// Critical scaling of the emergent frequency
// ============================================================================

PowerLawFit fit_power_law(const std::vector<double>& x,
                          const std::vector<double>& y) {
  if (x.size() != y.size())
    throw std::invalid_argument("fit_power_law: size mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  if (lx.size() < 2)
    throw std::invalid_argument(
        "fit_power_law: at least two positive points required");
  const double n = static_cast<double>(lx.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  PowerLawFit fit;
  fit.beta = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - fit.beta * sx) / n;
  fit.amplitude = std::exp(intercept);
  double ss = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - (intercept + fit.beta * lx[i]);
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / n);
  return fit;
}

ScalingResult omega0_scaling(double phi, const std::vector<double>& lambdas,
                             const ModelParams& base, const ScalingConfig& cfg) {
  if (lambdas.empty())
    throw std::invalid_argument("omega0_scaling: empty lambda list");
  ModelParams p_phi = base;
  p_phi.phi = phi;
  const ModelParams p_anchor = with_axis(p_phi, SweepAxis::Lambda, cfg.anchor_lambda);

  // branch seed for the exceptional-point scan
  auto roots = find_all_stationary(p_anchor);
  annotate_stability(roots, p_anchor);
  const FixedPoint* seed_root = nullptr;
  for (const auto& r : roots)
    if (!is_trivial(r) && r.attracting()) {
      seed_root = &r;
      break;
    }
  if (seed_root == nullptr)
    throw std::runtime_error(
        "omega0_scaling: no attracting root at the anchor coupling");

  std::vector<double> sorted = lambdas;
  std::sort(sorted.begin(), sorted.end());
  const double scan_lo = sorted.front() - cfg.ep_scan_margin;
  const EpScanResult scan =
      detect_ep_tracked(SweepAxis::Lambda, cfg.anchor_lambda, scan_lo,
                        cfg.ep_scan_points, p_phi, seed_root->state, cfg.ep);
  if (scan.eps.empty())
    throw std::runtime_error("omega0_scaling: no exceptional point located");
  ScalingResult result;
  result.lambda_star = scan.eps.front().param;

  // sequential continuation of the attractor toward the branch end
  SystemState state = perturb(np_state(), cfg.kick, cfg.seed);
  bool first = true;
  for (double lam : sorted) {
    const ModelParams p = with_axis(p_phi, SweepAxis::Lambda, lam);
    const double settle = first ? cfg.settle_first : cfg.settle;
    first = false;
    auto rs = integrate(state, p, CavityMode::Adiabatic, settle, settle);
    if (!rs.ok) throw std::runtime_error("omega0_scaling: settle failed");
    state = rs.traj.states.back();
    auto rw = integrate(state, p, CavityMode::Adiabatic, cfg.window, cfg.sample_dt);
    if (!rw.ok) throw std::runtime_error("omega0_scaling: window failed");
    state = rw.traj.states.back();

    ScalingPoint point;
    point.lambda = lam;
    const SmoothTrack track = smooth_plane_track(rw.traj, cfg.smooth_window);
    if (track.xy.size() >= 64) {
      const auto th = unwrap_angle(track.xy);
      const double w = std::abs(lsq_slope(th, cfg.sample_dt));
      if (w * cfg.window >= cfg.min_turns * kTwoPi) point.omega0 = w;
    }
    result.points.push_back(point);
  }

  std::vector<double> xs, ys;
  for (const auto& pt : result.points)
    if (pt.omega0 && result.lambda_star > pt.lambda) {
      xs.push_back(result.lambda_star - pt.lambda);
      ys.push_back(*pt.omega0);
    }
  if (xs.size() < 4)
    throw std::runtime_error(
        "omega0_scaling: fewer than four resolved points");
  const PowerLawFit fit = fit_power_law(xs, ys);
  result.beta = fit.beta;
  result.amplitude = fit.amplitude;
  return result;
}

}  // namespace nrdicke

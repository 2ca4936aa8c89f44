#include "nrdicke/stability.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>

namespace nrdicke {

namespace {

using Eig6 = std::array<std::complex<double>, 6>;

Eig6 eigenvalues_of(const Mat6& M) {
  Eigen::EigenSolver<Mat6> es(M, /*computeEigenvectors=*/false);
  Eig6 out;
  for (int i = 0; i < 6; ++i) out[i] = es.eigenvalues()[i];
  return out;
}

void sort_by_re_im(Eig6& e) {
  std::sort(e.begin(), e.end(), [](auto a, auto b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
}

/// Closest pair statistics: indices, distance, and the splitting balance
/// |dIm| - |dRe| whose sign flips when a conjugate-spaced pair coalesces and
/// re-splits along the real direction.
struct PairStat {
  int i{0}, j{1};
  double gap{0.0};
  double balance{0.0};
};

PairStat closest_pair(const Eig6& e) {
  PairStat best;
  best.gap = std::numeric_limits<double>::max();
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) {
      const double gap = std::abs(e[i] - e[j]);
      if (gap < best.gap) {
        best = PairStat{i, j, gap,
                        std::abs(e[i].imag() - e[j].imag()) -
                            std::abs(e[i].real() - e[j].real())};
      }
    }
  return best;
}

}  // namespace

Mat6 dyn_matrix_np(const ModelParams& p) {
  const double lambda = p.lambda_h();
  const double omega = p.omega_h();
  const double denom = p.omega_c * p.omega_c + p.kappa * p.kappa;
  Mat6 M = Mat6::Zero();
  for (int i = 0; i < 3; ++i) {
    M(i, i) = -p.gamma;
    M(3 + i, 3 + i) = -p.gamma;
    M(i, 3 + i) = -omega;
    M(3 + i, i) = omega;
  }
  // B block in descending species order: row species m = 1 - p.
  for (int pp = 0; pp < 3; ++pp)
    for (int q = 0; q < 3; ++q)
      M(3 + pp, q) += -lambda * lambda / denom * d_coupling((q - pp) * p.phi, p);
  return M;
}

Mat6 dyn_matrix_at(const FixedPoint& fp, const ModelParams& p) {
  return reduced_jacobian(reduced_from_state(fp.state), p);
}

std::array<std::complex<double>, 6> mu_nu_np_analytic(const ModelParams& p) {
  const double lambda = p.lambda_h();
  const double omega = p.omega_h();
  const double denom = p.omega_c * p.omega_c + p.kappa * p.kappa;
  const std::complex<double> rootP =
      std::sqrt(std::complex<double>(p_function(p.phi, p), 0.0));
  std::array<std::complex<double>, 6> out;
  out[0] = {-p.gamma, omega};
  out[1] = {-p.gamma, -omega};
  int k = 2;
  for (double branch : {+1.0, -1.0}) {
    const std::complex<double> arg =
        omega * omega -
        lambda * lambda * omega * (3.0 * p.omega_c + branch * rootP) /
            (2.0 * denom);
    const std::complex<double> w = std::sqrt(arg);
    out[k++] = std::complex<double>{-p.gamma, 0.0} +
               std::complex<double>{0.0, 1.0} * w;
    out[k++] = std::complex<double>{-p.gamma, 0.0} -
               std::complex<double>{0.0, 1.0} * w;
  }
  return out;
}

double p_function(double phi, const ModelParams& p) {
  const double c2 = std::cos(2.0 * phi);
  const double s = std::sin(phi);
  const double t = 2.0 * c2 + 1.0;
  return p.omega_c * p.omega_c * t * t -
         8.0 * p.kappa * p.kappa * s * s * (c2 + 2.0);
}

std::vector<double> phi_c(const ModelParams& p) {
  std::vector<double> out;
  if (p.kappa == 0.0) return out;  // P only touches zero: no sign change
  const double ratio =
      3.0 * p.kappa / std::sqrt(p.kappa * p.kappa + p.omega_c * p.omega_c);
  for (double inner : {1.0 + ratio, 1.0 - ratio}) {
    if (inner < 0.0) continue;
    const double val = 0.5 * std::sqrt(inner);
    if (val > 1.0) continue;
    out.push_back(std::acos(val));
    out.push_back(std::acos(-val));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<double> lambda_c(double phi, const ModelParams& p) {
  const double omega = p.omega_h();
  const double P = p_function(phi, p);
  if (P < 0.0) return std::nullopt;
  const double denom = p.omega_c * p.omega_c + p.kappa * p.kappa;
  return std::sqrt(2.0 * omega * denom / (3.0 * p.omega_c + std::sqrt(P)));
}

StabilityReport stability_report(const Mat6& M, const SpectralDefaults& defs) {
  Eigen::EigenSolver<Mat6> es(M, /*computeEigenvectors=*/true);
  StabilityReport rep;
  Eig6 e;
  for (int i = 0; i < 6; ++i) e[i] = es.eigenvalues()[i];
  sort_by_re_im(e);
  rep.eigenvalues = e;
  rep.max_re = e[5].real();
  rep.stable = rep.max_re < -defs.stab_tol;
  rep.marginal = std::abs(rep.max_re) <= defs.stab_tol;
  rep.min_gap = closest_pair(e).gap;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(es.eigenvectors());
  const auto& sv = svd.singularValues();
  rep.eigvec_cond = sv(0) / std::max(sv(sv.size() - 1), 1e-300);
  rep.ep_flag = rep.min_gap < defs.ep_tol && rep.eigvec_cond > defs.cond_thresh;
  return rep;
}

void annotate_stability(std::vector<FixedPoint>& roots, const ModelParams& p,
                        const SpectralDefaults& defs) {
  for (FixedPoint& fp : roots) {
    // Intrinsic tangent-space matrix: same spectrum as the chart Jacobian at
    // any fixed point, but defined at equatorial roots too.
    const StabilityReport rep = stability_report(tangent_jacobian(fp.state, p), defs);
    fp.has_stability = true;
    fp.stable = rep.stable;
    fp.marginal = rep.marginal;
    fp.max_re = rep.max_re;
    fp.eigenvalues = rep.eigenvalues;
  }
}

// ============================================================================
// Parameter paths
// ============================================================================

ModelParams with_axis(const ModelParams& base, SweepAxis axis, double value) {
  ModelParams p = base;
  if (axis == SweepAxis::Phi) {
    p.phi = value;
    return p;
  }
  const double ref = *std::max_element(base.lam.begin(), base.lam.end());
  for (int i = 0; i < n_species; ++i)
    p.lam[i] = ref > 0.0 ? base.lam[i] / ref * value : value;
  return p;
}

namespace {

/// Matrix provider along a path; returns false when the root is lost.
using MatrixAt = std::function<bool(double, Mat6&)>;

class EpScanner {
 public:
  EpScanner(const MatrixAt& matrix_at, const EpScanConfig& cfg)
      : matrix_at_(matrix_at), cfg_(cfg) {}

  EpScanResult run(double lo, double hi, int n) {
    if (n < 2) throw std::invalid_argument("detect_ep: need at least 2 points");
    EpScanResult result;

    double prev_t = lo, prev_bal = 0.0;
    if (!balance_at(lo, prev_bal)) {
      result.lost_track_at = lo;
      return result;
    }
    for (int k = 1; k < n; ++k) {
      const double t = lo + (hi - lo) * k / (n - 1);
      double bal = 0.0;
      if (!balance_at(t, bal)) {
        // The root disappeared inside (prev_t, t), typically at a fold.
        // Resolve the existence boundary, then creep up to it looking for a
        // coalescence just before the root is lost.
        const double edge = existence_edge(prev_t, t);
        approach_edge(prev_t, prev_bal, edge, result);
        result.lost_track_at = edge;
        return result;
      }
      if ((prev_bal > 0.0) != (bal > 0.0))
        refine_candidate(prev_t, prev_bal, t, result);
      prev_t = t;
      prev_bal = bal;
    }
    return result;
  }

 private:
  bool balance_at(double t, double& bal) {
    Mat6 M;
    if (!matrix_at_(t, M)) return false;
    bal = closest_pair(eigenvalues_of(M)).balance;
    return true;
  }

  /// Bisects the boundary between a solvable point and an unsolvable one.
  double existence_edge(double good, double bad) {
    for (int it = 0; it < 80; ++it) {
      if (std::abs(bad - good) < 1e-15 * std::max(1.0, std::abs(good))) break;
      const double mid = 0.5 * (good + bad);
      double bal = 0.0;
      if (balance_at(mid, bal))
        good = mid;
      else
        bad = mid;
    }
    return good;
  }

  /// Walks geometrically from `from` toward the existence edge; brackets any
  /// balance sign change on the way.
  void approach_edge(double from, double from_bal, double edge,
                     EpScanResult& result) {
    double prev_t = from, prev_bal = from_bal;
    const double span = edge - from;
    for (int j = 1; j <= 46; ++j) {
      const double t = edge - span * std::ldexp(1.0, -j);
      if (t == prev_t || t == edge) break;
      double bal = 0.0;
      if (!balance_at(t, bal)) break;
      if ((prev_bal > 0.0) != (bal > 0.0))
        refine_candidate(prev_t, prev_bal, t, result);
      prev_t = t;
      prev_bal = bal;
    }
  }

  /// Bisects a bracketed balance sign change and records a confirmed EP.
  void refine_candidate(double a, double bal_a, double b,
                        EpScanResult& result) {
    for (int it = 0; it < 90; ++it) {
      if (std::abs(b - a) < 1e-15 * std::max(1.0, std::abs(b))) break;
      const double mid = 0.5 * (a + b);
      double bal_mid = 0.0;
      if (!balance_at(mid, bal_mid)) break;
      if ((bal_a > 0.0) != (bal_mid > 0.0)) {
        b = mid;
      } else {
        a = mid;
        bal_a = bal_mid;
      }
    }
    const double loc = 0.5 * (a + b);
    Mat6 M;
    if (!matrix_at_(loc, M)) return;
    const StabilityReport rep = stability_report(M, cfg_.defs);
    if (!rep.ep_flag) return;
    const PairStat ps = closest_pair(rep.eigenvalues);
    EpPoint ep;
    ep.param = loc;
    ep.min_gap = rep.min_gap;
    ep.eigvec_cond = rep.eigvec_cond;
    ep.value = 0.5 * (rep.eigenvalues[ps.i] + rep.eigenvalues[ps.j]);
    ep.max_re = rep.max_re;
    result.eps.push_back(ep);
  }

  const MatrixAt& matrix_at_;
  const EpScanConfig& cfg_;
};

EpScanResult scan_for_eps(const MatrixAt& matrix_at, double lo, double hi,
                          int n, const EpScanConfig& cfg) {
  return EpScanner(matrix_at, cfg).run(lo, hi, n);
}

}  // namespace

EpScanResult detect_ep_np(SweepAxis axis, double lo, double hi, int n,
                          const ModelParams& base, const EpScanConfig& cfg) {
  MatrixAt matrix_at = [&base, axis](double t, Mat6& M) {
    const ModelParams p = with_axis(base, axis, t);
    // The trivial state is stationary at every parameter value; no tracking.
    M = reduced_jacobian(ReducedChart{}, p);
    return true;
  };
  return scan_for_eps(matrix_at, lo, hi, n, cfg);
}

namespace {

/// Newton continuation of one root along a parameter path.  Each solve seeds
/// from the nearest previously solved point; a solution jumping further than
/// the trust radius (a hop onto an unrelated root) counts as lost tracking.
class RootTracker {
 public:
  RootTracker(const ModelParams& base, SweepAxis axis, double t0,
              const SystemState& root0)
      : base_(base), axis_(axis) {
    solved_.emplace_back(t0, root0);
  }

  bool solve(double t, SystemState& out, ModelParams& p) {
    const auto nearest = std::min_element(
        solved_.begin(), solved_.end(), [t](const auto& a, const auto& b) {
          return std::abs(a.first - t) < std::abs(b.first - t);
        });
    p = with_axis(base_, axis_, t);
    // Machine-precision roots: near an EP the defective pair amplifies any
    // root error as its square root, so a sloppy residual floors the
    // measurable eigenvalue gap far above the solver's actual limit.
    NewtonOptions opts;
    opts.tol = 1e-14;
    opts.stall_accept = 1e-10;
    const auto fp = newton_fixed_point(nearest->second, p, opts);
    if (!fp) return false;
    out = fp->state;
    if (spin_distance(out, nearest->second) > trust_radius_) return false;
    if (solved_.size() >= 1024)
      solved_.erase(solved_.begin(), solved_.begin() + 512);
    solved_.emplace_back(t, out);
    return true;
  }

 private:
  static double spin_distance(const SystemState& a, const SystemState& b) {
    double d = 0.0;
    for (int i = 0; i < n_species; ++i) {
      d = std::max(d, std::abs(a.spin[i].x - b.spin[i].x));
      d = std::max(d, std::abs(a.spin[i].y - b.spin[i].y));
      d = std::max(d, std::abs(a.spin[i].z - b.spin[i].z));
    }
    return d;
  }

  ModelParams base_;
  SweepAxis axis_;
  std::vector<std::pair<double, SystemState>> solved_;
  static constexpr double trust_radius_ = 0.5;
};

}  // namespace

EpScanResult detect_ep_tracked(SweepAxis axis, double lo, double hi, int n,
                               const ModelParams& base,
                               const SystemState& start_root,
                               const EpScanConfig& cfg) {
  RootTracker tracker(base, axis, lo, start_root);
  MatrixAt matrix_at = [&tracker](double t, Mat6& M) {
    SystemState s;
    ModelParams p;
    if (!tracker.solve(t, s, p)) return false;
    M = tangent_jacobian(s, p);
    return true;
  };
  return scan_for_eps(matrix_at, lo, hi, n, cfg);
}

// ============================================================================
// Spectrum flows
// ============================================================================

namespace {

/// Reorders `next` to minimize total displacement from `prev` (all 720
/// pairings of six values; exact assignment).
Eig6 match_continuity(const Eig6& prev, const Eig6& next) {
  std::array<int, 6> idx{0, 1, 2, 3, 4, 5};
  std::array<int, 6> best = idx;
  double best_cost = std::numeric_limits<double>::max();
  do {
    double cost = 0.0;
    for (int i = 0; i < 6; ++i) {
      cost += std::abs(next[idx[i]] - prev[i]);
      if (cost >= best_cost) break;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = idx;
    }
  } while (std::next_permutation(idx.begin(), idx.end()));
  Eig6 out;
  for (int i = 0; i < 6; ++i) out[i] = next[best[i]];
  return out;
}

SpectrumFlow flow_impl(SweepAxis axis, double lo, double hi, int n,
                       const MatrixAt& matrix_at) {
  SpectrumFlow flow;
  flow.axis = axis;
  for (int k = 0; k < n; ++k) {
    const double t = n == 1 ? lo : lo + (hi - lo) * k / (n - 1);
    Mat6 M;
    if (!matrix_at(t, M)) {
      flow.lost_track_at = t;
      break;
    }
    Eig6 e = eigenvalues_of(M);
    if (flow.eigenvalues.empty())
      sort_by_re_im(e);
    else
      e = match_continuity(flow.eigenvalues.back(), e);
    flow.param.push_back(t);
    flow.eigenvalues.push_back(e);
  }
  return flow;
}

}  // namespace

SpectrumFlow spectrum_flow_np(SweepAxis axis, double lo, double hi, int n,
                              const ModelParams& base) {
  MatrixAt matrix_at = [&base, axis](double t, Mat6& M) {
    M = reduced_jacobian(ReducedChart{}, with_axis(base, axis, t));
    return true;
  };
  return flow_impl(axis, lo, hi, n, matrix_at);
}

SpectrumFlow spectrum_flow_tracked(SweepAxis axis, double lo, double hi, int n,
                                   const ModelParams& base,
                                   const SystemState& start_root) {
  RootTracker tracker(base, axis, lo, start_root);
  MatrixAt matrix_at = [&tracker](double t, Mat6& M) {
    SystemState s;
    ModelParams p;
    if (!tracker.solve(t, s, p)) return false;
    M = tangent_jacobian(s, p);
    return true;
  };
  return flow_impl(axis, lo, hi, n, matrix_at);
}

namespace {

void append_double(std::string& line, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  line.append(buf, ptr);
}

}  // namespace

void write_spectrum_csv(const SpectrumFlow& flow, std::ostream& os,
                        const std::vector<std::string>& header_lines) {
  for (const auto& hl : header_lines) os << "# " << hl << "\n";
  os << "param";
  for (int i = 1; i <= 6; ++i) os << ",re_" << i;
  for (int i = 1; i <= 6; ++i) os << ",im_" << i;
  os << "\n";
  std::string line;
  for (std::size_t k = 0; k < flow.param.size(); ++k) {
    line.clear();
    append_double(line, flow.param[k]);
    for (int i = 0; i < 6; ++i) {
      line.push_back(',');
      append_double(line, flow.eigenvalues[k][i].real());
    }
    for (int i = 0; i < 6; ++i) {
      line.push_back(',');
      append_double(line, flow.eigenvalues[k][i].imag());
    }
    line.push_back('\n');
    os << line;
  }
}

}  // namespace nrdicke

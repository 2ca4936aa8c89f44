// Tests for dynamical matrices, the closed-form trivial-state spectrum,
// instability boundaries, and exceptional-point detection.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nrdicke/model.hpp"
#include "nrdicke/stability.hpp"
#include "nrdicke/stationary.hpp"

using namespace nrdicke;

namespace {

constexpr double phi_frust = 2.0 * pi / 3.0;

void sort_eigs(std::vector<std::complex<double>>& v) {
  std::sort(v.begin(), v.end(),
            [](const std::complex<double>& a, const std::complex<double>& b) {
              if (std::abs(a.real() - b.real()) > 1e-7) return a.real() < b.real();
              return a.imag() < b.imag();
            });
}

std::vector<std::complex<double>> eigs_of(const Mat6& M) {
  Eigen::EigenSolver<Mat6> es(M, false);
  std::vector<std::complex<double>> v;
  for (int i = 0; i < 6; ++i) v.push_back(es.eigenvalues()[i]);
  sort_eigs(v);
  return v;
}

}  // namespace

TEST_CASE("analytic trivial-state matrix equals the chart Jacobian at the origin") {
  for (const auto& [lam, phi, gamma] :
       {std::tuple{10.0, 0.7, 0.05}, {25.0, 2.2, 0.0}, {3.0, 1.0, 0.3}}) {
    const ModelParams p = make_params(lam, phi, gamma);
    const Mat6 a = dyn_matrix_np(p);
    const Mat6 b = reduced_jacobian(ReducedChart{}, p);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("numeric dynamical matrix at the trivial root matches the analytic one") {
  const ModelParams p = make_params(10.0, 1.0);
  auto roots = find_all_stationary(p);
  bool seen = false;
  for (const auto& r : roots) {
    if (!is_trivial(r)) continue;
    bool all_down = true;
    for (const auto& sp : r.state.spin)
      if (sp.z > 0.0) all_down = false;
    if (!all_down) continue;
    seen = true;
    const Mat6 numeric = dyn_matrix_at(r, p);
    CHECK((numeric - dyn_matrix_np(p)).cwiseAbs().maxCoeff() < 1e-8);
  }
  CHECK(seen);
}

TEST_CASE("closed-form trivial spectrum agrees with direct eigenvalues") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uphi(0.05, pi - 0.05);
  std::uniform_real_distribution<double> ulam(1.0, 30.0);
  std::uniform_real_distribution<double> ugam(0.0, 0.3);
  std::uniform_real_distribution<double> ukap(0.0, 400.0);
  for (int t = 0; t < 100; ++t) {
    ModelParams p = make_params(ulam(rng), uphi(rng), ugam(rng));
    p.kappa = ukap(rng);
    const auto ana = mu_nu_np_analytic(p);
    std::vector<std::complex<double>> a(ana.begin(), ana.end());
    sort_eigs(a);
    const auto b = eigs_of(dyn_matrix_np(p));
    for (int i = 0; i < 6; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-9);
  }
}

TEST_CASE("spin damping enters the trivial spectrum as a rigid real shift") {
  const double gamma = 0.11;
  const ModelParams p0 = make_params(17.0, 1.3, 0.0);
  const ModelParams pg = make_params(17.0, 1.3, gamma);
  CHECK((dyn_matrix_np(pg) - dyn_matrix_np(p0) +
         gamma * Mat6::Identity())
            .cwiseAbs()
            .maxCoeff() < 1e-14);
  const auto a0 = mu_nu_np_analytic(p0);
  const auto ag = mu_nu_np_analytic(pg);
  std::vector<std::complex<double>> v0(a0.begin(), a0.end()),
      vg(ag.begin(), ag.end());
  sort_eigs(v0);
  sort_eigs(vg);
  for (int i = 0; i < 6; ++i)
    CHECK(std::abs(vg[i] - (v0[i] - gamma)) < 1e-12);
}

TEST_CASE("coupling kernel annihilates the expected null direction") {
  // The y-x block of the trivial-state matrix is Omega I + B; the vector
  // (1, -2 cos phi, 1) spans ker B, which produces the bare -gamma +- i Omega
  // eigenvalue pair at every coupling strength.
  for (const auto& [lam, phi] : {std::pair{17.0, 1.3}, {40.0, 0.4}, {8.0, 2.7}}) {
    const ModelParams p = make_params(lam, phi, 0.07);
    const Mat6 M = dyn_matrix_np(p);
    const Eigen::Matrix3d B =
        M.block<3, 3>(3, 0) - p.omega_h() * Eigen::Matrix3d::Identity();
    const Eigen::Vector3d v(1.0, -2.0 * std::cos(phi), 1.0);
    CHECK((B * v).norm() < 1e-12 * std::max(1.0, B.norm()));
  }
}

TEST_CASE("branch discriminant") {
  const ModelParams p = make_params(12.0, 1.0, 0.0);

  SUBCASE("frozen values at the benchmark cavity") {
    CHECK(p_function(pi / 2, p) == doctest::Approx(70000.0).epsilon(1e-12));
    CHECK(p_function(phi_frust, p) == doctest::Approx(-202500.0).epsilon(1e-12));
    CHECK(p_function(0.0, p) ==
          doctest::Approx(9.0 * p.omega_c * p.omega_c).epsilon(1e-12));
  }

  SUBCASE("equivalent single-term form") {
    // (2 cos 2phi + 1)^2 = 9 - 8 sin^2(phi) (cos 2phi + 2) collapses P to
    // 9 omega_c^2 - 8 sin^2(phi) (cos 2phi + 2) (omega_c^2 + kappa^2).
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uphi(0.0, pi);
    std::uniform_real_distribution<double> ukap(0.0, 400.0);
    for (int t = 0; t < 200; ++t) {
      ModelParams q = p;
      q.kappa = ukap(rng);
      const double phi = uphi(rng);
      const double s2 = std::sin(phi) * std::sin(phi);
      const double alt = 9.0 * q.omega_c * q.omega_c -
                         8.0 * s2 * (std::cos(2.0 * phi) + 2.0) *
                             (q.omega_c * q.omega_c + q.kappa * q.kappa);
      CHECK(p_function(phi, q) ==
            doctest::Approx(alt).epsilon(1e-10).scale(1e-6));
    }
  }
}

TEST_CASE("band-edge angles") {
  const ModelParams p = make_params(12.0, 1.0, 0.0);

  SUBCASE("frozen roots at the benchmark cavity") {
    const auto roots = phi_c(p);
    REQUIRE(roots.size() == 4);
    const double expected[] = {0.8199146577, 1.3839995284, 1.7575931252,
                               2.3216779959};
    for (int i = 0; i < 4; ++i)
      CHECK(roots[i] == doctest::Approx(expected[i]).epsilon(1e-9));
    CHECK(std::is_sorted(roots.begin(), roots.end()));
  }

  SUBCASE("each root is a sign change of the discriminant") {
    for (double v : phi_c(p))
      CHECK(p_function(v - 1e-4, p) * p_function(v + 1e-4, p) < 0.0);
  }

  SUBCASE("root count follows the decay-to-frequency ratio") {
    // Four angles while kappa / omega_c < 1 / (2 sqrt(2)), two beyond.
    ModelParams q = p;
    q.kappa = 170.0;  // ratio 0.34, below the threshold 0.3536
    CHECK(phi_c(q).size() == 4);
    q.kappa = 185.0;  // ratio 0.37
    CHECK(phi_c(q).size() == 2);
    q.kappa = 0.0;  // P >= 0 everywhere: tangencies, not crossings
    CHECK(phi_c(q).empty());
  }
}

TEST_CASE("critical coupling of the trivial state") {
  const ModelParams p = make_params(12.0, 1.0, 0.0);
  const double denom = p.omega_c * p.omega_c + p.kappa * p.kappa;

  SUBCASE("closed form survives the removable points") {
    // At phi = 0 and pi, P = 9 omega_c^2 exactly and the rationalized form
    // reduces to sqrt(Omega (omega_c^2 + kappa^2) / (3 omega_c)).
    const double expected = std::sqrt(p.omega_h() * denom / (3.0 * p.omega_c));
    const auto at0 = lambda_c(0.0, p);
    const auto atpi = lambda_c(pi, p);
    REQUIRE(at0.has_value());
    REQUIRE(atpi.has_value());
    CHECK(*at0 == doctest::Approx(expected).epsilon(1e-12));
    CHECK(*atpi == doctest::Approx(expected).epsilon(1e-12));
    CHECK(*at0 == doctest::Approx(13.4783777461).epsilon(1e-9));
  }

  SUBCASE("frozen value at the orthogonal phase") {
    const auto lc = lambda_c(pi / 2, p);
    REQUIRE(lc.has_value());
    CHECK(*lc == doctest::Approx(17.5743055972).epsilon(1e-9));
  }

  SUBCASE("absent inside the always-unstable bands") {
    CHECK_FALSE(lambda_c(1.0, p).has_value());        // first band
    CHECK_FALSE(lambda_c(phi_frust, p).has_value());  // second band
    // The two bands are separated by a reentrant window around pi/2.
    CHECK(lambda_c(1.5, p).has_value());
  }

  SUBCASE("finite limit at the band edge") {
    const auto edges = phi_c(p);
    REQUIRE_FALSE(edges.empty());
    const double limit =
        std::sqrt(2.0 * p.omega_h() * denom / (3.0 * p.omega_c));
    const auto lc = lambda_c(edges[0] - 1e-12, p);
    REQUIRE(lc.has_value());
    CHECK(*lc == doctest::Approx(limit).epsilon(1e-4));
  }

  SUBCASE("marks the loss of stability at zero damping") {
    const double lc = *lambda_c(pi / 2, p);
    const auto below =
        stability_report(dyn_matrix_np(make_params(lc - 0.1, pi / 2, 0.0)));
    CHECK(below.marginal);
    CHECK(std::abs(below.max_re) < 1e-10);
    const auto above =
        stability_report(dyn_matrix_np(make_params(lc + 0.1, pi / 2, 0.0)));
    CHECK(above.max_re > 0.05);
    CHECK_FALSE(above.stable);
    CHECK_FALSE(above.marginal);
  }
}

TEST_CASE("stability report on synthetic matrices") {
  auto diag = [](std::array<double, 6> d) {
    Mat6 M = Mat6::Zero();
    for (int i = 0; i < 6; ++i) M(i, i) = d[i];
    return M;
  };

  SUBCASE("clean stable spectrum") {
    const auto rep = stability_report(diag({-1, -2, -3, -4, -5, -6}));
    CHECK(rep.stable);
    CHECK_FALSE(rep.marginal);
    CHECK_FALSE(rep.ep_flag);
    CHECK(rep.max_re == doctest::Approx(-1.0));
    CHECK(rep.min_gap == doctest::Approx(1.0));
    CHECK(rep.eigvec_cond < 10.0);
    CHECK(std::is_sorted(rep.eigenvalues.begin(), rep.eigenvalues.end(),
                         [](const std::complex<double>& a,
                            const std::complex<double>& b) {
                           return a.real() < b.real();
                         }));
  }

  SUBCASE("dead band around zero") {
    CHECK(stability_report(diag({-1, -2, -3, -4, -5, -1e-9})).marginal);
    CHECK_FALSE(stability_report(diag({-1, -2, -3, -4, -5, -1e-9})).stable);
    CHECK(stability_report(diag({-1, -2, -3, -4, -5, 1e-9})).marginal);
    const auto unstable = stability_report(diag({-1, -2, -3, -4, -5, 1e-6}));
    CHECK_FALSE(unstable.stable);
    CHECK_FALSE(unstable.marginal);
  }

  SUBCASE("defective pair raises the coalescence flag") {
    Mat6 M = diag({-1, -1, -2, -3, -4, -5});
    M(0, 1) = 1.0;  // Jordan block on the repeated eigenvalue
    const auto rep = stability_report(M);
    CHECK(rep.min_gap < 1e-4);
    CHECK(rep.eigvec_cond > 1e6);
    CHECK(rep.ep_flag);
  }
}

TEST_CASE("axis substitution") {
  ModelParams base = make_params(10.0, 0.9);
  base.lam = {10.0, 20.0, 40.0};

  SUBCASE("phase axis only touches the phase") {
    const ModelParams q = with_axis(base, SweepAxis::Phi, 1.7);
    CHECK(q.phi == 1.7);
    CHECK(q.lam == base.lam);
  }

  SUBCASE("coupling axis rescales all couplings, preserving ratios") {
    const ModelParams q = with_axis(base, SweepAxis::Lambda, 60.0);
    CHECK(q.lam[0] == doctest::Approx(15.0));
    CHECK(q.lam[1] == doctest::Approx(30.0));
    CHECK(q.lam[2] == doctest::Approx(60.0));
    CHECK(q.phi == base.phi);
  }
}

TEST_CASE("trivial-branch exceptional points sit at the band-edge angles") {
  const ModelParams p = make_params(12.0, 1.0, 0.0);
  const auto res = detect_ep_np(SweepAxis::Phi, 0.2, 2.9, 271, p);
  const auto edges = phi_c(p);

  REQUIRE(res.eps.size() == 4);
  CHECK_FALSE(res.lost_track_at.has_value());

  const double denom = p.omega_c * p.omega_c + p.kappa * p.kappa;
  const double lam = p.lambda_h();
  const double im_expected =
      std::sqrt(1.0 - 3.0 * lam * lam * p.omega_c / (2.0 * denom));
  for (std::size_t i = 0; i < res.eps.size(); ++i) {
    const auto& ep = res.eps[i];
    CHECK(std::abs(ep.param - edges[i]) < 1e-6);
    CHECK(ep.min_gap < 1e-4);
    CHECK(ep.eigvec_cond > 1e6);
    // Two purely imaginary eigenvalues coalesce on the stability edge.
    CHECK(std::abs(ep.value.real()) < 1e-6);
    CHECK(std::abs(ep.value.imag()) ==
          doctest::Approx(im_expected).epsilon(1e-3));
    CHECK(std::abs(ep.max_re) < 1e-6);
  }

  SUBCASE("tangencies of the discriminant are not reported") {
    ModelParams q = p;
    q.kappa = 0.0;
    const auto none = detect_ep_np(SweepAxis::Phi, 0.2, 2.9, 271, q);
    CHECK(none.eps.empty());
  }
}

TEST_CASE("tracked scan finds the branch-end exceptional point") {
  const ModelParams p54 = make_params(54.0, phi_frust);
  auto roots = find_all_stationary(p54);
  annotate_stability(roots, p54);

  const FixedPoint* branch = nullptr;
  for (const auto& r : roots)
    if (!is_trivial(r) && r.attracting()) {
      branch = &r;
      break;
    }
  REQUIRE(branch != nullptr);

  EpScanConfig cfg;
  // The eigenvector condition number at this coalescence point is bounded by
  // the parameter resolution; 1e5 is still two orders above the background.
  cfg.defs.cond_thresh = 1e5;
  const auto res = detect_ep_tracked(SweepAxis::Lambda, 54.0, 49.0, 101, p54,
                                     branch->state, cfg);

  REQUIRE(res.eps.size() == 1);
  const auto& ep = res.eps[0];
  CHECK(ep.param == doctest::Approx(50.4567415).epsilon(4e-8));
  CHECK(ep.min_gap < 1e-4);
  CHECK(ep.eigvec_cond > 1e5);
  // The slow spiral pair collapses onto the real axis...
  CHECK(std::abs(ep.value.imag()) < 1e-4);
  CHECK(ep.value.real() == doctest::Approx(-0.02986).epsilon(0.05));
  // ...and the leading eigenvalue is within a hair of zero there.
  CHECK(ep.max_re > -0.02);
  CHECK(ep.max_re <= 0.0);

  // The branch itself dies a fraction below the coalescence point, where the
  // leading eigenvalue reaches zero and the root annihilates.
  REQUIRE(res.lost_track_at.has_value());
  CHECK(*res.lost_track_at == doctest::Approx(50.4567408).epsilon(4e-8));
  CHECK(ep.param - *res.lost_track_at > 0.0);
  CHECK(ep.param - *res.lost_track_at < 2e-6);

  SUBCASE("spectrum flow along the same branch") {
    const auto flow = spectrum_flow_tracked(SweepAxis::Lambda, 54.0, 50.5, 30,
                                            p54, branch->state);
    REQUIRE(flow.param.size() == 30);
    REQUIRE(flow.eigenvalues.size() == 30);
    CHECK_FALSE(flow.lost_track_at.has_value());
    double worst = 0.0;
    for (std::size_t k = 1; k < flow.param.size(); ++k)
      for (int c = 0; c < 6; ++c)
        worst = std::max(worst, std::abs(flow.eigenvalues[k][c] -
                                         flow.eigenvalues[k - 1][c]));
    CHECK(worst < 0.35);  // columns stay continuity-matched

    const auto broken = spectrum_flow_tracked(SweepAxis::Lambda, 54.0, 49.0,
                                              51, p54, branch->state);
    REQUIRE(broken.lost_track_at.has_value());
    // Grid spacing 0.1: the first grid point past the fold at 50.4567.
    CHECK(*broken.lost_track_at == doctest::Approx(50.4).epsilon(1e-12));
    CHECK(broken.param.size() == 36);
  }
}

TEST_CASE("trivial-branch spectrum flow stays continuous through the band edges") {
  const ModelParams p = make_params(12.0, 1.0, 0.0);
  const auto flow = spectrum_flow_np(SweepAxis::Phi, 0.3, 2.8, 60, p);
  REQUIRE(flow.param.size() == 60);
  REQUIRE(flow.eigenvalues.size() == 60);
  CHECK_FALSE(flow.lost_track_at.has_value());
  CHECK(flow.param.front() == doctest::Approx(0.3));
  CHECK(flow.param.back() == doctest::Approx(2.8));

  double worst = 0.0;
  for (std::size_t k = 1; k < flow.param.size(); ++k)
    for (int c = 0; c < 6; ++c)
      worst = std::max(worst, std::abs(flow.eigenvalues[k][c] -
                                       flow.eigenvalues[k - 1][c]));
  CHECK(worst < 0.1);

  SUBCASE("csv serialization") {
    std::ostringstream os;
    write_spectrum_csv(flow, os, {"demo line"});
    std::istringstream is(os.str());
    std::string line;
    REQUIRE(std::getline(is, line));
    CHECK(line == "# demo line");
    REQUIRE(std::getline(is, line));
    CHECK(line == "param,re_1,re_2,re_3,re_4,re_5,re_6,im_1,im_2,im_3,im_4,im_5,im_6");
    std::size_t rows = 0;
    while (std::getline(is, line)) {
      CHECK(std::count(line.begin(), line.end(), ',') == 12);
      const double param = std::stod(line.substr(0, line.find(',')));
      REQUIRE(rows < flow.param.size());
      CHECK(param == doctest::Approx(flow.param[rows]).epsilon(1e-12));
      ++rows;
    }
    CHECK(rows == flow.param.size());
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "nrdicke/model.hpp"

using namespace nrdicke;

namespace {

SystemState random_sphere_state(std::mt19937_64& rng, double min_abs_z = 0.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  SystemState s;
  for (int i = 0; i < n_species; ++i) {
    double x, y, z, n;
    do {
      x = g(rng);
      y = g(rng);
      z = g(rng);
      n = std::sqrt(x * x + y * y + z * z);
    } while (n < 1e-6 || std::abs(z / n) < min_abs_z);
    s.spin[i] = SpinVector{x / n, y / n, z / n};
  }
  s.a = {0.1 * g(rng), 0.1 * g(rng)};
  return s;
}

double max_diff(const SystemState& a, const SystemState& b) {
  double d = 0.0;
  for (int i = 0; i < n_species; ++i) {
    d = std::max(d, std::abs(a.spin[i].x - b.spin[i].x));
    d = std::max(d, std::abs(a.spin[i].y - b.spin[i].y));
    d = std::max(d, std::abs(a.spin[i].z - b.spin[i].z));
  }
  d = std::max(d, std::abs(a.a.real() - b.a.real()));
  d = std::max(d, std::abs(a.a.imag() - b.a.imag()));
  return d;
}

}  // namespace

TEST_CASE("directional coupling weight") {
  const ModelParams p = make_params(49.0, 2.0 * pi / 3.0);

  SUBCASE("benchmark values at phi = 2 pi / 3") {
    CHECK(d_coupling(2.0 * pi / 3.0, p) ==
          doctest::Approx(-120.096).epsilon(1e-4));
    CHECK(d_coupling(-2.0 * pi / 3.0, p) ==
          doctest::Approx(-379.904).epsilon(1e-4));
  }

  SUBCASE("loss makes the weight nonreciprocal: d(x) - d(-x) = 2 kappa sin x") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-pi, pi);
    for (int k = 0; k < 100; ++k) {
      const double x = u(rng);
      const double asym = d_coupling(x, p) - d_coupling(-x, p);
      CHECK(asym == doctest::Approx(2.0 * p.kappa * std::sin(x)).epsilon(1e-12));
    }
  }

  SUBCASE("kappa = 0 restores reciprocity") {
    const ModelParams p0 = make_params(49.0, 1.1, 0.05, 1.0, 500.0, 0.0);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-pi, pi);
    for (int k = 0; k < 50; ++k) {
      const double x = u(rng);
      CHECK(d_coupling(x, p0) == doctest::Approx(d_coupling(-x, p0)).epsilon(1e-14));
    }
  }
}

TEST_CASE("trivial state is stationary and the slaved cavity closes the loop") {
  const ModelParams p = make_params(49.0, 2.0 * pi / 3.0);

  SUBCASE("all spins down, empty cavity: zero derivative") {
    const SystemState f = rhs_full(np_state(), p);
    CHECK(max_diff(f, SystemState{.spin = {SpinVector{0, 0, 0}, SpinVector{0, 0, 0},
                                           SpinVector{0, 0, 0}},
                                  .a = {0, 0}}) == 0.0);
  }

  SUBCASE("cavity derivative vanishes at the adiabatic amplitude") {
    std::mt19937_64 rng(21);
    for (int k = 0; k < 50; ++k) {
      SystemState s = random_sphere_state(rng);
      s.a = cavity_adiabatic(s, p);
      const SystemState f = rhs_full(s, p);
      CHECK(std::abs(f.a) < 1e-12 * (1.0 + std::abs(s.a)));
    }
  }

  SUBCASE("adiabatic rhs equals the full spin block at the slaved amplitude") {
    std::mt19937_64 rng(22);
    for (int k = 0; k < 50; ++k) {
      SystemState s = random_sphere_state(rng);
      s.a = cavity_adiabatic(s, p);
      const SystemState ff = rhs_full(s, p);
      const SystemState fa = rhs_adiabatic(s, p);
      for (int i = 0; i < n_species; ++i) {
        CHECK(std::abs(ff.spin[i].x - fa.spin[i].x) < 1e-12);
        CHECK(std::abs(ff.spin[i].y - fa.spin[i].y) < 1e-12);
        CHECK(std::abs(ff.spin[i].z - fa.spin[i].z) < 1e-12);
      }
    }
  }

  SUBCASE("slaved amplitude, worked example") {
    // s_x = (1, 1, -1) at phi = 2 pi / 3: the coupling-phase sum is 1 - i sqrt(3).
    SystemState s = make_state({1, 1, -1}, {0, 0, 0}, {0, 0, 0});
    const std::complex<double> sum{1.0, -std::sqrt(3.0)};
    const std::complex<double> expect =
        -std::complex<double>{p.omega_c, p.kappa} /
        (2.0 * (p.omega_c * p.omega_c + p.kappa * p.kappa)) * p.lam[0] * sum;
    const std::complex<double> got = cavity_adiabatic(s, p);
    CHECK(std::abs(got - expect) < 1e-14);
  }
}

TEST_CASE("equation-of-motion symmetries") {
  std::mt19937_64 rng(31);

  SUBCASE("parity equivariance at generic parameters") {
    const ModelParams p = make_params(30.0, 1.3);
    for (int k = 0; k < 40; ++k) {
      const SystemState s = random_sphere_state(rng);
      for (auto mode : {0, 1}) {
        auto rhs = mode == 0 ? rhs_full : rhs_adiabatic;
        const SystemState lhs = rhs(apply_symmetry(s, SymmetryOp::Parity), p);
        const SystemState rhs_v = apply_symmetry(rhs(s, p), SymmetryOp::Parity);
        CHECK(max_diff(lhs, rhs_v) < 1e-12);
      }
    }
  }

  SUBCASE("mirror maps the flow at phi onto pi - phi") {
    const ModelParams p = make_params(40.0, 0.9);
    ModelParams pm = p;
    pm.phi = pi - p.phi;
    for (int k = 0; k < 40; ++k) {
      const SystemState s = random_sphere_state(rng);
      for (auto mode : {0, 1}) {
        auto rhs = mode == 0 ? rhs_full : rhs_adiabatic;
        const SystemState lhs = rhs(apply_symmetry(s, SymmetryOp::Mirror), pm);
        const SystemState rhs_v = apply_symmetry(rhs(s, p), SymmetryOp::Mirror);
        CHECK(max_diff(lhs, rhs_v) < 1e-12);
      }
    }
  }

  SUBCASE("cyclic shift is a symmetry exactly at phi = 2 pi / 3") {
    const ModelParams p = make_params(75.0, 2.0 * pi / 3.0);
    for (int k = 0; k < 40; ++k) {
      const SystemState s = random_sphere_state(rng);
      for (auto mode : {0, 1}) {
        auto rhs = mode == 0 ? rhs_full : rhs_adiabatic;
        const SystemState lhs = rhs(apply_symmetry(s, SymmetryOp::Z3), p);
        const SystemState rhs_v = apply_symmetry(rhs(s, p), SymmetryOp::Z3);
        CHECK(max_diff(lhs, rhs_v) < 1e-12);
      }
    }
  }

  SUBCASE("composition rules") {
    const SystemState s = random_sphere_state(rng);
    SystemState t = s;
    for (int k = 0; k < 3; ++k) t = apply_symmetry(t, SymmetryOp::Z3);
    CHECK(max_diff(t, s) < 1e-15);
    CHECK(max_diff(apply_symmetry(apply_symmetry(s, SymmetryOp::Parity),
                                  SymmetryOp::Parity),
                   s) == 0.0);
    CHECK(max_diff(apply_symmetry(apply_symmetry(s, SymmetryOp::Mirror),
                                  SymmetryOp::Mirror),
                   s) == 0.0);
    // Example: s_x sign pattern (+, +, -) shifts to (-, +, +).
    const SystemState sp = make_state({1, 1, -1}, {0, 0, 0}, {0, 0, 0});
    const SystemState sh = apply_symmetry(sp, SymmetryOp::Z3);
    CHECK(sh.spin[0].x == -1.0);
    CHECK(sh.spin[1].x == 1.0);
    CHECK(sh.spin[2].x == 1.0);
  }
}

TEST_CASE("collective spin coordinates") {
  SUBCASE("orthonormality: xc^2 + xd1^2 + xd2^2 equals sum of squares") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 100; ++k) {
      const std::array<double, 3> sx{u(rng), u(rng), u(rng)};
      const CollectiveCoords c = collective_coords(sx);
      const double lhs = c.xc * c.xc + c.xd1 * c.xd1 + c.xd2 * c.xd2;
      const double rhs = sx[0] * sx[0] + sx[1] * sx[1] + sx[2] * sx[2];
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
    }
  }

  SUBCASE("staggered pattern lands on the first difference coordinate") {
    const double c0 = 0.37;
    const CollectiveCoords c = collective_coords(std::array<double, 3>{c0, -c0, c0});
    CHECK(c.xd1 == doctest::Approx(4.0 * c0 / std::sqrt(6.0)).epsilon(1e-14));
    CHECK(c.xc == doctest::Approx(c0 / std::sqrt(3.0)).epsilon(1e-14));
    CHECK(c.xd2 == doctest::Approx(0.0).epsilon(1e-14));
  }

  SUBCASE("cavity amplitude tracks xd1 + i xd2 at phi = 2 pi / 3") {
    const ModelParams p = make_params(49.0, 2.0 * pi / 3.0);
    // Independent route: expanding the coupling-phase sum at phi = 2 pi / 3
    // gives sum_m e^{i m phi} s_x,m = -(sqrt(6)/2) (xd1 + i xd2), hence
    // a = lambda sqrt(6) (omega_c + i kappa) / (4 (omega_c^2 + kappa^2))
    //     * (xd1 + i xd2).
    const std::complex<double> factor =
        p.lam[0] * std::sqrt(6.0) * std::complex<double>{p.omega_c, p.kappa} /
        (4.0 * (p.omega_c * p.omega_c + p.kappa * p.kappa));
    std::mt19937_64 rng(42);
    for (int k = 0; k < 50; ++k) {
      const SystemState s = random_sphere_state(rng);
      const CollectiveCoords c = collective_coords(s);
      const std::complex<double> expect =
          factor * std::complex<double>{c.xd1, c.xd2};
      CHECK(std::abs(cavity_adiabatic(s, p) - expect) < 1e-14);
    }
  }
}

TEST_CASE("effective spin energy at kappa = 0") {
  const ModelParams p = make_params(75.0, 1.1, 0.0, 1.0, 500.0, 0.0);

  SUBCASE("origin value is -3 Omega / 2") {
    CHECK(energy_eff({0, 0, 0}, p) == doctest::Approx(-1.5).epsilon(1e-14));
  }

  SUBCASE("outside the cube is rejected") {
    CHECK_THROWS_AS((void)energy_eff({1.0000001, 0, 0}, p), std::domain_error);
  }

  SUBCASE("parity and species-exchange invariance") {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> u(-0.99, 0.99);
    for (int k = 0; k < 50; ++k) {
      const std::array<double, 3> s{u(rng), u(rng), u(rng)};
      const std::array<double, 3> neg{-s[0], -s[1], -s[2]};
      const std::array<double, 3> swp{s[2], s[1], s[0]};
      CHECK(energy_eff(s, p) == doctest::Approx(energy_eff(neg, p)).epsilon(1e-13));
      CHECK(energy_eff(s, p) == doctest::Approx(energy_eff(swp, p)).epsilon(1e-13));
    }
  }
}

TEST_CASE("reduced chart") {
  const ModelParams p = make_params(49.0, 2.0 * pi / 3.0);

  SUBCASE("round trip and rhs agreement") {
    std::mt19937_64 rng(61);
    for (int k = 0; k < 50; ++k) {
      const SystemState s0 = random_sphere_state(rng, 0.05);
      const ReducedChart c = reduced_from_state(s0);
      const SystemState s1 = state_from_reduced(c, p);
      for (int i = 0; i < n_species; ++i) {
        CHECK(s1.spin[i].x == doctest::Approx(s0.spin[i].x).epsilon(1e-14));
        CHECK(s1.spin[i].y == doctest::Approx(s0.spin[i].y).epsilon(1e-14));
        CHECK(s1.spin[i].z == doctest::Approx(s0.spin[i].z).epsilon(1e-12));
      }
      const Vec6 f = reduced_rhs(c, p);
      const SystemState fa = rhs_adiabatic(s1, p);
      // chart order: (+1, 0, -1) blocks
      CHECK(f[0] == doctest::Approx(fa.spin[2].x).epsilon(1e-13));
      CHECK(f[1] == doctest::Approx(fa.spin[1].x).epsilon(1e-13));
      CHECK(f[2] == doctest::Approx(fa.spin[0].x).epsilon(1e-13));
      CHECK(f[3] == doctest::Approx(fa.spin[2].y).epsilon(1e-13));
      CHECK(f[4] == doctest::Approx(fa.spin[1].y).epsilon(1e-13));
      CHECK(f[5] == doctest::Approx(fa.spin[0].y).epsilon(1e-13));
    }
  }

  SUBCASE("analytic Jacobian matches central differences") {
    std::mt19937_64 rng(62);
    std::vector<ModelParams> cases;
    cases.push_back(p);
    ModelParams pw = make_params(49.0, 1.2);
    pw.weight = {1.0, 2.0, 1.0};
    pw.lam = {49.0, 49.0 / std::sqrt(2.0), 49.0};
    pw.omega = {1.0, 0.5, 1.0};
    cases.push_back(pw);
    for (const ModelParams& pc : cases) {
      for (int k = 0; k < 20; ++k) {
        const SystemState s0 = random_sphere_state(rng, 0.25);
        ReducedChart c = reduced_from_state(s0);
        const Mat6 J = reduced_jacobian(c, pc);
        const double h = 1e-6;
        for (int j = 0; j < 6; ++j) {
          ReducedChart cp = c, cm = c;
          cp.u[j] += h;
          cm.u[j] -= h;
          const Vec6 fd = (reduced_rhs(cp, pc) - reduced_rhs(cm, pc)) / (2 * h);
          for (int i = 0; i < 6; ++i) {
            CHECK(std::abs(J(i, j) - fd[i]) <=
                  1e-5 * (1.0 + std::abs(J(i, j))));
          }
        }
      }
    }
  }
}

TEST_CASE("tangent-space formulation") {
  const ModelParams p = make_params(34.0, 1.7);

  SUBCASE("cartesian Jacobian matches central differences") {
    std::mt19937_64 rng(71);
    for (int k = 0; k < 20; ++k) {
      const SystemState s = random_sphere_state(rng);
      const Mat9 J = cartesian_jacobian_adiabatic(s, p);
      const double h = 1e-6;
      for (int col = 0; col < 9; ++col) {
        SystemState sp = s, sm = s;
        auto comp = [](SystemState& st, int idx) -> double& {
          SpinVector& sv = st.spin[idx / 3];
          return idx % 3 == 0 ? sv.x : idx % 3 == 1 ? sv.y : sv.z;
        };
        comp(sp, col) += h;
        comp(sm, col) -= h;
        const SystemState dp_ = rhs_adiabatic(sp, p);
        const SystemState dm_ = rhs_adiabatic(sm, p);
        for (int row = 0; row < 9; ++row) {
          const SpinVector& vp = dp_.spin[row / 3];
          const SpinVector& vm = dm_.spin[row / 3];
          const double fp_ = row % 3 == 0 ? vp.x : row % 3 == 1 ? vp.y : vp.z;
          const double fm_ = row % 3 == 0 ? vm.x : row % 3 == 1 ? vm.y : vm.z;
          const double fd = (fp_ - fm_) / (2 * h);
          CHECK(std::abs(J(row, col) - fd) <= 1e-5 * (1.0 + std::abs(J(row, col))));
        }
      }
    }
  }

  SUBCASE("tangent basis is orthonormal and normal to each spin") {
    std::mt19937_64 rng(72);
    for (int k = 0; k < 40; ++k) {
      const SystemState s = random_sphere_state(rng);
      const Mat9x6 B = tangent_basis(s);
      const Mat6 g = B.transpose() * B;
      CHECK((g - Mat6::Identity()).cwiseAbs().maxCoeff() < 1e-12);
      for (int i = 0; i < n_species; ++i) {
        const Eigen::Vector3d n(s.spin[i].x, s.spin[i].y, s.spin[i].z);
        for (int j = 0; j < 6; ++j)
          CHECK(std::abs(n.dot(B.block<3, 1>(3 * i, j))) < 1e-12);
      }
    }
  }

  SUBCASE("pole-aligned spins get a finite basis") {
    SystemState s = np_state();
    s.spin[1].z = 1.0;
    const Mat9x6 B = tangent_basis(s);
    CHECK(B.allFinite());
    CHECK((B.transpose() * B - Mat6::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(make_params(10.0, 0.0, 0.05, 1.0, -1.0, 150.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_params(10.0, 0.0, -0.05), std::invalid_argument);
  ModelParams p = make_params(10.0, 0.0);
  p.weight[1] = 0.0;
  CHECK_THROWS_AS(validate(p), std::invalid_argument);
  p.weight[1] = 2.0;
  CHECK_THROWS_AS((void)p.lambda_h(), std::logic_error);
}

/// @file compensate.cpp
/// @brief Population and frequency compensation of species-dependent
///        couplings.

#include "nrdicke/compensate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

namespace nrdicke {

namespace {

void check_consistency(const CompensationPlan& plan) {
  if (!(plan.phi >= 0.0 && plan.phi <= pi))
    throw std::invalid_argument("compensation plan: phi must lie in [0, pi]");
  if (!(plan.lambda_renorm > 0.0))
    throw std::invalid_argument("compensation plan: Lambda must be > 0");
  const double c = std::abs(std::cos(plan.phi));
  if (c < 1e-12)
    throw std::domain_error(
        "compensation plan: population ratio diverges at phi = pi/2");
  const double rho = 1.0 / c;
  const auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b));
  };
  if (!close(plan.pop_ratio, rho) ||
      !close(plan.coupling_ratio, std::sqrt(rho)) ||
      !(close(plan.freq_ratio, 1.0) || close(plan.freq_ratio, 1.0 / rho)))
    throw std::invalid_argument(
        "compensation plan: ratios inconsistent with phi");
}

}  // namespace

// ============================================================================
// Plan construction
// ============================================================================

CompensationPlan make_plan(double phi, double Lambda, bool compensate_freq) {
  if (!(phi >= 0.0 && phi <= pi))
    throw std::invalid_argument("make_plan: phi must lie in [0, pi]");
  if (!(Lambda > 0.0))
    throw std::invalid_argument("make_plan: Lambda must be > 0");
  const double c = std::abs(std::cos(phi));
  if (c < 1e-12)
    throw std::domain_error(
        "make_plan: population ratio diverges at phi = pi/2");

  CompensationPlan plan;
  plan.phi = phi;
  plan.pop_ratio = 1.0 / c;  // sqrt(1 + tan^2 phi)
  plan.coupling_ratio = std::sqrt(plan.pop_ratio);
  plan.freq_ratio = compensate_freq ? c : 1.0;
  plan.lambda_renorm = Lambda;
  return plan;
}

ModelParams params_from_plan(const CompensationPlan& plan,
                             const ModelParams& base) {
  check_consistency(plan);
  ModelParams p = base;
  p.phi = plan.phi;
  const double lam_outer = plan.lambda_renorm;
  const double lam_mid = plan.lambda_renorm / plan.coupling_ratio;
  const double omega_outer = base.omega[0];
  p.lam = {lam_outer, lam_mid, lam_outer};
  p.weight = {1.0, plan.pop_ratio, 1.0};
  p.omega = {omega_outer, omega_outer * plan.freq_ratio, omega_outer};
  validate(p);
  return p;
}

// ============================================================================
// Orbit distortion
// ============================================================================

double vertex_radius_distortion(const Trajectory& traj,
                                const DwellRecord& dwell) {
  if (dwell.visits.empty())
    throw std::invalid_argument(
        "vertex_radius_distortion: empty dwell record");

  int max_vertex = 0;
  for (const auto& visit : dwell.visits)
    max_vertex = std::max(max_vertex, visit.vertex);
  std::vector<double> sum(max_vertex + 1, 0.0);
  std::vector<std::size_t> count(max_vertex + 1, 0);

  for (const auto& visit : dwell.visits) {
    const auto lo = std::lower_bound(traj.t.begin(), traj.t.end(), visit.entry);
    const auto hi = std::upper_bound(traj.t.begin(), traj.t.end(), visit.exit);
    for (auto it = lo; it != hi; ++it) {
      const auto k = static_cast<std::size_t>(it - traj.t.begin());
      sum[visit.vertex] += std::abs(traj.states[k].a);
      ++count[visit.vertex];
    }
  }

  std::vector<double> radii;
  for (int v = 0; v <= max_vertex; ++v)
    if (count[v] > 0) radii.push_back(sum[v] / static_cast<double>(count[v]));
  const double mean =
      std::accumulate(radii.begin(), radii.end(), 0.0) /
      static_cast<double>(radii.size());
  if (!(mean > 0.0))
    throw std::invalid_argument(
        "vertex_radius_distortion: vanishing vertex radii");
  double dev = 0.0;
  for (double r : radii) dev = std::max(dev, std::abs(r - mean));
  return dev / mean;
}

// ============================================================================
// Serialization
// ============================================================================

std::string plan_to_json(const CompensationPlan& plan) {
  nlohmann::json j;
  j["phi"] = plan.phi;
  j["pop_ratio"] = plan.pop_ratio;
  j["coupling_ratio"] = plan.coupling_ratio;
  j["freq_ratio"] = plan.freq_ratio;
  j["lambda_renorm"] = plan.lambda_renorm;
  return j.dump(2);
}

CompensationPlan plan_from_json(const std::string& text) {
  CompensationPlan plan;
  try {
    const auto j = nlohmann::json::parse(text);
    plan.phi = j.at("phi").get<double>();
    plan.pop_ratio = j.at("pop_ratio").get<double>();
    plan.coupling_ratio = j.at("coupling_ratio").get<double>();
    plan.freq_ratio = j.at("freq_ratio").get<double>();
    plan.lambda_renorm = j.at("lambda_renorm").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("plan_from_json: ") + e.what());
  }
  check_consistency(plan);
  return plan;
}

}  // namespace nrdicke

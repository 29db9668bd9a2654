#include "modsoft/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "modsoft/errors.hpp"

namespace modsoft {

std::string_view to_string(PlantMode m) { return m == PlantMode::Cable3D ? "3d" : "2d"; }

PlantMode plant_mode_from_string(std::string_view s) {
  if (s == "3d" || s == "3D" || s == "cable") return PlantMode::Cable3D;
  if (s == "2d" || s == "2D" || s == "chamber") return PlantMode::Chamber2D;
  throw ConfigError("unknown plant mode '" + std::string(s) + "'");
}

ModuleConfig ModuleConfig::rest(int dim) { return dim == 3 ? make3(0, 0, 1) : make2(0, 1); }

double ModuleConfig::norm() const {
  double s = 0.0;
  for (double c : components()) s += c * c;
  return std::sqrt(s);
}

ModuleAction ModuleAction::clamped() const {
  return {{std::clamp(a[0], -1.0, 1.0), std::clamp(a[1], -1.0, 1.0)}};
}

double module_label(int index, int n_sum) {
  if (n_sum < 1 || index < 1 || index > n_sum)
    throw DomainError("module index " + std::to_string(index) + " outside 1.." + std::to_string(n_sum));
  if (n_sum == 1) return 0.0;
  return 2.0 * (index - 1) / (n_sum - 1) - 1.0;
}

CableActs action_to_cables(const ModuleAction& a) {
  return {std::max(0.0, a[0]), std::max(0.0, -a[0]), std::max(0.0, a[1]), std::max(0.0, -a[1])};
}

ModuleConfig config_from_bend(double theta_x, double theta_y) {
  const double theta = std::hypot(theta_x, theta_y);
  if (!(theta < kPi)) throw DomainError("bend magnitude " + std::to_string(theta) + " >= pi");
  if (theta == 0.0) return ModuleConfig::make3(0, 0, 1);
  const double s = std::sin(theta) / theta;
  return ModuleConfig::make3(theta_x * s, theta_y * s, std::cos(theta));
}

ModuleConfig config_from_bend_2d(double theta) {
  if (!(std::abs(theta) < kPi)) throw DomainError("bend magnitude " + std::to_string(theta) + " >= pi");
  return ModuleConfig::make2(std::sin(theta), std::cos(theta));
}

std::array<double, 2> bend_from_config(const ModuleConfig& c) {
  if (c.dim == 2) return {std::atan2(c[0], c[1]), 0.0};
  const double r = std::hypot(c[0], c[1]);
  if (r == 0.0) return {0.0, 0.0};
  const double theta = std::atan2(r, c[2]);
  return {theta * c[0] / r, theta * c[1] / r};
}

double bending_angle_deg(const ModuleConfig& c) {
  if (c.dim != 2) throw DomainError("bending angle is defined for planar configurations only");
  return rad_to_deg(std::atan2(c[0], c[1]));
}

double config_error(const ModuleConfig& desired, const ModuleConfig& actual) {
  if (desired.dim != actual.dim) throw DomainError("configuration dimension mismatch");
  double s = 0.0;
  for (int k = 0; k < desired.dim; ++k) {
    const double d = actual[k] - desired[k];
    s += d * d;
  }
  return 100.0 * std::sqrt(s);
}

double angle_error(double desired_deg, double actual_deg) { return std::abs(actual_deg - desired_deg); }

MeanStd mean_std(std::span<const double> xs) {
  if (xs.empty()) return {};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

}  // namespace modsoft

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace modsoft {

enum class PlantMode { Cable3D, Chamber2D };

constexpr int config_dim(PlantMode m) { return m == PlantMode::Cable3D ? 3 : 2; }
constexpr int action_dim(PlantMode m) { return m == PlantMode::Cable3D ? 2 : 1; }

std::string_view to_string(PlantMode m);
PlantMode plant_mode_from_string(std::string_view s);

/// Unit vector from a module's base to its end, in the module's base frame.
/// Three components (x, y, z) for the cable plant, two (x, z) for the planar plant.
struct ModuleConfig {
  std::array<double, 3> v{0.0, 0.0, 1.0};
  int dim = 3;

  static ModuleConfig rest(int dim);
  static ModuleConfig make3(double x, double y, double z) { return {{x, y, z}, 3}; }
  static ModuleConfig make2(double x, double z) { return {{x, z, 0.0}, 2}; }

  double operator[](int k) const { return v[static_cast<std::size_t>(k)]; }
  double norm() const;
  std::span<const double> components() const { return {v.data(), static_cast<std::size_t>(dim)}; }
  bool operator==(const ModuleConfig&) const = default;
};

/// Per-module actuation (a0, a1), each in [-1, 1]. The planar plant uses a0 only.
struct ModuleAction {
  std::array<double, 2> a{0.0, 0.0};

  double operator[](int k) const { return a[static_cast<std::size_t>(k)]; }
  ModuleAction clamped() const;
  bool operator==(const ModuleAction&) const = default;
};

/// Activation of the four cables (or two chambers, III/IV unused) of one module.
struct CableActs {
  double I = 0.0, II = 0.0, III = 0.0, IV = 0.0;
  bool operator==(const CableActs&) const = default;
};

using RobotConfig = std::vector<ModuleConfig>;

/// Normalized position of module `index` (1-based) in a chain of `n_sum`
/// modules: -1 at the base, +1 at the tip. A single module gets 0.
double module_label(int index, int n_sum);

CableActs action_to_cables(const ModuleAction& a);

/// Piecewise-constant-curvature end direction for a bend of magnitude
/// |(theta_x, theta_y)| in the plane given by its direction.
ModuleConfig config_from_bend(double theta_x, double theta_y);

/// Planar analog: (sin theta, cos theta) stored as (v_x, v_z).
ModuleConfig config_from_bend_2d(double theta);

/// Inverse of config_from_bend for unit vectors away from the antipode.
std::array<double, 2> bend_from_config(const ModuleConfig& c);

/// Bending angle in degrees of a planar configuration, atan2(v_x, v_z).
double bending_angle_deg(const ModuleConfig& c);

/// 100 * |v - v_d|, in percent of the unit-vector length.
double config_error(const ModuleConfig& desired, const ModuleConfig& actual);

double angle_error(double desired_deg, double actual_deg);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Population mean and standard deviation.
MeanStd mean_std(std::span<const double> xs);

constexpr double kPi = 3.14159265358979323846;
constexpr double deg_to_rad(double d) { return d * kPi / 180.0; }
constexpr double rad_to_deg(double r) { return r * 180.0 / kPi; }

}  // namespace modsoft

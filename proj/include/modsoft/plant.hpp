#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modsoft/core.hpp"

namespace modsoft {

/// Surrogate dynamics of a chain of bending modules. Each module's bend
/// coordinates follow a damped second-order response toward a target set by
/// its own cable drive, the tension of distal modules' cables routed through
/// it, and the gravity load of itself plus all distal modules.
struct PlantParams {
  int n_sum = 4;
  PlantMode mode = PlantMode::Cable3D;
  double theta_max = 0.6;   // rad per unit drive
  double omega = 4.0;       // 1/s
  double zeta = 0.9;
  double g_gain = 0.05;     // rad per unit distal load
  std::array<double, 3> gravity_dir{0.0, 0.0, -1.0};
  double dt_control = 0.04;  // s
  int substeps = 4;
  // Fraction of a distal module's drive that its routed cables impose on
  // each proximal module. Zero decouples the drives.
  double cable_coupling = 0.0;
  // Reaction of a module to the bend accelerations of the modules proximal
  // to it (whip effect). Zero disables it.
  double inertial_coupling = 0.0;
  // Gain of the gravity moment that distal module masses, lumped at their
  // end points, exert about each module's end. Zero disables it.
  double moment_coupling = 0.0;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  /// Largest steady-state bend magnitude reachable with |u| <= 1.
  double max_steady_bend() const;

  /// Canonical one-line text form; two params are equal iff their texts are.
  std::string canonical() const;
  /// FNV-1a digest of canonical(), hex.
  std::string digest() const;
};

struct PlantState {
  PlantParams params;
  std::vector<std::array<double, 2>> bend;  // (theta_x, theta_y); planar plant uses [0] only
  std::vector<std::array<double, 2>> rate;
  long step = 0;

  std::size_t size() const { return bend.size(); }
};

PlantState plant_init(const PlantParams& params);

/// Advances one control period. Throws SaturationError when any bend reaches pi.
PlantState plant_step(PlantState state, std::span<const ModuleAction> actions);

RobotConfig plant_observe(const PlantState& state);

/// Net antagonistic drive (aI - aII, aIII - aIV) of one module.
std::array<double, 2> cable_drive(const ModuleAction& a, PlantMode mode);

/// Gravity expressed in each module's base frame, x-y components (planar: x only).
std::vector<std::array<double, 2>> gravity_projection(const PlantParams& p,
                                                       std::span<const std::array<double, 2>> bends);

/// Gravity moment of the distal masses about each module's end, mapped to
/// bend coordinates in the module's base frame (planar: x only).
std::vector<std::array<double, 2>> distal_moments(const PlantParams& p,
                                                  std::span<const std::array<double, 2>> bends);

/// Bend each module would settle at under the given drives, for the gravity
/// projection of the given bends.
std::vector<std::array<double, 2>> steady_state_targets(const PlantParams& p,
                                                        std::span<const std::array<double, 2>> bends,
                                                        std::span<const ModuleAction> actions);

/// Module end points in the world frame, chaining unit-length segments along
/// each local configuration. Entry i is the end of module i+1; planar points use (x, z).
std::vector<std::array<double, 3>> world_end_points(const PlantParams& p, const RobotConfig& configs);

}  // namespace modsoft

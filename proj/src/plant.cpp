#include "modsoft/plant.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <cstdio>
#include <string>

#include "modsoft/errors.hpp"
#include "modsoft/textio.hpp"

namespace modsoft {

namespace {

Eigen::Matrix3d bend_rotation(double tx, double ty) {
  const double theta = std::hypot(tx, ty);
  if (theta == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(theta, Eigen::Vector3d(-ty / theta, tx / theta, 0.0)).toRotationMatrix();
}

Eigen::Matrix3d config_rotation(const ModuleConfig& c) {
  const double r = std::hypot(c[0], c[1]);
  if (r == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(std::atan2(r, c[2]), Eigen::Vector3d(-c[1] / r, c[0] / r, 0.0)).toRotationMatrix();
}

}  // namespace

void PlantParams::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("plant: " + m); };
  if (n_sum < 1) fail("n_sum must be >= 1");
  if (!(theta_max > 0.0)) fail("theta_max must be positive");
  if (!(omega > 0.0)) fail("omega must be positive");
  if (!(zeta > 0.0 && zeta < 2.0)) fail("zeta must lie in (0, 2)");
  if (!(g_gain >= 0.0)) fail("g_gain must be non-negative");
  if (!(dt_control > 0.0)) fail("dt_control must be positive");
  if (substeps < 1) fail("substeps must be >= 1");
  if (!(omega * dt_control / substeps < 1.0)) fail("omega * dt_control / substeps must be < 1 for a stable integrator");
  if (!(cable_coupling >= 0.0)) fail("cable_coupling must be non-negative");
  if (!(inertial_coupling >= 0.0 && inertial_coupling < 1.0)) fail("inertial_coupling must lie in [0, 1)");
  if (!(moment_coupling >= 0.0)) fail("moment_coupling must be non-negative");
  const double gn = std::hypot(gravity_dir[0], gravity_dir[1], gravity_dir[2]);
  if (!(std::abs(gn - 1.0) < 1e-9)) fail("gravity_dir must be a unit vector");
  if (!(max_steady_bend() < kPi)) fail("largest steady-state bend (max_steady_bend) must stay below pi");
}

double PlantParams::max_steady_bend() const {
  return theta_max * (1.0 + cable_coupling * (n_sum - 1)) + g_gain * n_sum +
         moment_coupling * 0.5 * n_sum * (n_sum - 1);
}

std::string PlantParams::canonical() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "n_sum=%d mode=%s theta_max=%.17g omega=%.17g zeta=%.17g g_gain=%.17g gravity=%.17g,%.17g,%.17g "
                "dt=%.17g substeps=%d cable_coupling=%.17g inertial_coupling=%.17g moment_coupling=%.17g",
                n_sum, std::string(to_string(mode)).c_str(), theta_max, omega, zeta, g_gain, gravity_dir[0],
                gravity_dir[1], gravity_dir[2], dt_control, substeps, cable_coupling, inertial_coupling, moment_coupling);
  return buf;
}

std::string PlantParams::digest() const { return textio::fnv1a_hex(canonical()); }

PlantState plant_init(const PlantParams& params) {
  params.validate();
  PlantState s;
  s.params = params;
  s.bend.assign(static_cast<std::size_t>(params.n_sum), {0.0, 0.0});
  s.rate.assign(static_cast<std::size_t>(params.n_sum), {0.0, 0.0});
  return s;
}

std::array<double, 2> cable_drive(const ModuleAction& a, PlantMode mode) {
  const CableActs c = action_to_cables(a);
  if (mode == PlantMode::Chamber2D) return {c.I - c.II, 0.0};
  return {c.I - c.II, c.III - c.IV};
}

std::vector<std::array<double, 2>> gravity_projection(const PlantParams& p,
                                                       std::span<const std::array<double, 2>> bends) {
  std::vector<std::array<double, 2>> out(bends.size());
  if (p.mode == PlantMode::Chamber2D) {
    const double gx = p.gravity_dir[0], gz = p.gravity_dir[2];
    double phi = 0.0;
    for (std::size_t i = 0; i < bends.size(); ++i) {
      out[i] = {gx * std::cos(phi) - gz * std::sin(phi), 0.0};
      phi += bends[i][0];
    }
    return out;
  }
  const Eigen::Vector3d g(p.gravity_dir[0], p.gravity_dir[1], p.gravity_dir[2]);
  Eigen::Matrix3d base = Eigen::Matrix3d::Identity();
  for (std::size_t i = 0; i < bends.size(); ++i) {
    const Eigen::Vector3d local = base.transpose() * g;
    out[i] = {local.x(), local.y()};
    base = base * bend_rotation(bends[i][0], bends[i][1]);
  }
  return out;
}

std::vector<std::array<double, 2>> distal_moments(const PlantParams& p,
                                                  std::span<const std::array<double, 2>> bends) {
  const std::size_t n = bends.size();
  std::vector<std::array<double, 2>> out(n, {0.0, 0.0});
  if (p.mode == PlantMode::Chamber2D) {
    const double gx = p.gravity_dir[0], gz = p.gravity_dir[2];
    std::vector<double> phi(n), ex(n), ez(n);
    double base = 0.0, x = 0.0, z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      phi[i] = base;
      base += bends[i][0];
      x += std::sin(base);
      z += std::cos(base);
      ex[i] = x;
      ez[i] = z;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double c = std::cos(phi[i]), s = std::sin(phi[i]);
      const double glx = gx * c - gz * s, glz = gx * s + gz * c;
      double tau = 0.0;
      for (std::size_t j = i + 1; j < n; ++j) {
        const double wx = ex[j] - ex[i], wz = ez[j] - ez[i];
        const double rx = wx * c - wz * s, rz = wx * s + wz * c;
        tau += rz * glx - rx * glz;
      }
      out[i] = {tau, 0.0};
    }
    return out;
  }
  const Eigen::Vector3d g(p.gravity_dir[0], p.gravity_dir[1], p.gravity_dir[2]);
  std::vector<Eigen::Matrix3d> rot(n);
  std::vector<Eigen::Vector3d> end(n);
  Eigen::Matrix3d base = Eigen::Matrix3d::Identity();
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    rot[i] = base;
    const Eigen::Matrix3d r = bend_rotation(bends[i][0], bends[i][1]);
    pos += base * r.col(2);
    end[i] = pos;
    base = base * r;
  }
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector3d arm = Eigen::Vector3d::Zero();
    for (std::size_t j = i + 1; j < n; ++j) arm += end[j] - end[i];
    const Eigen::Vector3d tau = (rot[i].transpose() * arm).cross(rot[i].transpose() * g);
    out[i] = {tau.y(), -tau.x()};
  }
  return out;
}

std::vector<std::array<double, 2>> steady_state_targets(const PlantParams& p,
                                                        std::span<const std::array<double, 2>> bends,
                                                        std::span<const ModuleAction> actions) {
  const std::size_t n = bends.size();
  const auto grav = gravity_projection(p, bends);
  std::vector<std::array<double, 2>> moment(n, {0.0, 0.0});
  if (p.moment_coupling > 0.0) moment = distal_moments(p, bends);
  std::vector<std::array<double, 2>> target(n);
  std::array<double, 2> distal{0.0, 0.0};
  for (std::size_t k = n; k-- > 0;) {
    const auto u = cable_drive(actions[k], p.mode);
    const double load = p.g_gain * static_cast<double>(n - k);
    for (int c = 0; c < 2; ++c)
      target[k][c] =
          p.theta_max * (u[c] + p.cable_coupling * distal[c]) + load * grav[k][c] + p.moment_coupling * moment[k][c];
    distal[0] += u[0];
    distal[1] += u[1];
  }
  return target;
}

PlantState plant_step(PlantState s, std::span<const ModuleAction> actions) {
  const PlantParams& p = s.params;
  const std::size_t n = s.size();
  if (actions.size() != n)
    throw DomainError("expected " + std::to_string(n) + " actions, got " + std::to_string(actions.size()));
  const int comps = p.mode == PlantMode::Cable3D ? 2 : 1;
  const double h = p.dt_control / p.substeps;
  const double w2 = p.omega * p.omega;
  const double damp = 2.0 * p.zeta * p.omega;

  std::vector<std::array<double, 2>> acc(n);
  for (int sub = 0; sub < p.substeps; ++sub) {
    const auto target = steady_state_targets(p, s.bend, actions);
    std::array<double, 2> proximal_acc{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < comps; ++c) {
        acc[i][c] = w2 * (target[i][c] - s.bend[i][c]) - damp * s.rate[i][c] - p.inertial_coupling * proximal_acc[c];
        proximal_acc[c] += acc[i][c];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < comps; ++c) {
        s.rate[i][c] += h * acc[i][c];
        s.bend[i][c] += h * s.rate[i][c];
      }
      const double mag = std::hypot(s.bend[i][0], s.bend[i][1]);
      if (!(mag < kPi)) throw SaturationError(i, s.step, mag);
    }
  }
  ++s.step;
  return s;
}

RobotConfig plant_observe(const PlantState& s) {
  RobotConfig out;
  out.reserve(s.size());
  for (const auto& b : s.bend)
    out.push_back(s.params.mode == PlantMode::Cable3D ? config_from_bend(b[0], b[1]) : config_from_bend_2d(b[0]));
  return out;
}

std::vector<std::array<double, 3>> world_end_points(const PlantParams& p, const RobotConfig& configs) {
  std::vector<std::array<double, 3>> pts;
  pts.reserve(configs.size());
  if (p.mode == PlantMode::Chamber2D) {
    double phi = 0.0, x = 0.0, z = 0.0;
    for (const auto& c : configs) {
      const double a = std::atan2(c[0], c[1]);
      x += std::sin(phi + a);
      z += std::cos(phi + a);
      phi += a;
      pts.push_back({x, 0.0, z});
    }
    return pts;
  }
  Eigen::Matrix3d base = Eigen::Matrix3d::Identity();
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();
  for (const auto& c : configs) {
    pos += base * Eigen::Vector3d(c[0], c[1], c[2]);
    pts.push_back({pos.x(), pos.y(), pos.z()});
    base = base * config_rotation(c);
  }
  return pts;
}

}  // namespace modsoft

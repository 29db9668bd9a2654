#pragma once

// Small seeded generators for property tests.

#include <cmath>
#include <cstdint>
#include <vector>

#include "modsoft/core.hpp"
#include "modsoft/rng.hpp"

namespace modsoft::testgen {

inline std::array<double, 3> unit(double x, double y, double z) {
  const double n = std::sqrt(x * x + y * y + z * z);
  return {x / n, y / n, z / n};
}

inline ModuleAction action(Rng& r) { return ModuleAction{{r.uniform(-1.0, 1.0), r.uniform(-1.0, 1.0)}}; }

inline std::vector<ModuleAction> actions(Rng& r, int n) {
  std::vector<ModuleAction> out;
  for (int i = 0; i < n; ++i) out.push_back(action(r));
  return out;
}

// Bend with magnitude below `max_mag`, direction uniform.
inline std::array<double, 2> bend(Rng& r, double max_mag) {
  const double mag = r.uniform(0.0, max_mag), phi = r.uniform(0.0, 2.0 * kPi);
  return {mag * std::cos(phi), mag * std::sin(phi)};
}

inline ModuleConfig unit3(Rng& r) {
  auto b = bend(r, 3.0);
  return config_from_bend(b[0], b[1]);
}

}  // namespace modsoft::testgen

#include "modsoft/control.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "modsoft/dataset.hpp"
#include "modsoft/errors.hpp"
#include "modsoft/textio.hpp"

namespace modsoft {

std::string_view to_string(Task t) {
  switch (t) {
    case Task::A: return "A";
    case Task::B: return "B";
    case Task::C: return "C";
    case Task::Edge: return "edge";
    case Task::Down: return "down";
  }
  return "?";
}

Task task_from_string(std::string_view s) {
  if (s == "A" || s == "a") return Task::A;
  if (s == "B" || s == "b") return Task::B;
  if (s == "C" || s == "c") return Task::C;
  if (s == "edge") return Task::Edge;
  if (s == "down") return Task::Down;
  throw DomainError("unknown task '" + std::string(s) + "'");
}

int TrajectorySpec::n_sum() const {
  switch (task) {
    case Task::A: return static_cast<int>(v_zmin.size());
    case Task::B: return static_cast<int>(v_dz.size());
    case Task::C: return static_cast<int>(v_zmin.size());
    default: return static_cast<int>(ang_max_deg.size());
  }
}

void TrajectorySpec::validate() const {
  auto fail = [&](const std::string& m) { throw ConfigError("trajectory " + std::string(to_string(task)) + ": " + m); };
  const int n = n_sum();
  if (n < 1) fail("no modules");
  if (t_max < 1) fail("t_max must be >= 1");
  if (!(scale > 0.0 && scale <= 1.0)) fail("scale must lie in (0, 1]");
  auto unit_range = [&](const std::vector<double>& v, const char* name) {
    for (double x : v)
      if (!(x > 0.0 && x <= 1.0)) fail(std::string(name) + " values must lie in (0, 1]");
  };
  switch (task) {
    case Task::A: unit_range(v_zmin, "v_zmin"); break;
    case Task::B:
      unit_range(v_dz, "v_dz");
      if (static_cast<int>(direction.size()) != n) fail("direction list length differs from module count");
      break;
    case Task::C:
      unit_range(v_zmin, "v_zmin");
      if (static_cast<int>(direction.size()) != n) fail("direction list length differs from module count");
      break;
    default:
      for (double a : ang_max_deg)
        if (!(std::abs(a) < 180.0)) fail("ang_max must lie in (-180, 180)");
  }
  for (double a : direction)
    if (a != 1.0 && a != -1.0) fail("direction entries must be +1 or -1");
}

TrajectorySpec trajectory_preset(Task task, int n_sum, double scale) {
  TrajectorySpec s;
  s.task = task;
  s.scale = scale;
  s.t_max = is_planar(task) ? 200 : 250;
  auto bad = [&] {
    return ConfigError("no preset for task " + std::string(to_string(task)) + " with " + std::to_string(n_sum) +
                       " modules");
  };
  switch (task) {
    case Task::A:
      if (n_sum == 4) s.v_zmin = {0.975, 0.850, 0.725, 0.625};
      else if (n_sum == 6) s.v_zmin = {0.998, 0.995, 0.950, 0.850, 0.800, 0.650};
      else throw bad();
      break;
    case Task::B:
      if (n_sum == 4) {
        s.v_dz = {0.998, 0.998, 0.996, 0.600};
        s.direction = {1, 1, 1, -1};
      } else if (n_sum == 6) {
        s.v_dz = {0.999, 0.999, 0.999, 0.998, 0.995, 0.708};
        s.direction = {1, 1, 1, 1, -1, -1};
      } else {
        throw bad();
      }
      break;
    case Task::C:
      if (n_sum == 4) {
        s.v_zmin = {0.941, 0.998, 0.897, 0.650};
        s.direction = {1, 1, 1, -1};
      } else if (n_sum == 6) {
        s.v_zmin = {0.999, 0.996, 0.985, 0.975, 0.925, 0.600};
        s.direction = {1, 1, 1, 1, 1, -1};
      } else {
        throw bad();
      }
      break;
    case Task::Edge:
      if (n_sum == 3) s.ang_max_deg = {5.4, 18.0, 90.0};
      else if (n_sum == 2) s.ang_max_deg = {21.6, 72.0};
      else throw bad();
      break;
    case Task::Down:
      if (n_sum == 3) s.ang_max_deg = {3.6, 36.0, -39.6};
      else if (n_sum == 2) s.ang_max_deg = {3.24, -32.4};
      else throw bad();
      break;
  }
  return s;
}

double desired_angle_deg(const TrajectorySpec& spec, int module, int t) {
  if (!is_planar(spec.task)) throw DomainError("bending-angle trajectories exist for edge/down only");
  if (module < 1 || module > spec.n_sum()) throw DomainError("module index out of range");
  const double amax = spec.ang_max_deg[module - 1];
  const double td = static_cast<double>(t);
  if (t < 50) return amax * td / 50.0;
  if (t < 150) return amax * (2.0 - td / 50.0);
  return amax * (td / 50.0 - 4.0);
}

ModuleConfig desired_config(const TrajectorySpec& spec, int module, int t) {
  if (module < 1 || module > spec.n_sum()) throw DomainError("module index out of range");
  if (t < 0 || t > spec.t_max) throw DomainError("step outside [0, t_max]");
  const std::size_t i = static_cast<std::size_t>(module - 1);
  if (is_planar(spec.task)) return config_from_bend_2d(deg_to_rad(spec.scale * desired_angle_deg(spec, module, t)));

  const double td = static_cast<double>(t), tmax = static_cast<double>(spec.t_max);
  constexpr double two_pi = 2.0 * kPi;
  double vz = 1.0, vx = 0.0, vy = 0.0;
  switch (spec.task) {
    case Task::A: {
      vz = 1.0 - (1.0 - spec.v_zmin[i]) * td / tmax;
      const double r = std::sqrt(1.0 - vz * vz);
      vx = std::sin(two_pi * td / tmax) * r;
      vy = std::cos(two_pi * td / tmax) * r;
      break;
    }
    case Task::B: {
      const double a = spec.direction[i];
      vz = spec.v_dz[i];
      const double r = std::sqrt(1.0 - vz * vz);
      vx = a * std::sin(two_pi * td / tmax) * r;
      vy = a * std::cos(two_pi * td / tmax) * r;
      break;
    }
    case Task::C: {
      const double a = spec.direction[i];
      if (t < 50) {
        vz = 1.0 - (1.0 - spec.v_zmin[i]) * td / 50.0;
        vx = 0.0;
        vy = a * std::sqrt(1.0 - vz * vz);
      } else {
        vz = spec.v_zmin[i];
        const double r = std::sqrt(1.0 - vz * vz);
        vx = a * std::sin(two_pi * (td - 50.0) / 200.0) * r;
        vy = a * std::cos(two_pi * (td - 50.0) / 200.0) * r;
      }
      break;
    }
    default: break;
  }
  if (spec.scale == 1.0) return ModuleConfig::make3(vx, vy, vz);
  const double r = std::hypot(vx, vy);
  if (r == 0.0) return ModuleConfig::make3(0.0, 0.0, 1.0);
  const double theta = spec.scale * std::atan2(r, vz);
  return ModuleConfig::make3(vx / r * std::sin(theta), vy / r * std::sin(theta), std::cos(theta));
}

// ---------------------------------------------------------------------------
// Controllers

NetController::NetController(std::shared_ptr<const nn::Model> model) : model_(std::move(model)) {
  if (!model_) throw DomainError("NetController needs a model");
}

std::string NetController::id() const { return std::string(nn::to_string(model_->hyper().arch)); }

int NetController::window() const { return model_->hyper().window; }

std::vector<ModuleAction> NetController::act(const ControlContext& ctx) {
  const nn::NetHyper& h = model_->hyper();
  if (h.d != config_dim(ctx.mode)) throw ShapeError("model configuration dimension does not match the plant");
  if (model_->bound_n_sum() != 0 && model_->bound_n_sum() != ctx.n_sum)
    throw ShapeError(id() + " was trained for " + std::to_string(model_->bound_n_sum()) + " modules; plant has " +
                     std::to_string(ctx.n_sum));
  const int K = h.window;
  std::vector<std::vector<double>> features(static_cast<std::size_t>(ctx.n_sum),
                                            std::vector<double>(static_cast<std::size_t>(h.feature_dim())));
  std::vector<ModuleConfig> states(static_cast<std::size_t>(K));
  std::vector<ModuleAction> actions(static_cast<std::size_t>(K - 1));
  for (int m = 0; m < ctx.n_sum; ++m) {
    for (int k = 0; k < K; ++k) states[k] = ctx.states[k][m];
    for (int k = 0; k + 1 < K; ++k) actions[k] = ctx.actions[k][m];
    assemble_features(module_label(m + 1, ctx.n_sum), ctx.desired[m], states, actions, h.a_dim, features[m]);
  }
  return model_->act(features);
}

std::vector<ModuleAction> ZeroController::act(const ControlContext& ctx) {
  return std::vector<ModuleAction>(static_cast<std::size_t>(ctx.n_sum));
}

std::vector<ModuleAction> OracleController::act(const ControlContext& ctx) {
  const std::size_t n = static_cast<std::size_t>(ctx.n_sum);
  std::vector<std::array<double, 2>> bends(n);
  for (std::size_t i = 0; i < n; ++i) bends[i] = bend_from_config(ctx.desired[i]);
  const auto grav = gravity_projection(params_, bends);
  const auto moment = distal_moments(params_, bends);
  std::vector<ModuleAction> out(n);
  std::array<double, 2> distal{0.0, 0.0};
  const int comps = action_dim(params_.mode);
  for (std::size_t k = n; k-- > 0;) {
    const double load = params_.g_gain * static_cast<double>(n - k);
    for (int c = 0; c < comps; ++c) {
      const double u = (bends[k][c] - load * grav[k][c] - params_.moment_coupling * moment[k][c]) / params_.theta_max -
                       params_.cable_coupling * distal[c];
      out[k].a[c] = std::clamp(u, -1.0, 1.0);
    }
    for (int c = 0; c < comps; ++c) distal[c] += out[k].a[c];
  }
  return out;
}

// ---------------------------------------------------------------------------

RunLog run_closed_loop(PlantState plant, Controller& controller, const TrajectorySpec& spec, std::uint64_t seed) {
  spec.validate();
  const PlantParams& p = plant.params;
  const int n = static_cast<int>(plant.size());
  if (spec.n_sum() != n)
    throw ShapeError("trajectory has " + std::to_string(spec.n_sum()) + " modules, plant has " + std::to_string(n));
  if (is_planar(spec.task) != (p.mode == PlantMode::Chamber2D))
    throw ShapeError("task " + std::string(to_string(spec.task)) + " does not match plant mode " +
                     std::string(to_string(p.mode)));
  const int d = config_dim(p.mode);
  const int K = std::max(1, controller.window());

  RunLog log;
  log.controller_id = controller.id();
  log.task = spec.task;
  log.n_sum = n;
  log.mode = p.mode;
  log.t_max = spec.t_max;
  log.seed = seed;
  log.plant_digest = p.digest();

  ModuleConfig zero = ModuleConfig::rest(d);
  zero.v = {0.0, 0.0, 0.0};
  std::vector<RobotConfig> seen;  // measured S(0..t)
  std::vector<std::vector<ModuleAction>> applied;
  seen.push_back(plant_observe(plant));

  ControlContext ctx;
  ctx.n_sum = n;
  ctx.mode = p.mode;
  for (int t = 0; t < spec.t_max; ++t) {
    ctx.t = t;
    ctx.states.assign(static_cast<std::size_t>(K), RobotConfig(static_cast<std::size_t>(n), zero));
    ctx.actions.assign(static_cast<std::size_t>(K - 1), std::vector<ModuleAction>(static_cast<std::size_t>(n)));
    for (int k = 0; k < K; ++k) {
      const long src = t - (K - 1) + k;
      if (src >= 0) ctx.states[k] = seen[src];
    }
    for (int k = 0; k + 1 < K; ++k) {
      const long src = t - (K - 1) + k;
      if (src >= 0) ctx.actions[k] = applied[src];
    }
    ctx.desired.clear();
    for (int m = 1; m <= n; ++m) ctx.desired.push_back(desired_config(spec, m, t + 1));

    std::vector<ModuleAction> a = controller.act(ctx);
    if (static_cast<int>(a.size()) != n) throw ShapeError("controller returned the wrong number of actions");
    for (auto& x : a) {
      x = x.clamped();
      if (p.mode == PlantMode::Chamber2D) x.a[1] = 0.0;
    }
    try {
      plant = plant_step(std::move(plant), a);
    } catch (const SaturationError& e) {
      log.failed_step = t;
      log.failure = e.what();
      return log;
    }
    seen.push_back(plant_observe(plant));
    applied.push_back(a);
    log.desired.push_back(ctx.desired);
    log.achieved.push_back(seen.back());
    log.actions.push_back(std::move(a));
  }
  return log;
}

std::vector<MeanStd> evaluate_run(const RunLog& log) {
  std::vector<MeanStd> out;
  for (int m = 0; m < log.n_sum; ++m) {
    std::vector<double> e;
    e.reserve(log.desired.size());
    for (std::size_t t = 0; t < log.desired.size(); ++t) {
      const ModuleConfig& want = log.desired[t][m];
      const ModuleConfig& got = log.achieved[t][m];
      e.push_back(log.mode == PlantMode::Chamber2D ? angle_error(bending_angle_deg(want), bending_angle_deg(got))
                                                   : config_error(want, got));
    }
    out.push_back(mean_std(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text format

void runlog_write(const RunLog& log, std::ostream& os) {
  const int d = config_dim(log.mode), a = action_dim(log.mode);
  os << "modsoft-runlog version=1 task=" << to_string(log.task) << " controller=" << log.controller_id
     << " n_sum=" << log.n_sum << " mode=" << to_string(log.mode) << " d=" << d << " a_dim=" << a
     << " t_max=" << log.t_max << " seed=" << log.seed << " plant=" << (log.plant_digest.empty() ? "-" : log.plant_digest)
     << " failed_step=" << log.failed_step << '\n';
  // Column legend as a comment line.
  os << "# t";
  static const char* comp3[3] = {"x", "y", "z"};
  static const char* comp2[2] = {"x", "z"};
  for (int m = 1; m <= log.n_sum; ++m) {
    for (int k = 0; k < d; ++k) os << " m" << m << "_des_" << (d == 3 ? comp3[k] : comp2[k]);
    for (int k = 0; k < d; ++k) os << " m" << m << "_ach_" << (d == 3 ? comp3[k] : comp2[k]);
    for (int k = 0; k < a; ++k) os << " m" << m << "_a" << k;
  }
  os << '\n';
  if (!log.failure.empty()) os << "# failure " << log.failure << '\n';
  std::string line;
  for (std::size_t t = 0; t < log.desired.size(); ++t) {
    line = std::to_string(t);
    for (int m = 0; m < log.n_sum; ++m) {
      for (int k = 0; k < d; ++k) {
        line += ' ';
        textio::append_double(line, log.desired[t][m][k]);
      }
      for (int k = 0; k < d; ++k) {
        line += ' ';
        textio::append_double(line, log.achieved[t][m][k]);
      }
      for (int k = 0; k < a; ++k) {
        line += ' ';
        textio::append_double(line, log.actions[t][m][k]);
      }
    }
    line += '\n';
    os << line;
  }
}

RunLog runlog_read(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line) || line.rfind("modsoft-runlog", 0) != 0) throw ParseError("not a run log", lineno);
  const auto kv = textio::parse_header_fields(line);
  if (textio::require_field(kv, "version", lineno) != "1") throw ParseError("unsupported run log version", lineno);
  RunLog log;
  try {
    log.task = task_from_string(textio::require_field(kv, "task", lineno));
    log.mode = plant_mode_from_string(textio::require_field(kv, "mode", lineno));
  } catch (const std::exception& e) {
    throw ParseError(e.what(), lineno);
  }
  log.controller_id = textio::require_field(kv, "controller", lineno);
  log.n_sum = static_cast<int>(textio::parse_int(textio::require_field(kv, "n_sum", lineno), lineno));
  log.t_max = static_cast<int>(textio::parse_int(textio::require_field(kv, "t_max", lineno), lineno));
  log.seed = textio::parse_u64(textio::require_field(kv, "seed", lineno), lineno);
  log.plant_digest = textio::require_field(kv, "plant", lineno);
  if (log.plant_digest == "-") log.plant_digest.clear();
  log.failed_step = textio::parse_int(textio::require_field(kv, "failed_step", lineno), lineno);
  const int d = config_dim(log.mode), a = action_dim(log.mode);
  if (textio::parse_int(textio::require_field(kv, "d", lineno), lineno) != d ||
      textio::parse_int(textio::require_field(kv, "a_dim", lineno), lineno) != a)
    throw ParseError("header dimensions disagree with mode", lineno);
  if (log.n_sum < 1) throw ParseError("n_sum must be >= 1", lineno);
  const std::size_t cols = 1 + static_cast<std::size_t>(log.n_sum) * (2 * d + a);
  while (std::getline(is, line)) {
    ++lineno;
    if (line.rfind("# failure ", 0) == 0) {
      log.failure = line.substr(10);
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    const auto tok = textio::split(line);
    if (tok.size() != cols)
      throw ParseError("expected " + std::to_string(cols) + " columns, found " + std::to_string(tok.size()), lineno);
    if (textio::parse_int(tok[0], lineno) != static_cast<long long>(log.desired.size()))
      throw ParseError("step index out of sequence", lineno);
    RobotConfig des, ach;
    std::vector<ModuleAction> act;
    std::size_t c = 1;
    for (int m = 0; m < log.n_sum; ++m) {
      ModuleConfig vd = ModuleConfig::rest(d), va = ModuleConfig::rest(d);
      for (int k = 0; k < d; ++k) vd.v[k] = textio::parse_double(tok[c++], lineno);
      for (int k = 0; k < d; ++k) va.v[k] = textio::parse_double(tok[c++], lineno);
      ModuleAction u;
      for (int k = 0; k < a; ++k) u.a[k] = textio::parse_double(tok[c++], lineno);
      des.push_back(vd);
      ach.push_back(va);
      act.push_back(u);
    }
    log.desired.push_back(std::move(des));
    log.achieved.push_back(std::move(ach));
    log.actions.push_back(std::move(act));
  }
  return log;
}

void runlog_save(const RunLog& log, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  runlog_write(log, os);
}

RunLog runlog_load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return runlog_read(is);
}

}  // namespace modsoft

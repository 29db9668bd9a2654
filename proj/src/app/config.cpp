#include "modsoft/app/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "modsoft/errors.hpp"
#include "modsoft/textio.hpp"

namespace modsoft::app {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw ConfigError("config " + where + ": " + msg);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : obj.items())
    if (!ok.count(k)) fail(where, "unknown key '" + k + "'");
}

template <class T>
T get(const json& obj, const std::string& where, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where + "." + key, "wrong type");
  }
}

template <class T>
T require(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key)) fail(where, "missing required key '" + std::string(key) + "'");
  return get<T>(obj, where, key, T{});
}

PlantParams parse_plant(const json& j) {
  check_keys(j, "plant",
             {"n_sum", "mode", "theta_max", "omega", "zeta", "g_gain", "gravity_dir", "dt_control", "substeps",
              "cable_coupling", "inertial_coupling", "moment_coupling"});
  PlantParams p;
  p.n_sum = get(j, "plant", "n_sum", p.n_sum);
  try {
    p.mode = plant_mode_from_string(get<std::string>(j, "plant", "mode", "3d"));
  } catch (const std::exception& e) {
    fail("plant.mode", e.what());
  }
  p.theta_max = get(j, "plant", "theta_max", p.theta_max);
  p.omega = get(j, "plant", "omega", p.omega);
  p.zeta = get(j, "plant", "zeta", p.zeta);
  p.g_gain = get(j, "plant", "g_gain", p.g_gain);
  if (j.contains("gravity_dir")) {
    const auto g = get<std::vector<double>>(j, "plant", "gravity_dir", {});
    if (g.size() != 3) fail("plant.gravity_dir", "expected three components");
    p.gravity_dir = {g[0], g[1], g[2]};
  }
  p.dt_control = get(j, "plant", "dt_control", p.dt_control);
  p.substeps = get(j, "plant", "substeps", p.substeps);
  p.cable_coupling = get(j, "plant", "cable_coupling", p.cable_coupling);
  p.inertial_coupling = get(j, "plant", "inertial_coupling", p.inertial_coupling);
  p.moment_coupling = get(j, "plant", "moment_coupling", p.moment_coupling);
  p.validate();
  return p;
}

CollectorConfig parse_collector(const json& j) {
  check_keys(j, "collector", {"method", "n_samples", "delta_max", "seed", "phase_b_split"});
  CollectorConfig c;
  const auto method = get<std::string>(j, "collector", "method", "phased");
  if (method == "phased") c.method = CollectMethod::Phased;
  else if (method == "traditional") c.method = CollectMethod::Traditional;
  else fail("collector.method", "expected 'phased' or 'traditional'");
  c.options.n_samples = get(j, "collector", "n_samples", c.options.n_samples);
  c.options.delta_max = get(j, "collector", "delta_max", c.options.delta_max);
  c.options.seed = require<std::uint64_t>(j, "collector", "seed");
  c.options.phase_b_split = get(j, "collector", "phase_b_split", c.options.phase_b_split);
  if (c.options.n_samples < 3) fail("collector.n_samples", "must be >= 3");
  if (!(c.options.delta_max > 0.0 && c.options.delta_max <= 2.0)) fail("collector.delta_max", "must lie in (0, 2]");
  if (c.options.phase_b_split < 1) fail("collector.phase_b_split", "must be >= 1");
  return c;
}

NetworkConfig parse_network(const json& j) {
  check_keys(j, "network",
             {"variant", "hidden", "layers_per_direction", "window", "head_hidden", "lr", "batch", "epochs", "seed", "holdout"});
  NetworkConfig n;
  try {
    n.arch = nn::arch_from_string(get<std::string>(j, "network", "variant", "bilstm"));
  } catch (const std::exception& e) {
    fail("network.variant", e.what());
  }
  n.hidden = get(j, "network", "hidden", n.hidden);
  n.layers = get(j, "network", "layers_per_direction", n.layers);
  n.window = get(j, "network", "window", n.window);
  n.head_hidden = get(j, "network", "head_hidden", n.head_hidden);
  n.train.lr = get(j, "network", "lr", n.train.lr);
  n.train.batch = get(j, "network", "batch", n.train.batch);
  n.train.epochs = get(j, "network", "epochs", n.train.epochs);
  n.train.seed = require<std::uint64_t>(j, "network", "seed");
  n.train.holdout = get(j, "network", "holdout", n.train.holdout);
  if (n.hidden < 1 || n.layers < 1 || n.window < 1 || n.head_hidden < 0)
    fail("network", "hidden, layers_per_direction and window must be >= 1, head_hidden >= 0");
  if (n.train.epochs < 1 || n.train.batch < 1 || !(n.train.lr > 0.0)) fail("network", "epochs, batch and lr must be positive");
  if (!(n.train.holdout >= 0.0 && n.train.holdout < 1.0)) fail("network.holdout", "must lie in [0, 1)");
  return n;
}

TaskConfig parse_task(const json& j, std::size_t index, const PlantParams& plant) {
  const std::string where = "tasks[" + std::to_string(index) + "]";
  check_keys(j, where, {"task", "n_sum", "scale", "seed", "max_error", "t_max", "v_zmin", "v_dz", "direction", "ang_max_deg"});
  TaskConfig t;
  Task kind{};
  try {
    kind = task_from_string(require<std::string>(j, where, "task"));
  } catch (const DomainError& e) {
    fail(where + ".task", e.what());
  }
  t.n_sum = get(j, where, "n_sum", plant.n_sum);
  t.seed = require<std::uint64_t>(j, where, "seed");
  const double scale = get(j, where, "scale", 1.0);
  const bool custom = j.contains("v_zmin") || j.contains("v_dz") || j.contains("direction") || j.contains("ang_max_deg");
  try {
    t.spec = trajectory_preset(kind, t.n_sum, scale);
  } catch (const ConfigError&) {
    if (!custom) fail(where, "no preset for task " + std::string(to_string(kind)) + " with " + std::to_string(t.n_sum) + " modules");
    t.spec = TrajectorySpec{};
    t.spec.task = kind;
    t.spec.scale = scale;
    t.spec.t_max = is_planar(kind) ? 200 : 250;
  }
  t.spec.t_max = get(j, where, "t_max", t.spec.t_max);
  t.spec.v_zmin = get(j, where, "v_zmin", t.spec.v_zmin);
  t.spec.v_dz = get(j, where, "v_dz", t.spec.v_dz);
  t.spec.direction = get(j, where, "direction", t.spec.direction);
  t.spec.ang_max_deg = get(j, where, "ang_max_deg", t.spec.ang_max_deg);
  t.spec.validate();
  if (t.spec.n_sum() != t.n_sum) fail(where, "trajectory lists have " + std::to_string(t.spec.n_sum()) + " modules, n_sum is " + std::to_string(t.n_sum));
  if (is_planar(kind) != (plant.mode == PlantMode::Chamber2D))
    fail(where, "task " + std::string(to_string(kind)) + " does not match plant mode " + std::string(to_string(plant.mode)));
  if (j.contains("max_error")) t.max_error = get<double>(j, where, "max_error", 0.0);
  return t;
}

json plant_json(const PlantParams& p) {
  return {{"n_sum", p.n_sum},
          {"mode", std::string(to_string(p.mode))},
          {"theta_max", p.theta_max},
          {"omega", p.omega},
          {"zeta", p.zeta},
          {"g_gain", p.g_gain},
          {"gravity_dir", {p.gravity_dir[0], p.gravity_dir[1], p.gravity_dir[2]}},
          {"dt_control", p.dt_control},
          {"substeps", p.substeps},
          {"cable_coupling", p.cable_coupling},
          {"inertial_coupling", p.inertial_coupling},
          {"moment_coupling", p.moment_coupling}};
}

std::string controller_name(ControllerKind k) {
  switch (k) {
    case ControllerKind::Model: return "model";
    case ControllerKind::Oracle: return "oracle";
    case ControllerKind::Zero: return "zero";
  }
  return "?";
}

// Sets a dotted path ("a.b.2.c") inside `doc`, creating objects as needed.
void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) fail("override", "expected key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::size_t pos = 0;
  while (true) {
    const auto dot = path.find('.', pos);
    const std::string key = path.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (key.empty()) fail("override", "empty key in '" + path + "'");
    json* next = nullptr;
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(key);
      } catch (const std::exception&) {
        fail("override", "'" + key + "' is not an array index");
      }
      if (idx >= node->size()) fail("override", "index " + key + " out of range in '" + path + "'");
      next = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) fail("override", "'" + path + "' descends into a scalar");
      next = &(*node)[key];
    }
    if (dot == std::string::npos) {
      *next = value;
      return;
    }
    node = next;
    pos = dot + 1;
  }
}

ExperimentConfig from_json(const json& doc) {
  check_keys(doc, "root", {"name", "output_dir", "plant", "collector", "network", "controller", "tasks"});
  ExperimentConfig cfg;
  cfg.name = get<std::string>(doc, "root", "name", "experiment");
  cfg.output_dir = require<std::string>(doc, "root", "output_dir");
  cfg.plant = parse_plant(doc.contains("plant") ? doc.at("plant") : json::object());
  if (!doc.contains("collector")) fail("root", "missing required section 'collector'");
  cfg.collector = parse_collector(doc.at("collector"));
  if (!doc.contains("network")) fail("root", "missing required section 'network'");
  cfg.network = parse_network(doc.at("network"));
  const auto ctl = get<std::string>(doc, "root", "controller", "model");
  if (ctl == "model") cfg.controller = ControllerKind::Model;
  else if (ctl == "oracle") cfg.controller = ControllerKind::Oracle;
  else if (ctl == "zero") cfg.controller = ControllerKind::Zero;
  else fail("controller", "expected 'model', 'oracle' or 'zero'");
  if (doc.contains("tasks")) {
    if (!doc.at("tasks").is_array()) fail("tasks", "expected an array");
    std::size_t i = 0;
    for (const auto& t : doc.at("tasks")) cfg.tasks.push_back(parse_task(t, i++, cfg.plant));
  }
  for (const auto& t : cfg.tasks) cfg.plant_for(t).validate();
  return cfg;
}

}  // namespace

std::string TaskConfig::id() const { return std::string(to_string(spec.task)) + "_n" + std::to_string(n_sum); }

PlantParams ExperimentConfig::plant_for(const TaskConfig& task) const {
  PlantParams p = plant;
  p.n_sum = task.n_sum;
  return p;
}

nn::NetHyper ExperimentConfig::hyper(int n_sum, PlantMode mode) const {
  nn::NetHyper h;
  h.arch = network.arch;
  h.hidden = network.hidden;
  h.layers = network.layers;
  h.window = network.window;
  h.head_hidden = network.head_hidden;
  h.d = config_dim(mode);
  h.a_dim = action_dim(mode);
  h.n_sum = n_sum;
  h.seed = network.train.seed;
  return h;
}

ExperimentConfig config_parse(const std::string& json_text) {
  const json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) fail("file", "not valid JSON");
  return from_json(doc);
}

ExperimentConfig config_load(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  json doc = json::parse(ss.str(), nullptr, false);
  if (doc.is_discarded()) fail(path.string(), "not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  return from_json(doc);
}

std::string config_normalized(const ExperimentConfig& cfg) {
  json tasks = json::array();
  for (const auto& t : cfg.tasks) {
    json tj = {{"task", std::string(to_string(t.spec.task))},
               {"n_sum", t.n_sum},
               {"seed", t.seed},
               {"scale", t.spec.scale},
               {"t_max", t.spec.t_max},
               {"v_zmin", t.spec.v_zmin},
               {"v_dz", t.spec.v_dz},
               {"direction", t.spec.direction},
               {"ang_max_deg", t.spec.ang_max_deg}};
    if (t.max_error) tj["max_error"] = *t.max_error;
    tasks.push_back(std::move(tj));
  }
  const auto& o = cfg.collector.options;
  const auto& n = cfg.network;
  const json doc = {
      {"name", cfg.name},
      {"output_dir", cfg.output_dir.generic_string()},
      {"plant", plant_json(cfg.plant)},
      {"collector",
       {{"method", cfg.collector.method == CollectMethod::Phased ? "phased" : "traditional"},
        {"n_samples", o.n_samples},
        {"delta_max", o.delta_max},
        {"seed", o.seed},
        {"phase_b_split", o.phase_b_split}}},
      {"network",
       {{"variant", std::string(nn::to_string(n.arch))},
        {"hidden", n.hidden},
        {"layers_per_direction", n.layers},
        {"window", n.window},
        {"head_hidden", n.head_hidden},
        {"lr", n.train.lr},
        {"batch", n.train.batch},
        {"epochs", n.train.epochs},
        {"seed", n.train.seed},
        {"holdout", n.train.holdout}}},
      {"controller", controller_name(cfg.controller)},
      {"tasks", tasks}};
  return doc.dump(2) + "\n";
}

std::string config_digest(const ExperimentConfig& cfg) { return textio::fnv1a_hex(config_normalized(cfg)); }

}  // namespace modsoft::app

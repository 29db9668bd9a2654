#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modsoft/core.hpp"
#include "modsoft/nn/model.hpp"
#include "modsoft/plant.hpp"

namespace modsoft {

enum class Task { A, B, C, Edge, Down };

std::string_view to_string(Task t);
Task task_from_string(std::string_view s);
constexpr bool is_planar(Task t) { return t == Task::Edge || t == Task::Down; }

/// Per-module trajectory parameters. Tasks A/B/C use v_zmin / v_dz and the
/// rotation direction; edge/down use the peak bending angle in degrees.
struct TrajectorySpec {
  Task task = Task::A;
  int t_max = 250;
  std::vector<double> v_zmin;
  std::vector<double> v_dz;
  std::vector<double> direction;
  std::vector<double> ang_max_deg;
  // Uniform shrink of every desired bend angle; 1 reproduces the closed forms.
  double scale = 1.0;

  int n_sum() const;
  void validate() const;
};

/// Built-in parameter sets: tasks A/B/C for 4 and 6 modules, edge/down for 3
/// and 2 modules. t_max is 250 for A/B/C and 200 for edge/down.
TrajectorySpec trajectory_preset(Task task, int n_sum, double scale = 1.0);

/// Desired configuration of module `module` (1-based) at step t.
ModuleConfig desired_config(const TrajectorySpec& spec, int module, int t);

/// Desired bending angle in degrees (edge/down only), before scaling.
double desired_angle_deg(const TrajectorySpec& spec, int module, int t);

/// What a controller may see at step t: the K most recent measured
/// configurations (oldest first, zero vectors before the first step), the
/// K-1 most recent applied actions, and the desired configuration of t+1.
struct ControlContext {
  long t = 0;
  int n_sum = 0;
  PlantMode mode = PlantMode::Cable3D;
  std::vector<RobotConfig> states;
  std::vector<std::vector<ModuleAction>> actions;
  RobotConfig desired;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string id() const = 0;
  virtual int window() const = 0;
  virtual std::vector<ModuleAction> act(const ControlContext& ctx) = 0;
};

/// Wraps a trained inverse model. Feature vectors are assembled exactly as
/// in make_training_pairs.
class NetController final : public Controller {
 public:
  explicit NetController(std::shared_ptr<const nn::Model> model);
  std::string id() const override;
  int window() const override;
  std::vector<ModuleAction> act(const ControlContext& ctx) override;

 private:
  std::shared_ptr<const nn::Model> model_;
};

class ZeroController final : public Controller {
 public:
  std::string id() const override { return "zero"; }
  int window() const override { return 1; }
  std::vector<ModuleAction> act(const ControlContext& ctx) override;
};

/// Analytic steady-state inverse of the surrogate plant.
class OracleController final : public Controller {
 public:
  explicit OracleController(PlantParams params) : params_(std::move(params)) {}
  std::string id() const override { return "oracle"; }
  int window() const override { return 1; }
  std::vector<ModuleAction> act(const ControlContext& ctx) override;

 private:
  PlantParams params_;
};

struct RunLog {
  std::string controller_id;
  Task task = Task::A;
  int n_sum = 0;
  PlantMode mode = PlantMode::Cable3D;
  int t_max = 0;
  std::uint64_t seed = 0;
  std::string plant_digest;
  long failed_step = -1;  // >= 0 when the plant saturated
  std::string failure;
  // Entry t: desired configuration of t+1, configuration reached at t+1,
  // and the action applied at t.
  std::vector<RobotConfig> desired;
  std::vector<RobotConfig> achieved;
  std::vector<std::vector<ModuleAction>> actions;

  bool complete() const { return failed_step < 0 && static_cast<int>(desired.size()) == t_max; }
  bool operator==(const RunLog&) const = default;
};

/// Runs one trajectory from rest. Plant saturation ends the run early and
/// is recorded in the log rather than thrown. Shape mismatches between the
/// controller and the plant throw ShapeError before the first step.
RunLog run_closed_loop(PlantState plant, Controller& controller, const TrajectorySpec& spec, std::uint64_t seed);

/// Per-module mean and std over all logged steps of config_error (percent)
/// for the cable plant or angle_error (degrees) for the planar plant.
std::vector<MeanStd> evaluate_run(const RunLog& log);

void runlog_write(const RunLog& log, std::ostream& os);
RunLog runlog_read(std::istream& is);
void runlog_save(const RunLog& log, const std::filesystem::path& path);
RunLog runlog_load(const std::filesystem::path& path);

}  // namespace modsoft

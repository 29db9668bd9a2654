#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "modsoft/control.hpp"
#include "modsoft/dataset.hpp"
#include "modsoft/nn/model.hpp"
#include "modsoft/nn/train.hpp"
#include "modsoft/plant.hpp"

namespace modsoft::app {

enum class CollectMethod { Phased, Traditional };

struct CollectorConfig {
  CollectMethod method = CollectMethod::Phased;
  CollectOptions options;
};

struct NetworkConfig {
  nn::Arch arch = nn::Arch::BiLstm;
  int hidden = 32;
  int layers = 2;
  int window = 5;
  int head_hidden = 0;
  nn::TrainOptions train;  // seed doubles as the initialization seed
};

struct TaskConfig {
  TrajectorySpec spec;
  int n_sum = 0;
  std::uint64_t seed = 0;
  std::optional<double> max_error;  // per-module mean, percent or degrees

  /// Stable identifier used for file names, e.g. "A_n4".
  std::string id() const;
};

enum class ControllerKind { Model, Oracle, Zero };

struct ExperimentConfig {
  std::string name;
  std::filesystem::path output_dir;
  PlantParams plant;
  CollectorConfig collector;
  NetworkConfig network;
  ControllerKind controller = ControllerKind::Model;
  std::vector<TaskConfig> tasks;

  /// Plant of the control experiment for one task (module count overridden).
  PlantParams plant_for(const TaskConfig& task) const;

  /// Network hyperparameters for a dataset of the given topology.
  nn::NetHyper hyper(int n_sum, PlantMode mode) const;
};

/// Parses and validates a config document. Unknown keys, missing seeds and
/// unknown presets throw ConfigError.
ExperimentConfig config_parse(const std::string& json_text);

/// Reads a config file and applies "dotted.key=value" overrides before
/// validation. Values parse as JSON when possible, otherwise as strings.
ExperimentConfig config_load(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Fully expanded form with every default filled in, keys sorted.
std::string config_normalized(const ExperimentConfig& cfg);

/// FNV-1a digest (hex) of config_normalized.
std::string config_digest(const ExperimentConfig& cfg);

}  // namespace modsoft::app

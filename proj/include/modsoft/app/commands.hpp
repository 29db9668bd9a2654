#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "modsoft/app/config.hpp"

namespace modsoft::app {

// Process exit codes of every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumeric = 2;
inline constexpr int kExitThreshold = 3;

// Fixed artifact names inside a run directory.
inline constexpr const char* kDatasetFile = "dataset.txt";
inline constexpr const char* kModelFile = "model.txt";
inline constexpr const char* kManifestFile = "manifest.json";

/// Runs `body`, mapping exceptions to exit codes and printing the diagnostic
/// to `err`: validation, shape, parse and I/O problems give 1, numeric
/// failures and plant saturation give 2.
int run_guarded(const std::function<int()>& body, std::ostream& err);

/// Collects a dataset with the configured collector into the run directory,
/// plus collect_summary.json with per-phase tip statistics.
int cmd_collect(const ExperimentConfig& cfg, std::ostream& log);

/// Trains the configured network on `dataset` (default: the run directory's
/// dataset). Writes the model, loss_curve.csv and estimation.csv.
int cmd_train(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& dataset, std::ostream& log);

/// Estimation error of `model` on every training pair of `dataset`, written
/// to estimation_eval.csv.
int cmd_eval_estimation(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& dataset,
                        const std::optional<std::filesystem::path>& model, std::ostream& log);

/// Runs every configured task and writes one run log per task under runs/
/// and control_report.csv. Returns kExitThreshold when any module's mean
/// error exceeds its task's max_error.
int cmd_control(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& model, std::ostream& log);

/// Merges every run log under <run_dir>/runs into report.csv and
/// report.json, and writes desired/achieved series to plot/<run>.csv.
int cmd_report(const std::filesystem::path& run_dir, std::ostream& log);

/// One row of an error table.
struct ErrorRow {
  std::string task;
  std::string controller;
  int n_sum = 0;
  int module = 0;
  double mean = 0.0;
  double std = 0.0;
  std::string unit;  // "percent" or "deg"

  bool operator==(const ErrorRow&) const = default;
};

void error_table_write(const std::vector<ErrorRow>& rows, std::ostream& os);
std::vector<ErrorRow> error_table_read(std::istream& is);
std::vector<ErrorRow> error_table_load(const std::filesystem::path& path);

/// Per-module estimation table: "module,mean,std" rows.
void estimation_table_write(const std::vector<MeanStd>& rows, std::ostream& os);
std::vector<MeanStd> estimation_table_read(std::istream& is);

/// Rows of one run log, keyed (task, controller, module).
std::vector<ErrorRow> error_rows(const RunLog& log);

}  // namespace modsoft::app

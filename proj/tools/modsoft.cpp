#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "modsoft/app/commands.hpp"
#include "modsoft/app/config.hpp"

namespace {

std::optional<std::filesystem::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace modsoft::app;
  CLI::App app{"Modular soft-arm configuration control: data collection, inverse-model training, closed-loop runs"};
  app.require_subcommand(1);

  std::string config_path, dataset, model, run_dir;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("-s,--set", overrides, "override a config key, e.g. --set network.epochs=5");
  };

  auto* collect = app.add_subcommand("collect", "collect a dataset on the surrogate plant");
  add_config(collect);
  auto* train = app.add_subcommand("train", "train the configured network");
  add_config(train);
  train->add_option("--dataset", dataset, "dataset file (default: <output_dir>/dataset.txt)");
  auto* eval = app.add_subcommand("eval-estimation", "action-estimation error of a model on a dataset");
  add_config(eval);
  eval->add_option("--dataset", dataset, "dataset file (default: <output_dir>/dataset.txt)");
  eval->add_option("--model", model, "model file (default: <output_dir>/model.txt)");
  auto* control = app.add_subcommand("control", "run the configured trajectory tasks in closed loop");
  add_config(control);
  control->add_option("--model", model, "model file (default: <output_dir>/model.txt)");
  auto* report = app.add_subcommand("report", "merge run logs into tables and plot data");
  report->add_option("run_dir", run_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  return run_guarded(
      [&]() -> int {
        if (report->parsed()) return cmd_report(run_dir, std::cout);
        const ExperimentConfig cfg = config_load(config_path, overrides);
        if (collect->parsed()) return cmd_collect(cfg, std::cout);
        if (train->parsed()) return cmd_train(cfg, opt_path(dataset), std::cout);
        if (eval->parsed()) return cmd_eval_estimation(cfg, opt_path(dataset), opt_path(model), std::cout);
        return cmd_control(cfg, opt_path(model), std::cout);
      },
      std::cerr);
}

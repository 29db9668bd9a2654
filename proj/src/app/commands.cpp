#include "modsoft/app/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "modsoft/errors.hpp"
#include "modsoft/textio.hpp"

namespace modsoft::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

fs::path prepare_run_dir(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  write_file(cfg.output_dir / "config.json", config_normalized(cfg));
  return cfg.output_dir;
}

// Records `files` (relative to run_dir) in the manifest together with the
// producing command, config digest and a content digest.
void manifest_add(const fs::path& run_dir, const std::string& command, const std::string& digest,
                  const std::vector<std::string>& files) {
  const fs::path path = run_dir / kManifestFile;
  json doc = json::object();
  if (fs::exists(path)) {
    doc = json::parse(read_file(path), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ParseError("manifest is not a JSON object", 1);
  }
  json& artifacts = doc["artifacts"];
  if (!artifacts.is_object()) artifacts = json::object();
  for (const auto& f : files)
    artifacts[f] = {{"command", command},
                    {"config_digest", digest},
                    {"content_fnv1a", textio::fnv1a_hex(read_file(run_dir / f))}};
  write_file(path, doc.dump(2) + "\n");
}

std::string num(double v) { return textio::format_double(v); }

// Short form for console messages only; artifacts use num().
std::string brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

Dataset load_checked_dataset(const fs::path& path, const ExperimentConfig& cfg) {
  Dataset ds = dataset_load(path);
  if (ds.mode != cfg.plant.mode)
    throw ConfigError("dataset mode " + std::string(to_string(ds.mode)) + " does not match config plant mode " +
                      std::string(to_string(cfg.plant.mode)));
  return ds;
}

std::string unit_of(PlantMode m) { return m == PlantMode::Chamber2D ? "deg" : "percent"; }

}  // namespace

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const SaturationError& e) {
    err << "error: plant saturation: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "error: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ShapeError& e) {
    err << "error: shape mismatch: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ParseError& e) {
    err << "error: parse: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}

// ---------------------------------------------------------------------------

int cmd_collect(const ExperimentConfig& cfg, std::ostream& log) {
  const fs::path dir = prepare_run_dir(cfg);
  const auto& opt = cfg.collector.options;
  const PlantState plant = plant_init(cfg.plant);
  const Dataset ds =
      cfg.collector.method == CollectMethod::Phased ? collect_phased(plant, opt) : collect_traditional(plant, opt);
  dataset_save(ds, dir / kDatasetFile);

  json phases = json::object();
  for (Phase ph : {Phase::A, Phase::B, Phase::C, Phase::Traditional}) {
    const auto count = std::count_if(ds.records.begin(), ds.records.end(), [&](const Record& r) { return r.phase == ph; });
    if (count == 0) continue;
    const Phase only[1] = {ph};
    phases[std::string(to_string(ph))] = {{"records", count},
                                          {"tip_std", tip_position_std(ds, cfg.plant, only)},
                                          {"max_tip_x_excursion", max_tip_x_excursion(ds, cfg.plant, ph)}};
  }
  const json summary = {{"records", ds.size()},
                        {"method", cfg.collector.method == CollectMethod::Phased ? "phased" : "traditional"},
                        {"seed", ds.seed},
                        {"plant_digest", ds.plant_digest},
                        {"tip_std", tip_position_std(ds, cfg.plant)},
                        {"phases", phases}};
  write_file(dir / "collect_summary.json", summary.dump(2) + "\n");
  manifest_add(dir, "collect", config_digest(cfg), {kDatasetFile, "collect_summary.json"});
  log << "collected " << ds.size() << " records (" << summary["method"].get<std::string>() << ", tip std "
      << brief(summary["tip_std"].get<double>()) << ") -> " << (dir / kDatasetFile).string() << '\n';
  return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg, const std::optional<fs::path>& dataset, std::ostream& log) {
  const fs::path dir = prepare_run_dir(cfg);
  const Dataset ds = load_checked_dataset(dataset.value_or(dir / kDatasetFile), cfg);
  const nn::NetHyper h = cfg.hyper(ds.n_sum, ds.mode);
  h.validate();
  if (ds.size() <= static_cast<std::size_t>(h.window) + 1)
    throw DomainError("dataset has " + std::to_string(ds.size()) + " records, window needs more than " +
                      std::to_string(h.window + 1));
  const PairSet pairs = make_training_pairs(ds, h.window);
  auto model = nn::make_model(h);
  log << "training " << nn::to_string(h.arch) << " (" << model->parameter_count() << " parameters) on "
      << pairs.groups() << " groups\n";

  std::string curve;
  const nn::TrainResult res = nn::train(*model, pairs, cfg.network.train, [&](const nn::EpochStat& s) {
    curve += std::to_string(s.epoch) + "," + num(s.train_mse) + "," + num(s.holdout_mse) + "\n";
    log << "  epoch " << s.epoch << " train " << brief(s.train_mse) << " holdout " << brief(s.holdout_mse) << '\n';
  });

  nn::model_save(*model, dir / kModelFile);
  // Epoch 0 is the loss before the first update; it has no holdout value.
  write_file(dir / "loss_curve.csv", "epoch,train_mse,holdout_mse\n0," + num(res.initial_mse) + ",\n" + curve);
  std::ostringstream est;
  estimation_table_write(res.estimation, est);
  write_file(dir / "estimation.csv", est.str());
  manifest_add(dir, "train", config_digest(cfg), {kModelFile, "loss_curve.csv", "estimation.csv"});
  for (std::size_t m = 0; m < res.estimation.size(); ++m)
    log << "  module " << m + 1 << " estimation error " << brief(res.estimation[m].mean) << " +- "
        << brief(res.estimation[m].std) << " %\n";
  return kExitOk;
}

int cmd_eval_estimation(const ExperimentConfig& cfg, const std::optional<fs::path>& dataset,
                        const std::optional<fs::path>& model_path, std::ostream& log) {
  const fs::path dir = prepare_run_dir(cfg);
  const auto model = nn::model_load(model_path.value_or(dir / kModelFile));
  const Dataset ds = load_checked_dataset(dataset.value_or(dir / kDatasetFile), cfg);
  const PairSet pairs = make_training_pairs(ds, model->hyper().window);
  std::vector<std::size_t> all(pairs.groups());
  for (std::size_t g = 0; g < all.size(); ++g) all[g] = g;
  if (model->bound_n_sum() != 0 && model->bound_n_sum() != pairs.n_sum())
    throw ShapeError(std::string(nn::to_string(model->hyper().arch)) + " was trained for " +
                     std::to_string(model->bound_n_sum()) + " modules; dataset has " + std::to_string(pairs.n_sum()));
  const auto est = nn::estimation_error(*model, pairs, all);
  std::ostringstream os;
  estimation_table_write(est, os);
  write_file(dir / "estimation_eval.csv", os.str());
  manifest_add(dir, "eval-estimation", config_digest(cfg), {"estimation_eval.csv"});
  for (std::size_t m = 0; m < est.size(); ++m)
    log << "module " << m + 1 << " estimation error " << brief(est[m].mean) << " +- " << brief(est[m].std) << " %\n";
  return kExitOk;
}

int cmd_control(const ExperimentConfig& cfg, const std::optional<fs::path>& model_path, std::ostream& log) {
  if (cfg.tasks.empty()) throw ConfigError("config has no tasks");
  const fs::path dir = prepare_run_dir(cfg);
  fs::create_directories(dir / "runs");
  std::shared_ptr<const nn::Model> model;
  if (cfg.controller == ControllerKind::Model) model = nn::model_load(model_path.value_or(dir / kModelFile));

  std::vector<ErrorRow> rows;
  std::vector<std::string> files;
  bool aborted = false, missed = false;
  for (const TaskConfig& task : cfg.tasks) {
    const PlantParams plant = cfg.plant_for(task);
    std::unique_ptr<Controller> ctl;
    switch (cfg.controller) {
      case ControllerKind::Model: ctl = std::make_unique<NetController>(model); break;
      case ControllerKind::Oracle: ctl = std::make_unique<OracleController>(plant); break;
      case ControllerKind::Zero: ctl = std::make_unique<ZeroController>(); break;
    }
    const RunLog run = run_closed_loop(plant_init(plant), *ctl, task.spec, task.seed);
    const std::string file = "runs/" + task.id() + "_" + run.controller_id + ".log";
    runlog_save(run, dir / file);
    files.push_back(file);
    if (!run.complete()) {
      log << task.id() << ": aborted at step " << run.failed_step << ": " << run.failure << '\n';
      aborted = true;
      continue;
    }
    for (const ErrorRow& r : error_rows(run)) {
      const bool ok = !task.max_error || r.mean < *task.max_error;
      missed = missed || !ok;
      log << task.id() << " " << r.controller << " module " << r.module << ": " << brief(r.mean) << " +- " << brief(r.std)
          << (r.unit == "deg" ? " deg" : " %");
      if (task.max_error) log << (ok ? "  ok (< " : "  MISS (>= ") << brief(*task.max_error) << ")";
      log << '\n';
      rows.push_back(r);
    }
  }
  std::ostringstream os;
  error_table_write(rows, os);
  write_file(dir / "control_report.csv", os.str());
  files.push_back("control_report.csv");
  manifest_add(dir, "control", config_digest(cfg), files);
  if (aborted) return kExitNumeric;
  return missed ? kExitThreshold : kExitOk;
}

int cmd_report(const fs::path& run_dir, std::ostream& log) {
  const fs::path runs = run_dir / "runs";
  std::vector<fs::path> logs;
  if (fs::is_directory(runs))
    for (const auto& e : fs::directory_iterator(runs))
      if (e.is_regular_file() && e.path().extension() == ".log") logs.push_back(e.path());
  if (logs.empty()) throw DomainError("no runs under " + runs.string());
  std::sort(logs.begin(), logs.end());

  std::vector<ErrorRow> rows;
  json aborted = json::array();
  std::vector<std::string> files;
  for (const auto& p : logs) {
    const RunLog run = runlog_load(p);
    const std::string stem = p.stem().string();
    if (!run.complete()) {
      aborted.push_back({{"run", stem}, {"failed_step", run.failed_step}, {"failure", run.failure}});
    } else {
      for (auto& r : error_rows(run)) rows.push_back(std::move(r));
    }
    // Long-format series: one line per (step, module).
    const int d = config_dim(run.mode);
    std::string plot = "t,module";
    for (const char* kind : {"des", "ach"})
      for (int k = 0; k < d; ++k) plot += std::string(",") + kind + "_" + (d == 3 ? "xyz"[k] : "xz"[k]);
    if (run.mode == PlantMode::Chamber2D) plot += ",des_deg,ach_deg";
    plot += '\n';
    for (std::size_t t = 0; t < run.desired.size(); ++t)
      for (int m = 0; m < run.n_sum; ++m) {
        plot += std::to_string(t + 1) + "," + std::to_string(m + 1);
        for (int k = 0; k < d; ++k) plot += "," + num(run.desired[t][m][k]);
        for (int k = 0; k < d; ++k) plot += "," + num(run.achieved[t][m][k]);
        if (run.mode == PlantMode::Chamber2D)
          plot += "," + num(bending_angle_deg(run.desired[t][m])) + "," + num(bending_angle_deg(run.achieved[t][m]));
        plot += '\n';
      }
    const std::string file = "plot/" + stem + ".csv";
    write_file(run_dir / file, plot);
    files.push_back(file);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ErrorRow& a, const ErrorRow& b) {
    return std::tie(a.task, a.n_sum, a.controller, a.module) < std::tie(b.task, b.n_sum, b.controller, b.module);
  });

  std::ostringstream os;
  error_table_write(rows, os);
  write_file(run_dir / "report.csv", os.str());
  json jrows = json::array();
  for (const auto& r : rows)
    jrows.push_back({{"task", r.task},
                     {"controller", r.controller},
                     {"n_sum", r.n_sum},
                     {"module", r.module},
                     {"mean", r.mean},
                     {"std", r.std},
                     {"unit", r.unit}});
  write_file(run_dir / "report.json", json{{"rows", jrows}, {"aborted", aborted}}.dump(2) + "\n");
  files.push_back("report.csv");
  files.push_back("report.json");

  std::string digest = "-";
  if (fs::exists(run_dir / "config.json")) digest = textio::fnv1a_hex(read_file(run_dir / "config.json"));
  manifest_add(run_dir, "report", digest, files);
  log << "merged " << logs.size() << " runs into " << rows.size() << " rows -> " << (run_dir / "report.csv").string()
      << '\n';
  return aborted.empty() ? kExitOk : kExitNumeric;
}

// ---------------------------------------------------------------------------
// Tables

std::vector<ErrorRow> error_rows(const RunLog& log) {
  std::vector<ErrorRow> rows;
  const auto stats = evaluate_run(log);
  for (std::size_t m = 0; m < stats.size(); ++m)
    rows.push_back({std::string(to_string(log.task)), log.controller_id, log.n_sum, static_cast<int>(m + 1),
                    stats[m].mean, stats[m].std, unit_of(log.mode)});
  return rows;
}

void error_table_write(const std::vector<ErrorRow>& rows, std::ostream& os) {
  std::string out = "task,controller,n_sum,module,mean,std,unit\n";
  for (const auto& r : rows)
    out += r.task + "," + r.controller + "," + std::to_string(r.n_sum) + "," + std::to_string(r.module) + "," +
           num(r.mean) + "," + num(r.std) + "," + r.unit + "\n";
  os << out;
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

}  // namespace

std::vector<ErrorRow> error_table_read(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line) || line != "task,controller,n_sum,module,mean,std,unit")
    throw ParseError("not an error table", lineno);
  std::vector<ErrorRow> rows;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 7) throw ParseError("expected 7 fields", lineno);
    ErrorRow r;
    r.task = std::string(f[0]);
    r.controller = std::string(f[1]);
    r.n_sum = static_cast<int>(textio::parse_int(f[2], lineno));
    r.module = static_cast<int>(textio::parse_int(f[3], lineno));
    r.mean = textio::parse_double(f[4], lineno);
    r.std = textio::parse_double(f[5], lineno);
    r.unit = std::string(f[6]);
    if (r.unit != "percent" && r.unit != "deg") throw ParseError("unknown unit '" + r.unit + "'", lineno);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ErrorRow> error_table_load(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return error_table_read(is);
}

void estimation_table_write(const std::vector<MeanStd>& rows, std::ostream& os) {
  std::string out = "module,mean,std\n";
  for (std::size_t m = 0; m < rows.size(); ++m)
    out += std::to_string(m + 1) + "," + num(rows[m].mean) + "," + num(rows[m].std) + "\n";
  os << out;
}

std::vector<MeanStd> estimation_table_read(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line) || line != "module,mean,std") throw ParseError("not an estimation table", lineno);
  std::vector<MeanStd> rows;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 3) throw ParseError("expected 3 fields", lineno);
    if (textio::parse_int(f[0], lineno) != static_cast<long long>(rows.size() + 1))
      throw ParseError("module index out of sequence", lineno);
    rows.push_back({textio::parse_double(f[1], lineno), textio::parse_double(f[2], lineno)});
  }
  return rows;
}

}  // namespace modsoft::app

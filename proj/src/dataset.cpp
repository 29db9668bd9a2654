#include "modsoft/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "modsoft/errors.hpp"
#include "modsoft/textio.hpp"

namespace modsoft {

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::A: return "a";
    case Phase::B: return "b";
    case Phase::C: return "c";
    case Phase::Traditional: return "traditional";
  }
  return "?";
}

Phase phase_from_string(std::string_view s) {
  if (s == "a") return Phase::A;
  if (s == "b") return Phase::B;
  if (s == "c") return Phase::C;
  if (s == "traditional") return Phase::Traditional;
  throw DomainError("unknown phase tag '" + std::string(s) + "'");
}

void Dataset::validate() const {
  const double tol = 1e-12;
  int last_phase = -1;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const Record& rec = records[r];
    auto fail = [&](const std::string& m) { throw DomainError("record " + std::to_string(r) + ": " + m); };
    if (rec.actions.size() != static_cast<std::size_t>(n_sum) || rec.configs.size() != static_cast<std::size_t>(n_sum))
      fail("module count differs from n_sum");
    if (r > 0 && rec.t <= records[r - 1].t) fail("time index not strictly increasing");
    for (const auto& c : rec.configs)
      if (c.dim != d()) fail("configuration dimension differs from mode");
    const int ph = static_cast<int>(rec.phase);
    if (ph < last_phase) fail("phase tags are not contiguous");
    last_phase = ph;
    if (r > 0 && delta_max > 0.0) {
      for (int m = 0; m < n_sum; ++m)
        for (int k = 0; k < a_dim(); ++k)
          if (std::abs(rec.actions[m][k] - records[r - 1].actions[m][k]) > delta_max + tol)
            fail("action step exceeds delta_max");
    }
  }
}

std::vector<ModuleAction> random_walk_continue(const ModuleAction& start, long len, double delta_max, Rng& rng,
                                               int a_dim) {
  std::vector<ModuleAction> out;
  out.reserve(static_cast<std::size_t>(std::max(0L, len)));
  ModuleAction a = start;
  for (long t = 0; t < len; ++t) {
    for (int k = 0; k < a_dim; ++k)
      a.a[k] = std::clamp(a.a[k] + rng.uniform(-delta_max, delta_max), -1.0, 1.0);
    out.push_back(a);
  }
  return out;
}

std::vector<ModuleAction> random_walk_sequence(long len, double delta_max, std::uint64_t seed, int a_dim) {
  if (len < 1) throw DomainError("random walk length must be >= 1");
  if (!(delta_max > 0.0 && delta_max <= 2.0)) throw DomainError("delta_max must lie in (0, 2]");
  Rng rng(seed);
  std::vector<ModuleAction> out{ModuleAction{}};
  auto rest = random_walk_continue(out.front(), len - 1, delta_max, rng, a_dim);
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

PhaseSizes phase_sizes(long n) {
  const long third = (n + 2) / 3;
  PhaseSizes s;
  s.a = std::min(third, n);
  s.b = std::min(third, n - s.a);
  s.c = n - s.a - s.b;
  return s;
}

namespace {

// actions[t][module]
using Schedule = std::vector<std::vector<ModuleAction>>;

Dataset run_schedule(PlantState plant, const Schedule& schedule, const std::vector<Phase>& phases,
                     const CollectOptions& opt) {
  const PlantParams params = plant.params;
  Dataset ds;
  ds.n_sum = params.n_sum;
  ds.mode = params.mode;
  ds.seed = opt.seed;
  ds.delta_max = opt.delta_max;
  ds.plant_digest = params.digest();
  ds.records.reserve(schedule.size());
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    Record rec;
    rec.t = static_cast<long>(t);
    rec.phase = phases[t];
    rec.actions = schedule[t];
    rec.configs = plant_observe(plant);
    ds.records.push_back(std::move(rec));
    if (t + 1 < schedule.size()) {
      try {
        plant = plant_step(std::move(plant), schedule[t]);
      } catch (const SaturationError& e) {
        throw SaturationError(e.module(), static_cast<long>(t), e.magnitude());
      }
    }
  }
  return ds;
}

void check_collect(const PlantState& plant, const CollectOptions& opt, long min_samples) {
  if (opt.n_samples < min_samples)
    throw DomainError("n_samples must be >= " + std::to_string(min_samples));
  if (!(opt.delta_max > 0.0 && opt.delta_max <= 2.0)) throw DomainError("delta_max must lie in (0, 2]");
  if (plant.size() == 0) throw DomainError("plant has no modules");
}

}  // namespace

Dataset collect_phased(PlantState plant, const CollectOptions& opt) {
  check_collect(plant, opt, 3);
  const int n = static_cast<int>(plant.size());
  const int a_dim = action_dim(plant.params.mode);
  const int end_group = opt.phase_b_split;
  if (end_group < 1 || end_group > std::max(1, n - 1))
    throw DomainError("phase_b_split must lie in [1, n_sum - 1]");
  const PhaseSizes sz = phase_sizes(opt.n_samples);

  Schedule schedule;
  std::vector<Phase> phases;
  schedule.reserve(static_cast<std::size_t>(opt.n_samples));
  phases.reserve(static_cast<std::size_t>(opt.n_samples));

  // Phase a: one walk a_a1 drives every module.
  for (const auto& a : random_walk_sequence(sz.a, opt.delta_max, mix_seed(opt.seed, 0), a_dim)) {
    schedule.emplace_back(static_cast<std::size_t>(n), a);
    phases.push_back(Phase::A);
  }

  // Phase b: distal group on a_b3, the remaining modules on a_b1. Each
  // continues from the action its modules last held.
  if (sz.b > 0) {
    Rng rng_rest(mix_seed(opt.seed, 1));
    Rng rng_end(mix_seed(opt.seed, 2));
    const ModuleAction last = schedule.back().front();
    const auto rest = random_walk_continue(last, sz.b, opt.delta_max, rng_rest, a_dim);
    const auto tail = random_walk_continue(last, sz.b, opt.delta_max, rng_end, a_dim);
    for (long t = 0; t < sz.b; ++t) {
      std::vector<ModuleAction> row(static_cast<std::size_t>(n));
      for (int m = 0; m < n; ++m) row[m] = m >= n - end_group ? tail[t] : rest[t];
      schedule.push_back(std::move(row));
      phases.push_back(Phase::B);
    }
  }

  // Phase c: independent walks.
  if (sz.c > 0) {
    std::vector<std::vector<ModuleAction>> walks;
    for (int m = 0; m < n; ++m) {
      Rng rng(mix_seed(opt.seed, 3 + static_cast<std::uint64_t>(m)));
      walks.push_back(random_walk_continue(schedule.back()[m], sz.c, opt.delta_max, rng, a_dim));
    }
    for (long t = 0; t < sz.c; ++t) {
      std::vector<ModuleAction> row(static_cast<std::size_t>(n));
      for (int m = 0; m < n; ++m) row[m] = walks[m][t];
      schedule.push_back(std::move(row));
      phases.push_back(Phase::C);
    }
  }
  return run_schedule(std::move(plant), schedule, phases, opt);
}

Dataset collect_traditional(PlantState plant, const CollectOptions& opt) {
  check_collect(plant, opt, 1);
  const int n = static_cast<int>(plant.size());
  const int a_dim = action_dim(plant.params.mode);
  std::vector<std::vector<ModuleAction>> walks;
  for (int m = 0; m < n; ++m)
    walks.push_back(random_walk_sequence(opt.n_samples, opt.delta_max,
                                         mix_seed(opt.seed, 1000 + static_cast<std::uint64_t>(m)), a_dim));
  Schedule schedule(static_cast<std::size_t>(opt.n_samples), std::vector<ModuleAction>(static_cast<std::size_t>(n)));
  for (long t = 0; t < opt.n_samples; ++t)
    for (int m = 0; m < n; ++m) schedule[t][m] = walks[m][t];
  return run_schedule(std::move(plant), schedule, std::vector<Phase>(schedule.size(), Phase::Traditional), opt);
}

double tip_position_std(const Dataset& ds, const PlantParams& params, std::span<const Phase> phases) {
  double sum[3] = {0, 0, 0}, sq[3] = {0, 0, 0};
  std::size_t count = 0;
  for (const auto& rec : ds.records) {
    if (!phases.empty() && std::find(phases.begin(), phases.end(), rec.phase) == phases.end()) continue;
    const auto tip = world_end_points(params, rec.configs).back();
    for (int k = 0; k < 3; ++k) {
      sum[k] += tip[k];
      sq[k] += tip[k] * tip[k];
    }
    ++count;
  }
  if (count == 0) return 0.0;
  double var = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double m = sum[k] / count;
    var += std::max(0.0, sq[k] / count - m * m);
  }
  return std::sqrt(var);
}

double max_tip_x_excursion(const Dataset& ds, const PlantParams& params, Phase phase) {
  double best = 0.0;
  for (const auto& rec : ds.records)
    if (rec.phase == phase) best = std::max(best, std::abs(world_end_points(params, rec.configs).back()[0]));
  return best;
}

// ---------------------------------------------------------------------------
// Text format

void dataset_write(const Dataset& ds, std::ostream& os) {
  os << "modsoft-dataset version=1 n_sum=" << ds.n_sum << " mode=" << to_string(ds.mode) << " d=" << ds.d()
     << " a_dim=" << ds.a_dim() << " seed=" << ds.seed << " delta_max=" << textio::format_double(ds.delta_max)
     << " plant=" << (ds.plant_digest.empty() ? "-" : ds.plant_digest) << '\n';
  std::string line;
  for (const auto& rec : ds.records) {
    line.clear();
    line += std::to_string(rec.t);
    line += ' ';
    line += to_string(rec.phase);
    for (int m = 0; m < ds.n_sum; ++m) {
      for (int k = 0; k < ds.a_dim(); ++k) {
        line += ' ';
        textio::append_double(line, rec.actions[m][k]);
      }
      for (int k = 0; k < ds.d(); ++k) {
        line += ' ';
        textio::append_double(line, rec.configs[m][k]);
      }
    }
    line += '\n';
    os << line;
  }
}

Dataset dataset_read(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line)) throw ParseError("empty dataset file", lineno);
  if (line.rfind("modsoft-dataset", 0) != 0) throw ParseError("not a dataset file", lineno);
  const auto kv = textio::parse_header_fields(line);
  Dataset ds;
  if (textio::require_field(kv, "version", lineno) != "1") throw ParseError("unsupported dataset version", lineno);
  ds.n_sum = static_cast<int>(textio::parse_int(textio::require_field(kv, "n_sum", lineno), lineno));
  try {
    ds.mode = plant_mode_from_string(textio::require_field(kv, "mode", lineno));
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), lineno);
  }
  if (ds.n_sum < 1) throw ParseError("n_sum must be >= 1", lineno);
  if (textio::parse_int(textio::require_field(kv, "d", lineno), lineno) != ds.d() ||
      textio::parse_int(textio::require_field(kv, "a_dim", lineno), lineno) != ds.a_dim())
    throw ParseError("header dimensions disagree with mode", lineno);
  ds.seed = textio::parse_u64(textio::require_field(kv, "seed", lineno), lineno);
  ds.delta_max = textio::parse_double(textio::require_field(kv, "delta_max", lineno), lineno);
  ds.plant_digest = textio::require_field(kv, "plant", lineno);
  if (ds.plant_digest == "-") ds.plant_digest.clear();

  const std::size_t cols = 2 + static_cast<std::size_t>(ds.n_sum) * (ds.a_dim() + ds.d());
  while (std::getline(is, line)) {
    ++lineno;
    auto tok = textio::split(line);
    if (tok.empty()) continue;
    if (tok.size() != cols)
      throw ParseError("expected " + std::to_string(cols) + " columns, found " + std::to_string(tok.size()), lineno);
    Record rec;
    rec.t = textio::parse_int(tok[0], lineno);
    try {
      rec.phase = phase_from_string(tok[1]);
    } catch (const DomainError& e) {
      throw ParseError(e.what(), lineno);
    }
    std::size_t c = 2;
    for (int m = 0; m < ds.n_sum; ++m) {
      ModuleAction a;
      for (int k = 0; k < ds.a_dim(); ++k) a.a[k] = textio::parse_double(tok[c++], lineno);
      ModuleConfig v = ModuleConfig::rest(ds.d());
      for (int k = 0; k < ds.d(); ++k) v.v[k] = textio::parse_double(tok[c++], lineno);
      rec.actions.push_back(a);
      rec.configs.push_back(v);
    }
    if (!ds.records.empty() && rec.t <= ds.records.back().t) throw ParseError("time index not increasing", lineno);
    ds.records.push_back(std::move(rec));
  }
  try {
    ds.validate();
  } catch (const DomainError& e) {
    throw ParseError(e.what(), lineno);
  }
  return ds;
}

void dataset_save(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  dataset_write(ds, os);
}

Dataset dataset_load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return dataset_read(is);
}

// ---------------------------------------------------------------------------
// Training pairs

PairSet::PairSet(int n_sum, int d, int a_dim, int window)
    : n_sum_(n_sum), d_(d), a_dim_(a_dim), window_(window), feature_dim_(modsoft::feature_dim(d, a_dim, window)) {}

void PairSet::resize(std::size_t groups) {
  groups_ = groups;
  x_.assign(groups * n_sum_ * feature_dim_, 0.0);
  y_.assign(groups * n_sum_ * a_dim_, 0.0);
}

std::span<double> PairSet::features(std::size_t g, int m) {
  return {x_.data() + (g * n_sum_ + m) * feature_dim_, static_cast<std::size_t>(feature_dim_)};
}
std::span<const double> PairSet::features(std::size_t g, int m) const {
  return {x_.data() + (g * n_sum_ + m) * feature_dim_, static_cast<std::size_t>(feature_dim_)};
}
std::span<double> PairSet::target(std::size_t g, int m) {
  return {y_.data() + (g * n_sum_ + m) * a_dim_, static_cast<std::size_t>(a_dim_)};
}
std::span<const double> PairSet::target(std::size_t g, int m) const {
  return {y_.data() + (g * n_sum_ + m) * a_dim_, static_cast<std::size_t>(a_dim_)};
}

PairSet PairSet::select(std::span<const std::size_t> idx) const {
  PairSet out(n_sum_, d_, a_dim_, window_);
  out.resize(idx.size());
  const std::size_t xs = static_cast<std::size_t>(n_sum_) * feature_dim_;
  const std::size_t ys = static_cast<std::size_t>(n_sum_) * a_dim_;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(x_.begin() + idx[i] * xs, xs, out.x_.begin() + i * xs);
    std::copy_n(y_.begin() + idx[i] * ys, ys, out.y_.begin() + i * ys);
  }
  return out;
}

void assemble_features(double label, const ModuleConfig& desired, std::span<const ModuleConfig> states,
                       std::span<const ModuleAction> actions, int a_dim, std::span<double> out) {
  const int d = desired.dim;
  const int window = static_cast<int>(states.size());
  if (window < 1 || actions.size() + 1 != states.size())
    throw DomainError("history window needs K states and K-1 actions");
  if (out.size() != static_cast<std::size_t>(feature_dim(d, a_dim, window)))
    throw DomainError("feature buffer has wrong length");
  std::size_t c = 0;
  out[c++] = label;
  for (int k = 0; k < d; ++k) out[c++] = desired[k];
  for (const auto& s : states)
    for (int k = 0; k < d; ++k) out[c++] = s[k];
  for (const auto& a : actions)
    for (int k = 0; k < a_dim; ++k) out[c++] = a[k];
}

void time_step_input(std::span<const double> f, int d, int a_dim, int window, int k, std::span<double> out) {
  std::size_t c = 0;
  for (int j = 0; j < d; ++j) out[c++] = f[1 + j];
  const std::size_t s0 = 1 + d + static_cast<std::size_t>(k) * d;
  for (int j = 0; j < d; ++j) out[c++] = f[s0 + j];
  const std::size_t a0 = 1 + d + static_cast<std::size_t>(window) * d + static_cast<std::size_t>(k - 1) * a_dim;
  for (int j = 0; j < a_dim; ++j) out[c++] = k == 0 ? 0.0 : f[a0 + j];
}

PairSet make_training_pairs(const Dataset& ds, int window, bool parallel) {
  if (window < 1) throw DomainError("window must be >= 1");
  if (ds.size() <= static_cast<std::size_t>(window) + 1)
    throw DomainError("dataset of " + std::to_string(ds.size()) + " records is too short for window " +
                      std::to_string(window));
  const int n = ds.n_sum;
  PairSet pairs(n, ds.d(), ds.a_dim(), window);
  const long first = window - 1;
  const long last = static_cast<long>(ds.size()) - 2;
  pairs.resize(static_cast<std::size_t>(last - first + 1));

#pragma omp parallel for schedule(static) if (parallel)
  for (long t = first; t <= last; ++t) {
    const std::size_t g = static_cast<std::size_t>(t - first);
    std::vector<ModuleConfig> states(static_cast<std::size_t>(window));
    std::vector<ModuleAction> actions(static_cast<std::size_t>(window - 1));
    for (int m = 0; m < n; ++m) {
      for (int k = 0; k < window; ++k) states[k] = ds.records[t - window + 1 + k].configs[m];
      for (int k = 0; k + 1 < window; ++k) actions[k] = ds.records[t - window + 1 + k].actions[m];
      assemble_features(module_label(m + 1, n), ds.records[t + 1].configs[m], states, actions, ds.a_dim(),
                        pairs.features(g, m));
      auto y = pairs.target(g, m);
      for (int k = 0; k < ds.a_dim(); ++k) y[k] = ds.records[t].actions[m][k];
    }
  }
  return pairs;
}

}  // namespace modsoft

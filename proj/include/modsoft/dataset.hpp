#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modsoft/core.hpp"
#include "modsoft/plant.hpp"
#include "modsoft/rng.hpp"

namespace modsoft {

enum class Phase { A, B, C, Traditional };

std::string_view to_string(Phase p);
Phase phase_from_string(std::string_view s);

/// One control period: the configurations observed at step t, and the
/// actions applied at step t (which produce the configurations of t+1).
struct Record {
  long t = 0;
  Phase phase = Phase::Traditional;
  std::vector<ModuleAction> actions;
  RobotConfig configs;

  bool operator==(const Record&) const = default;
};

struct Dataset {
  int n_sum = 0;
  PlantMode mode = PlantMode::Cable3D;
  std::uint64_t seed = 0;
  double delta_max = 0.0;
  std::string plant_digest;
  std::vector<Record> records;

  int d() const { return config_dim(mode); }
  int a_dim() const { return action_dim(mode); }
  std::size_t size() const { return records.size(); }

  /// Throws DomainError naming the first broken invariant.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

struct CollectOptions {
  long n_samples = 8000;
  double delta_max = 0.05;
  std::uint64_t seed = 1;
  // Number of distal modules sharing the "end" sequence in phase b.
  int phase_b_split = 1;
};

/// Bounded random walk starting at the origin: a(0) = 0,
/// a(t+1) = clamp(a(t) + u, -1, 1) with u ~ U[-delta_max, delta_max] per component.
std::vector<ModuleAction> random_walk_sequence(long len, double delta_max, std::uint64_t seed, int a_dim = 2);

/// Continues a walk from `start`; the returned steps exclude `start` itself.
std::vector<ModuleAction> random_walk_continue(const ModuleAction& start, long len, double delta_max, Rng& rng,
                                               int a_dim);

struct PhaseSizes {
  long a = 0, b = 0, c = 0;
};
PhaseSizes phase_sizes(long n_samples);

/// Three-stage excitation: all modules share one walk, then the distal
/// group and the rest get one walk each, then every module walks on its own.
Dataset collect_phased(PlantState plant, const CollectOptions& opt);

/// Every module driven by an independent walk for the whole run.
Dataset collect_traditional(PlantState plant, const CollectOptions& opt);

/// Root of the trace of the covariance of the end module's world end point.
double tip_position_std(const Dataset& ds, const PlantParams& params, std::span<const Phase> phases = {});

/// Largest |x| of the end module's world end point over records of one phase.
double max_tip_x_excursion(const Dataset& ds, const PlantParams& params, Phase phase);

void dataset_save(const Dataset& ds, const std::filesystem::path& path);
Dataset dataset_load(const std::filesystem::path& path);
void dataset_write(const Dataset& ds, std::ostream& os);
Dataset dataset_read(std::istream& is);

/// Supervised inverse-model pairs, one group per usable time step and one
/// pair per module. Per module the feature vector is
///   [label | S_d | S(t-K+1) ... S(t) | A(t-K+1) ... A(t-1)]
/// with S_d = S(t+1), and the target is A(t).
class PairSet {
 public:
  PairSet() = default;
  PairSet(int n_sum, int d, int a_dim, int window);

  int n_sum() const { return n_sum_; }
  int d() const { return d_; }
  int a_dim() const { return a_dim_; }
  int window() const { return window_; }
  int feature_dim() const { return feature_dim_; }
  std::size_t groups() const { return groups_; }

  void resize(std::size_t groups);

  std::span<double> features(std::size_t g, int module);
  std::span<const double> features(std::size_t g, int module) const;
  std::span<double> target(std::size_t g, int module);
  std::span<const double> target(std::size_t g, int module) const;

  // Subset of groups in the given order.
  PairSet select(std::span<const std::size_t> idx) const;

 private:
  int n_sum_ = 0, d_ = 0, a_dim_ = 0, window_ = 0, feature_dim_ = 0;
  std::size_t groups_ = 0;
  std::vector<double> x_, y_;
};

constexpr int feature_dim(int d, int a_dim, int window) { return 1 + d + window * d + (window - 1) * a_dim; }

/// Writes one module's feature vector. `states` holds the K most recent
/// configurations (oldest first), `actions` the K-1 most recent actions.
void assemble_features(double label, const ModuleConfig& desired, std::span<const ModuleConfig> states,
                       std::span<const ModuleAction> actions, int a_dim, std::span<double> out);

/// Input of time step k (0 = oldest) of the time-recurrent baselines,
/// [S_d | S(t-K+1+k) | A(t-K+k)], derived from a feature vector. The action
/// slot of k = 0 lies outside the window and is zero.
constexpr int time_step_dim(int d, int a_dim) { return 2 * d + a_dim; }
void time_step_input(std::span<const double> features, int d, int a_dim, int window, int k, std::span<double> out);

PairSet make_training_pairs(const Dataset& ds, int window, bool parallel = true);

}  // namespace modsoft

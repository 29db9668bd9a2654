#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gen.hpp"
#include "modsoft/dataset.hpp"
#include "modsoft/errors.hpp"

using namespace modsoft;

namespace {

CollectOptions opts(long n, std::uint64_t seed, double delta = 0.05) {
  CollectOptions o;
  o.n_samples = n;
  o.seed = seed;
  o.delta_max = delta;
  return o;
}

std::string to_text(const Dataset& ds) {
  std::ostringstream os;
  dataset_write(ds, os);
  return os.str();
}

// Parses `text` and returns the line number of the ParseError, or 0.
std::size_t parse_error_line(const std::string& text) {
  std::istringstream is(text);
  try {
    dataset_read(is);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(RandomWalk, StartsAtOrigin) {
  auto w = random_walk_sequence(1, 0.1, 3);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0], (ModuleAction{{0.0, 0.0}}));
}

TEST(RandomWalk, StepBoundAndRange) {
  Rng gen(44);
  for (int trial = 0; trial < 50; ++trial) {
    const double delta = gen.uniform(0.01, 2.0);
    const long len = 1 + static_cast<long>(gen.index(400));
    auto w = random_walk_sequence(len, delta, gen.next());
    ASSERT_EQ(static_cast<long>(w.size()), len);
    for (std::size_t t = 1; t < w.size(); ++t)
      for (int k = 0; k < 2; ++k) {
        EXPECT_LE(std::abs(w[t][k] - w[t - 1][k]), delta + 1e-15);
        EXPECT_LE(std::abs(w[t][k]), 1.0);
      }
  }
}

TEST(RandomWalk, SeedDeterminism) {
  EXPECT_EQ(random_walk_sequence(500, 0.3, 17), random_walk_sequence(500, 0.3, 17));
  EXPECT_NE(random_walk_sequence(500, 0.3, 17), random_walk_sequence(500, 0.3, 18));
}

TEST(RandomWalk, PlanarHasOneComponent) {
  for (const auto& a : random_walk_sequence(100, 0.5, 2, 1)) EXPECT_EQ(a[1], 0.0);
}

TEST(RandomWalk, BadArguments) {
  EXPECT_THROW(random_walk_sequence(0, 0.1, 1), DomainError);
  EXPECT_THROW(random_walk_sequence(5, 0.0, 1), DomainError);
  EXPECT_THROW(random_walk_sequence(5, 2.5, 1), DomainError);
}

TEST(PhaseSizes, Split) {
  PhaseSizes s = phase_sizes(16000);
  EXPECT_EQ(s.a, 5334);
  EXPECT_EQ(s.b, 5334);
  EXPECT_EQ(s.c, 5332);
  PhaseSizes t = phase_sizes(3);
  EXPECT_EQ(t.a + t.b + t.c, 3);
}

TEST(CollectPhased, PhasesAndSharing) {
  Dataset ds = collect_phased(plant_init(PlantParams{}), opts(3000, 5));
  ASSERT_NO_THROW(ds.validate());
  ASSERT_EQ(ds.size(), 3000u);
  PhaseSizes s = phase_sizes(3000);
  for (std::size_t t = 0; t < ds.size(); ++t) {
    const Record& r = ds.records[t];
    EXPECT_EQ(r.t, static_cast<long>(t));
    if (static_cast<long>(t) < s.a) {
      ASSERT_EQ(r.phase, Phase::A);
      for (int m = 1; m < 4; ++m) EXPECT_EQ(r.actions[m], r.actions[0]);
    } else if (static_cast<long>(t) < s.a + s.b) {
      ASSERT_EQ(r.phase, Phase::B);
      EXPECT_EQ(r.actions[1], r.actions[0]);
      EXPECT_EQ(r.actions[2], r.actions[0]);
    } else {
      ASSERT_EQ(r.phase, Phase::C);
    }
    if (t > 0)
      for (int m = 0; m < 4; ++m)
        for (int k = 0; k < 2; ++k)
          EXPECT_LE(std::abs(r.actions[m][k] - ds.records[t - 1].actions[m][k]), 0.05 + 1e-15);
  }
  // Phase b and c do drive modules apart.
  bool b_split = false;
  for (long t = s.a; t < s.a + s.b; ++t) b_split |= ds.records[t].actions[3] != ds.records[t].actions[0];
  EXPECT_TRUE(b_split);
}

TEST(CollectPhased, PhaseBSplitValidated) {
  CollectOptions o = opts(300, 1);
  o.phase_b_split = 4;
  EXPECT_THROW(collect_phased(plant_init(PlantParams{}), o), DomainError);
  o.phase_b_split = 2;
  Dataset ds = collect_phased(plant_init(PlantParams{}), o);
  const Record& r = ds.records[150];
  EXPECT_EQ(r.actions[2], r.actions[3]);
  EXPECT_EQ(r.actions[0], r.actions[1]);
}

TEST(CollectPhased, TooFewSamples) {
  EXPECT_THROW(collect_phased(plant_init(PlantParams{}), opts(2, 1)), DomainError);
}

TEST(CollectPhased, PhaseAOutreachesTraditional) {
  PlantParams p;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Dataset ph = collect_phased(plant_init(p), opts(3000, seed));
    Dataset tr = collect_traditional(plant_init(p), opts(phase_sizes(3000).a, seed));
    EXPECT_GE(max_tip_x_excursion(ph, p, Phase::A), max_tip_x_excursion(tr, p, Phase::Traditional)) << seed;
  }
}

TEST(CollectTraditional, DistinctFromPhasedSameCount) {
  Dataset ph = collect_phased(plant_init(PlantParams{}), opts(900, 3));
  Dataset tr = collect_traditional(plant_init(PlantParams{}), opts(900, 3));
  EXPECT_EQ(tr.size(), ph.size());
  EXPECT_NE(to_text(tr), to_text(ph));
  for (const auto& r : tr.records) EXPECT_EQ(r.phase, Phase::Traditional);
}

TEST(Collect, Deterministic) {
  EXPECT_EQ(to_text(collect_phased(plant_init(PlantParams{}), opts(700, 9))),
            to_text(collect_phased(plant_init(PlantParams{}), opts(700, 9))));
}

TEST(DatasetIo, ExactRoundTrip) {
  for (PlantMode mode : {PlantMode::Cable3D, PlantMode::Chamber2D}) {
    PlantParams p;
    p.mode = mode;
    p.n_sum = 3;
    Dataset ds = collect_phased(plant_init(p), opts(400, 2, 0.7));
    std::istringstream is(to_text(ds));
    Dataset back = dataset_read(is);
    EXPECT_EQ(back, ds);
    EXPECT_EQ(to_text(back), to_text(ds));
  }
}

TEST(DatasetIo, FileRoundTrip) {
  Dataset ds = collect_traditional(plant_init(PlantParams{}), opts(200, 4));
  auto path = std::filesystem::temp_directory_path() / "modsoft_test_dataset.txt";
  dataset_save(ds, path);
  EXPECT_EQ(dataset_load(path), ds);
  std::filesystem::remove(path);
}

TEST(DatasetIo, ErrorsCarryLineNumbers) {
  Dataset ds = collect_phased(plant_init(PlantParams{}), opts(10, 1));
  const std::string good = to_text(ds);
  EXPECT_EQ(parse_error_line(""), 1u);
  EXPECT_EQ(parse_error_line("hello\n"), 1u);

  // Drop one column of the third record (line 4).
  std::istringstream in(good);
  std::string line, text;
  for (int ln = 1; std::getline(in, line); ++ln) {
    if (ln == 4) line = line.substr(0, line.rfind(' '));
    text += line + '\n';
  }
  EXPECT_EQ(parse_error_line(text), 4u);

  std::string bad_num = good;
  bad_num.replace(bad_num.find(" 0 ", bad_num.find('\n')), 3, " x ");
  EXPECT_EQ(parse_error_line(bad_num), 2u);

  std::string bad_phase = good;
  bad_phase.replace(bad_phase.find(" a "), 3, " q ");
  EXPECT_EQ(parse_error_line(bad_phase), 2u);
}

TEST(DatasetIo, NonIncreasingTime) {
  Dataset ds = collect_phased(plant_init(PlantParams{}), opts(10, 1));
  ds.records[3].t = 2;
  EXPECT_THROW(ds.validate(), DomainError);
  EXPECT_EQ(parse_error_line(to_text(ds)), 5u);
}

TEST(Pairs, ShapeAndContent) {
  Dataset ds = collect_phased(plant_init(PlantParams{}), opts(300, 6, 0.4));
  const int K = 5;
  PairSet pairs = make_training_pairs(ds, K);
  EXPECT_EQ(pairs.feature_dim(), 1 + 3 + K * 3 + (K - 1) * 2);
  EXPECT_EQ(pairs.groups(), ds.size() - K);
  for (std::size_t g : {std::size_t{0}, std::size_t{37}, pairs.groups() - 1}) {
    const std::size_t t = g + K - 1;
    for (int m = 0; m < 4; ++m) {
      auto x = pairs.features(g, m);
      EXPECT_EQ(x[0], module_label(m + 1, 4));
      for (int k = 0; k < 3; ++k) EXPECT_EQ(x[1 + k], ds.records[t + 1].configs[m][k]);
      for (int s = 0; s < K; ++s)
        for (int k = 0; k < 3; ++k) EXPECT_EQ(x[4 + 3 * s + k], ds.records[t - K + 1 + s].configs[m][k]);
      for (int s = 0; s + 1 < K; ++s)
        for (int k = 0; k < 2; ++k) EXPECT_EQ(x[4 + 3 * K + 2 * s + k], ds.records[t - K + 1 + s].actions[m][k]);
      auto y = pairs.target(g, m);
      EXPECT_EQ(y[0], ds.records[t].actions[m][0]);
      EXPECT_EQ(y[1], ds.records[t].actions[m][1]);
    }
  }
}

TEST(Pairs, FeatureDimIndependentOfModuleCount) {
  for (int n : {1, 2, 4, 6}) {
    PlantParams p;
    p.n_sum = n;
    Dataset ds = collect_phased(plant_init(p), opts(60, 1));
    EXPECT_EQ(make_training_pairs(ds, 5).feature_dim(), feature_dim(3, 2, 5));
  }
}

TEST(Pairs, NoFutureLeak) {
  Dataset ds = collect_phased(plant_init(PlantParams{}), opts(200, 8));
  PairSet a = make_training_pairs(ds, 4);
  const std::size_t g = 50, t = g + 3;
  for (std::size_t u = t + 2; u < ds.size(); ++u)
    for (int m = 0; m < 4; ++m) {
      ds.records[u].configs[m] = ModuleConfig::make3(1, 0, 0);
      ds.records[u].actions[m] = ModuleAction{{0.9, -0.9}};
    }
  ds.records[t + 1].actions[0] = ModuleAction{{0.9, -0.9}};
  PairSet b = make_training_pairs(ds, 4);
  for (int m = 0; m < 4; ++m) {
    auto xa = a.features(g, m), xb = b.features(g, m);
    EXPECT_TRUE(std::equal(xa.begin(), xa.end(), xb.begin()));
  }
}

TEST(Pairs, SerialMatchesParallel) {
  Dataset ds = collect_phased(plant_init(PlantParams{}), opts(500, 2));
  PairSet a = make_training_pairs(ds, 5, false), b = make_training_pairs(ds, 5, true);
  for (std::size_t g = 0; g < a.groups(); ++g)
    for (int m = 0; m < 4; ++m) {
      auto xa = a.features(g, m), xb = b.features(g, m);
      ASSERT_TRUE(std::equal(xa.begin(), xa.end(), xb.begin()));
    }
}

TEST(Pairs, TooShort) {
  Dataset ds = collect_phased(plant_init(PlantParams{}), opts(5, 1));
  EXPECT_THROW(make_training_pairs(ds, 5), DomainError);
}

TEST(Coverage, PhasedSpreadsTipFurther) {
  PlantParams p;
  Dataset ph = collect_phased(plant_init(p), opts(8000, 1));
  Dataset tr = collect_traditional(plant_init(p), opts(8000, 1));
  EXPECT_GT(tip_position_std(ph, p), tip_position_std(tr, p));
}

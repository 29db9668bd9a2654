// Minibatch gradient: serial reference vs OpenMP kernel.
//
//   bench_grad [--samples N] [--hidden H] [--layers L] [--batch B] [--reps R]

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <vector>

#include "modsoft/dataset.hpp"
#include "modsoft/nn/model.hpp"
#include "modsoft/nn/train.hpp"
#include "modsoft/plant.hpp"

using namespace modsoft;

namespace {

template <class F>
double best_ms(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    f();
    auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradient kernel benchmark"};
  long samples = 2000;
  int hidden = 32, layers = 2, batch = 256, reps = 5;
  app.add_option("--samples", samples);
  app.add_option("--hidden", hidden);
  app.add_option("--layers", layers);
  app.add_option("--batch", batch);
  app.add_option("--reps", reps);
  CLI11_PARSE(app, argc, argv);

  PlantParams p;
  CollectOptions opt;
  opt.n_samples = samples;
  opt.seed = 11;
  Dataset ds = collect_phased(plant_init(p), opt);
  PairSet pairs = make_training_pairs(ds, 5);
  std::vector<std::size_t> idx(std::min<std::size_t>(pairs.groups(), static_cast<std::size_t>(batch)));
  std::iota(idx.begin(), idx.end(), std::size_t{0});

  std::printf("threads=%d groups=%zu hidden=%d layers=%d\n", omp_get_max_threads(), idx.size(), hidden, layers);
  std::printf("%-10s %12s %12s %9s %s\n", "arch", "serial_ms", "omp_ms", "speedup", "identical");
  for (nn::Arch arch : {nn::Arch::BiLstm, nn::Arch::FourLstm, nn::Arch::TimeLstm}) {
    nn::NetHyper h;
    h.arch = arch;
    h.hidden = hidden;
    h.layers = layers;
    h.n_sum = p.n_sum;
    auto model = nn::make_model(h);
    std::vector<double> gs(model->parameter_count()), go(model->parameter_count());
    double ls = 0.0, lo = 0.0;
    double ts = best_ms(reps, [&] {
      std::fill(gs.begin(), gs.end(), 0.0);
      ls = nn::batch_sse_grad_serial(*model, pairs, idx, gs);
    });
    double to = best_ms(reps, [&] {
      std::fill(go.begin(), go.end(), 0.0);
      lo = nn::batch_sse_grad_omp(*model, pairs, idx, go);
    });
    bool same = ls == lo && gs == go;
    std::printf("%-10s %12.2f %12.2f %9.2f %s\n", std::string(nn::to_string(arch)).c_str(), ts, to, ts / to,
                same ? "yes" : "no");
  }
  return 0;
}

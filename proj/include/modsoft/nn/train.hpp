#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "modsoft/core.hpp"
#include "modsoft/dataset.hpp"
#include "modsoft/nn/model.hpp"

namespace modsoft::nn {

// Minibatches are split into chunks of this many groups; each chunk's
// gradient is computed independently and the chunk results are summed in
// chunk order, so the result does not depend on the thread count.
inline constexpr std::size_t kGradChunk = 16;

/// Sum of squared residuals and its gradient over `idx`, chunks evaluated one
/// after another. Reference for batch_sse_grad_omp.
double batch_sse_grad_serial(const Model& m, const PairSet& pairs, std::span<const std::size_t> idx,
                             std::span<double> grad);

/// Same result, bit for bit, with chunks evaluated by an OpenMP team.
double batch_sse_grad_omp(const Model& m, const PairSet& pairs, std::span<const std::size_t> idx,
                          std::span<double> grad);

/// Unclamped predictions for `idx`, chunks evaluated in parallel.
std::vector<double> batch_predict(const Model& m, const PairSet& pairs, std::span<const std::size_t> idx);

struct LossGrad {
  double loss = 0.0;          // mean squared error over groups x modules x components
  std::vector<double> grad;   // d loss / d params
};

/// Throws NumericError when the loss is not finite.
LossGrad loss_and_grads(const Model& m, const PairSet& pairs, std::span<const std::size_t> idx);

/// Largest |g_a - g_n| / max(1e-8, |g_a| + |g_n|) over parameters, where g_n is
/// the central difference with step `epsilon`. `filter` restricts the check to
/// tensors whose name it accepts.
double grad_check(Model& m, const PairSet& pairs, std::span<const std::size_t> idx, double epsilon,
                  const std::function<bool(const std::string&)>& filter = {});

struct AdamState {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;
  std::vector<double> m, v;

  AdamState() = default;
  AdamState(std::size_t n, double lr_) : lr(lr_), m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam update, in place.
void adam_step(AdamState& s, std::span<double> params, std::span<const double> grads);

struct TrainOptions {
  int epochs = 30;
  int batch = 64;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  double holdout = 0.1;
  bool parallel = true;
};

struct EpochStat {
  int epoch = 0;
  double train_mse = 0.0;    // mean of minibatch losses during the epoch
  double holdout_mse = 0.0;  // after the epoch
};

struct TrainResult {
  double initial_mse = 0.0;
  std::vector<EpochStat> curve;
  std::vector<MeanStd> estimation;  // per module, percent of the actuation range
  std::vector<std::size_t> holdout_groups;
};

/// Shuffled minibatch Adam on a seeded train/holdout split. Throws
/// NumericError on a non-finite loss or when the epoch loss stays above ten
/// times the initial loss for three consecutive epochs.
TrainResult train(Model& m, const PairSet& pairs, const TrainOptions& opt,
                  const std::function<void(const EpochStat&)>& on_epoch = {});

/// Per-module mean and std of |clamp(A_hat) - A| / 2 * 100 over `idx`,
/// components pooled.
std::vector<MeanStd> estimation_error(const Model& m, const PairSet& pairs, std::span<const std::size_t> idx);

}  // namespace modsoft::nn

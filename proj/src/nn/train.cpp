#include "modsoft/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "modsoft/errors.hpp"
#include "modsoft/rng.hpp"

namespace modsoft::nn {

namespace {

double entry_count(const Model& m, const PairSet& pairs, std::size_t groups) {
  return static_cast<double>(groups) * pairs.n_sum() * m.hyper().a_dim;
}

double mse(const Model& m, const PairSet& pairs, std::span<const std::size_t> idx, bool parallel = true) {
  if (idx.empty()) return 0.0;
  const double sse = parallel ? batch_sse_grad_omp(m, pairs, idx, {}) : batch_sse_grad_serial(m, pairs, idx, {});
  return sse / entry_count(m, pairs, idx.size());
}

}  // namespace

LossGrad loss_and_grads(const Model& m, const PairSet& pairs, std::span<const std::size_t> idx) {
  if (idx.empty()) throw DomainError("loss_and_grads: empty batch");
  LossGrad out;
  out.grad.assign(m.parameter_count(), 0.0);
  const double sse = batch_sse_grad_omp(m, pairs, idx, out.grad);
  const double scale = 1.0 / entry_count(m, pairs, idx.size());
  out.loss = sse * scale;
  for (double& g : out.grad) g *= scale;
  if (!std::isfinite(out.loss)) throw NumericError("non-finite loss");
  return out;
}

double grad_check(Model& m, const PairSet& pairs, std::span<const std::size_t> idx, double epsilon,
                  const std::function<bool(const std::string&)>& filter) {
  const LossGrad analytic = loss_and_grads(m, pairs, idx);
  auto p = m.params();
  double worst = 0.0;
  for (const TensorInfo& t : m.layout().tensors()) {
    if (filter && !filter(t.name)) continue;
    for (std::size_t k = 0; k < t.size(); ++k) {
      const std::size_t j = t.offset + k;
      const double saved = p[j];
      p[j] = saved + epsilon;
      const double up = mse(m, pairs, idx, false);
      p[j] = saved - epsilon;
      const double down = mse(m, pairs, idx, false);
      p[j] = saved;
      const double gn = (up - down) / (2.0 * epsilon);
      const double ga = analytic.grad[j];
      worst = std::max(worst, std::abs(ga - gn) / std::max(1e-8, std::abs(ga) + std::abs(gn)));
    }
  }
  return worst;
}

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grads) {
  if (s.m.size() != params.size() || grads.size() != params.size())
    throw ShapeError("adam_step: buffer sizes do not match the parameters");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = grads[k];
    s.m[k] = s.beta1 * s.m[k] + (1.0 - s.beta1) * g;
    s.v[k] = s.beta2 * s.v[k] + (1.0 - s.beta2) * g * g;
    params[k] -= s.lr * (s.m[k] / c1) / (std::sqrt(s.v[k] / c2) + s.eps);
  }
}

std::vector<MeanStd> estimation_error(const Model& m, const PairSet& pairs, std::span<const std::size_t> idx) {
  const int n = pairs.n_sum(), a = m.hyper().a_dim;
  const auto pred = batch_predict(m, pairs, idx);
  std::vector<std::vector<double>> err(static_cast<std::size_t>(n));
  for (std::size_t b = 0; b < idx.size(); ++b)
    for (int mod = 0; mod < n; ++mod) {
      const auto y = pairs.target(idx[b], mod);
      for (int k = 0; k < a; ++k) {
        const double yhat = std::clamp(pred[(b * n + mod) * a + k], -1.0, 1.0);
        err[mod].push_back(std::abs(yhat - y[k]) / 2.0 * 100.0);
      }
    }
  std::vector<MeanStd> out;
  for (const auto& e : err) out.push_back(mean_std(e));
  return out;
}

TrainResult train(Model& m, const PairSet& pairs, const TrainOptions& opt,
                  const std::function<void(const EpochStat&)>& on_epoch) {
  if (pairs.groups() == 0) throw DomainError("train: no training pairs");
  if (opt.epochs < 1 || opt.batch < 1 || !(opt.lr > 0.0)) throw ConfigError("train: epochs, batch and lr must be positive");
  if (!(opt.holdout >= 0.0 && opt.holdout < 1.0)) throw ConfigError("train: holdout must lie in [0, 1)");

  std::vector<std::size_t> order(pairs.groups());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(mix_seed(opt.seed, 11));
  split_rng.shuffle(order);
  const auto n_hold = static_cast<std::size_t>(std::floor(opt.holdout * static_cast<double>(order.size())));
  std::vector<std::size_t> hold(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::vector<std::size_t> fit(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
  std::sort(hold.begin(), hold.end());
  std::sort(fit.begin(), fit.end());
  if (fit.empty()) throw DomainError("train: holdout leaves no training pairs");

  TrainResult res;
  res.holdout_groups = hold;
  res.initial_mse = mse(m, pairs, fit, opt.parallel);
  if (!std::isfinite(res.initial_mse)) throw NumericError("non-finite initial loss");

  AdamState adam(m.parameter_count(), opt.lr);
  Rng shuffle_rng(mix_seed(opt.seed, 12));
  std::vector<double> grad(m.parameter_count());
  int above = 0;
  long batch_index = 0;
  for (int epoch = 1; epoch <= opt.epochs; ++epoch) {
    shuffle_rng.shuffle(fit);
    double epoch_sse = 0.0;
    for (std::size_t lo = 0; lo < fit.size(); lo += static_cast<std::size_t>(opt.batch), ++batch_index) {
      const std::size_t len = std::min(static_cast<std::size_t>(opt.batch), fit.size() - lo);
      const std::span<const std::size_t> batch(fit.data() + lo, len);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double sse = opt.parallel ? batch_sse_grad_omp(m, pairs, batch, grad)
                                      : batch_sse_grad_serial(m, pairs, batch, grad);
      if (!std::isfinite(sse)) throw NumericError("non-finite loss at batch " + std::to_string(batch_index));
      const double scale = 1.0 / entry_count(m, pairs, len);
      for (double& g : grad) g *= scale;
      adam_step(adam, m.params(), grad);
      epoch_sse += sse;
    }
    EpochStat st;
    st.epoch = epoch;
    st.train_mse = epoch_sse / entry_count(m, pairs, fit.size());
    st.holdout_mse = hold.empty() ? 0.0 : mse(m, pairs, hold, opt.parallel);
    res.curve.push_back(st);
    if (on_epoch) on_epoch(st);
    above = st.train_mse > 10.0 * res.initial_mse ? above + 1 : 0;
    if (above >= 3) throw NumericError("training diverged at epoch " + std::to_string(epoch));
  }
  // Restore chronological order for reporting.
  std::sort(fit.begin(), fit.end());
  res.estimation = estimation_error(m, pairs, hold.empty() ? std::span<const std::size_t>(fit) : hold);
  return res;
}

}  // namespace modsoft::nn

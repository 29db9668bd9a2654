#include <algorithm>
#include <vector>

#include "modsoft/nn/train.hpp"

namespace modsoft::nn {

namespace {

std::size_t chunk_count(std::size_t n) { return (n + kGradChunk - 1) / kGradChunk; }

std::span<const std::size_t> chunk(std::span<const std::size_t> idx, std::size_t c) {
  const std::size_t lo = c * kGradChunk;
  return idx.subspan(lo, std::min(kGradChunk, idx.size() - lo));
}

// Adds chunk buffers into grad in chunk order.
double reduce(std::span<double> grad, const std::vector<std::vector<double>>& parts, const std::vector<double>& sse) {
  double total = 0.0;
  for (std::size_t c = 0; c < parts.size(); ++c) {
    total += sse[c];
    if (!grad.empty()) {
      const auto& p = parts[c];
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += p[k];
    }
  }
  return total;
}

}  // namespace

double batch_sse_grad_serial(const Model& m, const PairSet& pairs, std::span<const std::size_t> idx,
                             std::span<double> grad) {
  const std::size_t nc = chunk_count(idx.size());
  std::vector<std::vector<double>> parts(nc);
  std::vector<double> sse(nc, 0.0);
  for (std::size_t c = 0; c < nc; ++c) {
    if (!grad.empty()) parts[c].assign(grad.size(), 0.0);
    sse[c] = m.sse_and_grad(pairs, chunk(idx, c), parts[c]);
  }
  return reduce(grad, parts, sse);
}

double batch_sse_grad_omp(const Model& m, const PairSet& pairs, std::span<const std::size_t> idx,
                          std::span<double> grad) {
  const std::size_t nc = chunk_count(idx.size());
  std::vector<std::vector<double>> parts(nc);
  std::vector<double> sse(nc, 0.0);
#pragma omp parallel for schedule(dynamic, 1)
  for (long c = 0; c < static_cast<long>(nc); ++c) {
    if (!grad.empty()) parts[c].assign(grad.size(), 0.0);
    sse[c] = m.sse_and_grad(pairs, chunk(idx, static_cast<std::size_t>(c)), parts[c]);
  }
  return reduce(grad, parts, sse);
}

std::vector<double> batch_predict(const Model& m, const PairSet& pairs, std::span<const std::size_t> idx) {
  const std::size_t nc = chunk_count(idx.size());
  const std::size_t per = static_cast<std::size_t>(pairs.n_sum()) * m.hyper().a_dim;
  std::vector<double> out(idx.size() * per);
#pragma omp parallel for schedule(dynamic, 1)
  for (long c = 0; c < static_cast<long>(nc); ++c) {
    const auto part = m.predict(pairs, chunk(idx, static_cast<std::size_t>(c)));
    std::copy(part.begin(), part.end(), out.begin() + static_cast<std::ptrdiff_t>(c * kGradChunk * per));
  }
  return out;
}

}  // namespace modsoft::nn

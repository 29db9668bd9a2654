#include <cmath>

#include "modsoft/errors.hpp"
#include "modsoft/nn/model.hpp"

namespace modsoft::nn {

namespace {

// (feature_dim x B) inputs of one module for the selected groups.
Mat module_inputs(const PairSet& pairs, std::span<const std::size_t> idx, int m) {
  Mat x(pairs.feature_dim(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto f = pairs.features(idx[b], m);
    x.col(static_cast<Eigen::Index>(b)) = Eigen::Map<const Eigen::VectorXd>(f.data(), pairs.feature_dim());
  }
  return x;
}

// (a_dim x B) targets of one module.
Mat module_targets(const PairSet& pairs, std::span<const std::size_t> idx, int m) {
  Mat y(pairs.a_dim(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto t = pairs.target(idx[b], m);
    y.col(static_cast<Eigen::Index>(b)) = Eigen::Map<const Eigen::VectorXd>(t.data(), pairs.a_dim());
  }
  return y;
}

// Time-step inputs of one module: K matrices of (2d + a_dim) x B, written at
// row offset `row` of each (pre-sized) matrix.
void time_inputs(const PairSet& pairs, std::span<const std::size_t> idx, int m, std::vector<Mat>& steps, int row) {
  const int d = pairs.d(), a = pairs.a_dim(), K = pairs.window();
  const int sd = time_step_dim(d, a);
  std::vector<double> buf(static_cast<std::size_t>(sd));
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto f = pairs.features(idx[b], m);
    for (int k = 0; k < K; ++k) {
      time_step_input(f, d, a, K, k, buf);
      steps[k].block(row, static_cast<Eigen::Index>(b), sd, 1) = Eigen::Map<const Eigen::VectorXd>(buf.data(), sd);
    }
  }
}

void store_pred(std::vector<double>* pred, const Mat& y, int n, int m, int a_dim, int rows_offset = 0) {
  if (!pred) return;
  for (Eigen::Index b = 0; b < y.cols(); ++b)
    for (int k = 0; k < a_dim; ++k)
      (*pred)[(static_cast<std::size_t>(b) * n + m) * a_dim + k] = y(rows_offset + k, b);
}

}  // namespace

// ---------------------------------------------------------------------------
// biLSTM over the module chain

BiLstmNet::BiLstmNet(const NetHyper& h) : Model(h) {
  fwd_ = LstmStack(layout_, "fwd.", h.feature_dim(), h.hidden, h.layers);
  bwd_ = LstmStack(layout_, "bwd.", h.feature_dim(), h.hidden, h.layers);
  head_ = Head(layout_, "head.", 2 * h.hidden, h.a_dim, h.head_hidden);
  finalize_layout();
}

std::vector<Mat> BiLstmNet::chain_forward(const std::vector<Mat>& xs) const {
  const int n = static_cast<int>(xs.size());
  const int H = hyper_.hidden;
  for (const Mat& x : xs)
    if (x.rows() != hyper_.feature_dim()) throw ShapeError("biLSTM: module feature dimension mismatch");
  LstmStackTape tf, tb;
  fwd_.forward(params_, xs, tf);
  std::vector<Mat> rev(xs.rbegin(), xs.rend());
  bwd_.forward(params_, rev, tb);
  std::vector<Mat> ys;
  for (int m = 0; m < n; ++m) {
    Mat z(2 * H, xs[m].cols());
    z << tf.layers.back().h[m], tb.layers.back().h[n - 1 - m];
    Mat act;
    ys.push_back(head_.forward(params_, z, act));
  }
  return ys;
}

double BiLstmNet::run(const PairSet& pairs, std::span<const std::size_t> idx, std::span<double> grad,
                      std::vector<double>* pred) const {
  check_pairs(pairs);
  const int n = pairs.n_sum(), H = hyper_.hidden, a = hyper_.a_dim;
  const auto B = static_cast<Eigen::Index>(idx.size());
  std::vector<Mat> xs(static_cast<std::size_t>(n));
  for (int m = 0; m < n; ++m) xs[m] = module_inputs(pairs, idx, m);
  LstmStackTape tf, tb;
  fwd_.forward(params_, xs, tf);
  std::vector<Mat> rev(xs.rbegin(), xs.rend());
  bwd_.forward(params_, rev, tb);

  const bool want_grad = !grad.empty();
  std::vector<Mat> dtop_f(static_cast<std::size_t>(n)), dtop_b(static_cast<std::size_t>(n));
  double sse = 0.0;
  for (int m = 0; m < n; ++m) {
    Mat z(2 * H, B);
    z << tf.layers.back().h[m], tb.layers.back().h[n - 1 - m];
    Mat act;
    const Mat y = head_.forward(params_, z, act);
    store_pred(pred, y, n, m, a);
    const Mat r = y - module_targets(pairs, idx, m);
    sse += r.squaredNorm();
    if (want_grad) {
      const Mat dz = head_.backward(params_, grad, z, act, 2.0 * r);
      dtop_f[m] = dz.topRows(H);
      dtop_b[n - 1 - m] = dz.bottomRows(H);
    }
  }
  if (want_grad) {
    fwd_.backward(params_, grad, tf, dtop_f, false);
    bwd_.backward(params_, grad, tb, dtop_b, false);
  }
  return sse;
}

double BiLstmNet::sse_and_grad(const PairSet& pairs, std::span<const std::size_t> idx, std::span<double> grad) const {
  return run(pairs, idx, grad, nullptr);
}

std::vector<double> BiLstmNet::predict(const PairSet& pairs, std::span<const std::size_t> idx) const {
  std::vector<double> pred(idx.size() * pairs.n_sum() * hyper_.a_dim);
  run(pairs, idx, {}, &pred);
  return pred;
}

// ---------------------------------------------------------------------------
// One time-recurrent net per module

FourLstmNet::FourLstmNet(const NetHyper& h) : Model(h) {
  const int sd = time_step_dim(h.d, h.a_dim);
  for (int m = 0; m < h.n_sum; ++m) {
    const std::string p = "m" + std::to_string(m + 1) + ".";
    stacks_.emplace_back(layout_, p, sd, h.hidden, h.layers);
    heads_.emplace_back(layout_, p + "head.", h.hidden, h.a_dim, h.head_hidden);
  }
  finalize_layout();
}

double FourLstmNet::run(const PairSet& pairs, std::span<const std::size_t> idx, std::span<double> grad,
                        std::vector<double>* pred) const {
  check_pairs(pairs);
  const int n = pairs.n_sum(), K = hyper_.window, a = hyper_.a_dim;
  const auto B = static_cast<Eigen::Index>(idx.size());
  const int sd = time_step_dim(hyper_.d, a);
  double sse = 0.0;
  for (int m = 0; m < n; ++m) {
    std::vector<Mat> steps(static_cast<std::size_t>(K), Mat(sd, B));
    time_inputs(pairs, idx, m, steps, 0);
    LstmStackTape tape;
    stacks_[m].forward(params_, steps, tape);
    const Mat& top = tape.layers.back().h[K - 1];
    Mat act;
    const Mat y = heads_[m].forward(params_, top, act);
    store_pred(pred, y, n, m, a);
    const Mat r = y - module_targets(pairs, idx, m);
    sse += r.squaredNorm();
    if (!grad.empty()) {
      std::vector<Mat> dtop(static_cast<std::size_t>(K));
      dtop[K - 1] = heads_[m].backward(params_, grad, top, act, 2.0 * r);
      stacks_[m].backward(params_, grad, tape, dtop, false);
    }
  }
  return sse;
}

double FourLstmNet::sse_and_grad(const PairSet& pairs, std::span<const std::size_t> idx,
                                 std::span<double> grad) const {
  return run(pairs, idx, grad, nullptr);
}

std::vector<double> FourLstmNet::predict(const PairSet& pairs, std::span<const std::size_t> idx) const {
  std::vector<double> pred(idx.size() * pairs.n_sum() * hyper_.a_dim);
  run(pairs, idx, {}, &pred);
  return pred;
}

// ---------------------------------------------------------------------------
// One time-recurrent net over all modules

TimeLstmNet::TimeLstmNet(const NetHyper& h) : Model(h) {
  const int sd = time_step_dim(h.d, h.a_dim);
  stack_ = LstmStack(layout_, "time.", h.n_sum * sd, h.hidden, h.layers);
  head_ = Head(layout_, "head.", h.hidden, h.n_sum * h.a_dim, h.head_hidden);
  finalize_layout();
}

double TimeLstmNet::run(const PairSet& pairs, std::span<const std::size_t> idx, std::span<double> grad,
                        std::vector<double>* pred) const {
  check_pairs(pairs);
  const int n = pairs.n_sum(), K = hyper_.window, a = hyper_.a_dim;
  const auto B = static_cast<Eigen::Index>(idx.size());
  const int sd = time_step_dim(hyper_.d, a);
  std::vector<Mat> steps(static_cast<std::size_t>(K), Mat(n * sd, B));
  for (int m = 0; m < n; ++m) time_inputs(pairs, idx, m, steps, m * sd);
  LstmStackTape tape;
  stack_.forward(params_, steps, tape);
  const Mat& top = tape.layers.back().h[K - 1];
  Mat act;
  const Mat y = head_.forward(params_, top, act);
  Mat target(n * a, B);
  for (int m = 0; m < n; ++m) {
    target.middleRows(m * a, a) = module_targets(pairs, idx, m);
    store_pred(pred, y, n, m, a, m * a);
  }
  const Mat r = y - target;
  if (!grad.empty()) {
    std::vector<Mat> dtop(static_cast<std::size_t>(K));
    dtop[K - 1] = head_.backward(params_, grad, top, act, 2.0 * r);
    stack_.backward(params_, grad, tape, dtop, false);
  }
  return r.squaredNorm();
}

double TimeLstmNet::sse_and_grad(const PairSet& pairs, std::span<const std::size_t> idx,
                                 std::span<double> grad) const {
  return run(pairs, idx, grad, nullptr);
}

std::vector<double> TimeLstmNet::predict(const PairSet& pairs, std::span<const std::size_t> idx) const {
  std::vector<double> pred(idx.size() * pairs.n_sum() * hyper_.a_dim);
  run(pairs, idx, {}, &pred);
  return pred;
}

}  // namespace modsoft::nn

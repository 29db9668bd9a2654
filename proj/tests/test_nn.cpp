#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "modsoft/errors.hpp"
#include "modsoft/nn/lstm.hpp"
#include "modsoft/nn/model.hpp"
#include "modsoft/nn/train.hpp"
#include "modsoft/rng.hpp"

using namespace modsoft;
using namespace modsoft::nn;

namespace modsoft::nn {
void PrintTo(Arch a, std::ostream* os) { *os << to_string(a); }
}  // namespace modsoft::nn

namespace {

NetHyper tiny(Arch arch, int n_sum = 2, std::uint64_t seed = 1) {
  NetHyper h;
  h.arch = arch;
  h.hidden = 4;
  h.layers = 1;
  h.window = 3;
  h.n_sum = n_sum;
  h.seed = seed;
  return h;
}

PairSet random_pairs(int n_sum, int window, std::size_t groups, std::uint64_t seed, int d = 3, int a_dim = 2) {
  Rng r(seed);
  PairSet p(n_sum, d, a_dim, window);
  p.resize(groups);
  for (std::size_t g = 0; g < groups; ++g)
    for (int m = 0; m < n_sum; ++m) {
      for (double& x : p.features(g, m)) x = r.uniform(-1.0, 1.0);
      p.features(g, m)[0] = module_label(m + 1, n_sum);
      for (double& y : p.target(g, m)) y = r.uniform(-1.0, 1.0);
    }
  return p;
}

std::vector<std::size_t> all(const PairSet& p) {
  std::vector<std::size_t> idx(p.groups());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) x[i++] = e;
  return x;
}

std::string text_of(const Model& m) {
  std::ostringstream os;
  model_write(m, os);
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// LSTM cell

TEST(LstmCell, AllZeroWeights) {
  LstmParams p = LstmParams::zeros(3, 2);
  auto out = lstm_step(p, vec({0.7, -0.4}), Eigen::VectorXd::Zero(3), Eigen::VectorXd::Constant(3, 2.0));
  for (int k = 0; k < 3; ++k) {
    EXPECT_NEAR(out.c[k], 1.0, 1e-9);
    EXPECT_NEAR(out.h[k], 0.380797, 1e-6);
    EXPECT_NEAR(out.h[k], 0.5 * std::tanh(1.0), 1e-9);
  }
}

TEST(LstmCell, SaturatedForgetGate) {
  LstmParams p = LstmParams::zeros(2, 2);
  p.b_f.setConstant(100.0);
  auto out = lstm_step(p, vec({0.3, 0.1}), Eigen::VectorXd::Zero(2), Eigen::VectorXd::Constant(2, 2.0));
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(out.c[k], 2.0, 1e-9);
    EXPECT_NEAR(out.h[k], 0.482014, 1e-6);
    EXPECT_NEAR(out.h[k], 0.5 * std::tanh(2.0), 1e-9);
  }
}

TEST(LstmCell, ZeroFixedPoint) {
  LstmParams p = LstmParams::zeros(2, 3);
  auto out = lstm_step(p, vec({1.0, 2.0, 3.0}), Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2));
  EXPECT_EQ(out.h.norm(), 0.0);
  EXPECT_EQ(out.c.norm(), 0.0);
}

TEST(LstmCell, CellPreservedWhenForgetOpenInputClosed) {
  Rng r(2);
  LstmParams p = LstmParams::zeros(3, 2);
  for (Mat* w : {&p.W_f, &p.W_i, &p.W_c, &p.W_o})
    for (Eigen::Index k = 0; k < w->size(); ++k) (*w)(k) = r.uniform(-0.1, 0.1);
  p.b_f.setConstant(60.0);
  p.b_i.setConstant(-60.0);
  Eigen::VectorXd c = vec({0.3, -1.2, 2.5}), h = Eigen::VectorXd::Zero(3);
  const Eigen::VectorXd c0 = c;
  for (int s = 0; s < 20; ++s) {
    auto out = lstm_step(p, vec({r.uniform(-1, 1), r.uniform(-1, 1)}), h, c);
    h = out.h;
    c = out.c;
  }
  EXPECT_EQ(c, c0);
}

TEST(LstmCell, ShapeMismatch) {
  LstmParams p = LstmParams::zeros(2, 3);
  EXPECT_THROW(lstm_step(p, vec({1.0}), Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)), ShapeError);
  EXPECT_THROW(lstm_step(p, vec({1.0, 2.0, 3.0}), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(2)), ShapeError);
}

// ---------------------------------------------------------------------------
// Gradients

class GradCheck : public ::testing::TestWithParam<Arch> {};

TEST_P(GradCheck, MatchesCentralDifferences) {
  auto m = make_model(tiny(GetParam()));
  PairSet pairs = random_pairs(2, 3, 6, 10);
  EXPECT_LT(grad_check(*m, pairs, all(pairs), 1e-5), 1e-4);
}

TEST_P(GradCheck, HiddenHeadMatches) {
  NetHyper h = tiny(GetParam(), 3, 4);
  h.head_hidden = 3;
  h.layers = 2;
  auto m = make_model(h);
  PairSet pairs = random_pairs(3, 3, 4, 11);
  // Two layers give gradients near 1e-7 where a 1e-5 step is roundoff-bound.
  EXPECT_LT(grad_check(*m, pairs, all(pairs), 1e-4), 1e-4);
}

TEST_P(GradCheck, CoarseStepIsVisiblyWorse) {
  auto m = make_model(tiny(GetParam()));
  PairSet pairs = random_pairs(2, 3, 6, 10);
  EXPECT_GT(grad_check(*m, pairs, all(pairs), 1e-1), 1e-3);
}

INSTANTIATE_TEST_SUITE_P(Arch, GradCheck, ::testing::Values(Arch::BiLstm, Arch::FourLstm, Arch::TimeLstm),
                         [](const auto& info) {
                           std::string s(to_string(info.param));
                           s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
                           return s;
                         });

TEST(Gradients, HeadOnlyIsExact) {
  auto m = make_model(tiny(Arch::BiLstm));
  PairSet pairs = random_pairs(2, 3, 6, 12);
  auto is_head = [](const std::string& n) { return n.rfind("head.", 0) == 0; };
  // The loss is quadratic in the head, so a coarse step has no truncation error.
  EXPECT_LT(grad_check(*m, pairs, all(pairs), 1e-3, is_head), 1e-9);
}

TEST(Gradients, HeadBiasIsTwiceMeanResidual) {
  auto m = make_model(tiny(Arch::BiLstm));
  PairSet pairs = random_pairs(2, 3, 5, 13);
  auto idx = all(pairs);
  LossGrad lg = loss_and_grads(*m, pairs, idx);
  std::vector<double> pred = m->predict(pairs, idx);
  const auto& t = m->layout()[m->layout().find("head.b")];
  const double count = static_cast<double>(idx.size() * 2 * 2);
  for (int c = 0; c < 2; ++c) {
    double r = 0.0;
    for (std::size_t g = 0; g < idx.size(); ++g)
      for (int mod = 0; mod < 2; ++mod) r += pred[(g * 2 + mod) * 2 + c] - pairs.target(g, mod)[c];
    EXPECT_NEAR(lg.grad[t.offset + c], 2.0 * r / count, 1e-12);
  }
}

TEST(Gradients, ZeroNetZeroTargets) {
  auto m = make_model(tiny(Arch::BiLstm));
  std::fill(m->params().begin(), m->params().end(), 0.0);
  PairSet pairs = random_pairs(2, 3, 4, 14);
  for (std::size_t g = 0; g < pairs.groups(); ++g)
    for (int mod = 0; mod < 2; ++mod)
      for (double& y : pairs.target(g, mod)) y = 0.0;
  LossGrad lg = loss_and_grads(*m, pairs, all(pairs));
  EXPECT_EQ(lg.loss, 0.0);
  for (double g : lg.grad) EXPECT_EQ(g, 0.0);
}

TEST(Gradients, NonFiniteLossThrows) {
  auto m = make_model(tiny(Arch::BiLstm));
  PairSet pairs = random_pairs(2, 3, 2, 15);
  pairs.target(1, 0)[0] = std::nan("");
  EXPECT_THROW(loss_and_grads(*m, pairs, all(pairs)), NumericError);
}

class Kernels : public ::testing::TestWithParam<Arch> {};

TEST_P(Kernels, SerialAndOmpAgreeBitwise) {
  NetHyper h = tiny(GetParam(), 4, 7);
  h.hidden = 8;
  auto m = make_model(h);
  PairSet pairs = random_pairs(4, 3, 77, 16);
  auto idx = all(pairs);
  std::vector<double> gs(m->parameter_count(), 0.0), go(m->parameter_count(), 0.0);
  const double ls = batch_sse_grad_serial(*m, pairs, idx, gs);
  const double lo = batch_sse_grad_omp(*m, pairs, idx, go);
  EXPECT_EQ(ls, lo);
  EXPECT_EQ(gs, go);
}

INSTANTIATE_TEST_SUITE_P(Arch, Kernels, ::testing::Values(Arch::BiLstm, Arch::FourLstm, Arch::TimeLstm),
                         [](const auto& info) {
                           std::string s(to_string(info.param));
                           s.erase(std::remove(s.begin(), s.end(), '-'), s.end());
                           return s;
                         });

// ---------------------------------------------------------------------------
// Architectures

TEST(BiLstm, ParameterCountIndependentOfChainLength) {
  NetHyper a = tiny(Arch::BiLstm, 4), b = tiny(Arch::BiLstm, 6);
  EXPECT_EQ(make_model(a)->parameter_count(), make_model(b)->parameter_count());
}

TEST(BiLstm, SingleModuleChain) {
  auto m = make_model(tiny(Arch::BiLstm));
  PairSet pairs = random_pairs(1, 3, 3, 17);
  auto pred = m->predict(pairs, all(pairs));
  EXPECT_EQ(pred.size(), 6u);
  for (double v : pred) EXPECT_TRUE(std::isfinite(v));
}

TEST(BiLstm, RunsOnAnyChainLength) {
  auto m = make_model(tiny(Arch::BiLstm));
  for (int n : {4, 6}) {
    PairSet pairs = random_pairs(n, 3, 2, 18);
    EXPECT_EQ(m->predict(pairs, all(pairs)).size(), static_cast<std::size_t>(2 * n * 2));
  }
}

TEST(BiLstm, ReversalSymmetry) {
  NetHyper h = tiny(Arch::BiLstm, 0, 19);
  h.layers = 2;
  BiLstmNet net(h);
  BiLstmNet swapped = net;
  const auto& L = net.layout();
  auto src = net.params();
  auto dst = swapped.params();
  for (const auto& t : L.tensors()) {
    std::string other = t.name;
    if (other.rfind("fwd.", 0) == 0) other.replace(0, 4, "bwd.");
    else if (other.rfind("bwd.", 0) == 0) other.replace(0, 4, "fwd.");
    const auto& o = L[L.find(other)];
    std::copy_n(src.begin() + static_cast<long>(o.offset), o.size(), dst.begin() + static_cast<long>(t.offset));
  }
  // Head columns are [forward | backward]; swap the halves.
  const std::size_t wi = L.find("head.W");
  auto W = net.layout().map(src, wi);
  auto Ws = swapped.layout().map(dst, wi);
  const int H = h.hidden;
  Ws.leftCols(H) = W.rightCols(H);
  Ws.rightCols(H) = W.leftCols(H);

  Rng r(20);
  const int n = 5;
  std::vector<Mat> xs(n), rev(n);
  for (int m = 0; m < n; ++m) xs[m] = Mat::NullaryExpr(h.feature_dim(), 3, [&] { return r.uniform(-1, 1); });
  for (int m = 0; m < n; ++m) rev[m] = xs[n - 1 - m];
  auto y = net.chain_forward(xs);
  auto yr = swapped.chain_forward(rev);
  for (int m = 0; m < n; ++m) EXPECT_LT((y[m] - yr[n - 1 - m]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BiLstm, InformationFlowsBothWays) {
  auto m = make_model(tiny(Arch::BiLstm, 0, 21));
  PairSet base = random_pairs(4, 3, 1, 22);
  std::vector<std::size_t> idx{0};
  auto y0 = m->predict(base, idx);
  for (int j = 0; j < 4; ++j) {
    PairSet moved = base;
    moved.features(0, j)[2] += 0.5;
    auto y1 = m->predict(moved, idx);
    for (int i = 0; i < 4; ++i) {
      const bool changed = y1[i * 2] != y0[i * 2] || y1[i * 2 + 1] != y0[i * 2 + 1];
      EXPECT_TRUE(changed) << "module " << i << " perturbed " << j;
    }
  }
}

TEST(FourLstm, IdenticalNetsIdenticalOutputs) {
  auto m = make_model(tiny(Arch::FourLstm, 3, 23));
  const auto& L = m->layout();
  auto p = m->params();
  for (const auto& t : L.tensors()) {
    if (t.name.rfind("m1.", 0) == 0) continue;
    const auto& src = L[L.find("m1." + t.name.substr(3))];
    std::copy_n(p.begin() + static_cast<long>(src.offset), t.size(), p.begin() + static_cast<long>(t.offset));
  }
  PairSet pairs = random_pairs(3, 3, 4, 24);
  for (std::size_t g = 0; g < pairs.groups(); ++g)
    for (int mod = 1; mod < 3; ++mod) {
      auto x0 = pairs.features(g, 0);
      auto x = pairs.features(g, mod);
      std::copy(x0.begin(), x0.end(), x.begin());
    }
  auto pred = m->predict(pairs, all(pairs));
  for (std::size_t g = 0; g < pairs.groups(); ++g)
    for (int mod = 1; mod < 3; ++mod)
      for (int c = 0; c < 2; ++c) EXPECT_EQ(pred[(g * 3 + mod) * 2 + c], pred[(g * 3) * 2 + c]);
}

TEST(FourLstm, WindowOneIsOneCellPlusHead) {
  NetHyper h = tiny(Arch::FourLstm, 2, 25);
  h.window = 1;
  FourLstmNet net(h);
  PairSet pairs = random_pairs(2, 1, 3, 26);
  auto pred = net.predict(pairs, all(pairs));
  const auto& L = net.layout();
  for (int mod = 0; mod < 2; ++mod) {
    LstmParams cell = net.stack(mod).cell(net.params(), 0);
    auto W = L.map(net.params(), L.find("m" + std::to_string(mod + 1) + ".head.W"));
    auto b = L.map(net.params(), L.find("m" + std::to_string(mod + 1) + ".head.b"));
    for (std::size_t g = 0; g < pairs.groups(); ++g) {
      Eigen::VectorXd x(time_step_dim(3, 2));
      time_step_input(pairs.features(g, mod), 3, 2, 1, 0, {x.data(), static_cast<std::size_t>(x.size())});
      auto out = lstm_step(cell, x, Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4));
      Eigen::VectorXd y = W * out.h + b.col(0);
      for (int c = 0; c < 2; ++c) EXPECT_NEAR(pred[(g * 2 + mod) * 2 + c], y[c], 1e-14);
    }
  }
}

TEST(TimeLstm, RejectsOtherModuleCounts) {
  auto m = make_model(tiny(Arch::TimeLstm, 4));
  EXPECT_EQ(m->bound_n_sum(), 4);
  PairSet six = random_pairs(6, 3, 2, 27);
  EXPECT_THROW(m->predict(six, all(six)), ShapeError);
  std::vector<std::vector<double>> feats(6, std::vector<double>(m->hyper().feature_dim(), 0.0));
  EXPECT_THROW(m->act(feats), ShapeError);
}

TEST(Models, FeatureDimMismatch) {
  auto m = make_model(tiny(Arch::BiLstm));
  PairSet wrong = random_pairs(2, 4, 2, 28);
  EXPECT_THROW(m->predict(wrong, all(wrong)), ShapeError);
}

TEST(Models, ActClampsOutputs) {
  auto m = make_model(tiny(Arch::BiLstm));
  const auto& t = m->layout()[m->layout().find("head.b")];
  m->params()[t.offset] = 50.0;
  m->params()[t.offset + 1] = -50.0;
  std::vector<std::vector<double>> feats(3, std::vector<double>(m->hyper().feature_dim(), 0.1));
  for (const auto& a : m->act(feats)) {
    EXPECT_EQ(a[0], 1.0);
    EXPECT_EQ(a[1], -1.0);
  }
}

TEST(Models, HyperValidation) {
  NetHyper h = tiny(Arch::TimeLstm, 0);
  EXPECT_THROW(make_model(h), ConfigError);
  h = tiny(Arch::BiLstm);
  h.hidden = 0;
  EXPECT_THROW(make_model(h), ConfigError);
}

TEST(ModelIo, ExactRoundTrip) {
  for (Arch a : {Arch::BiLstm, Arch::FourLstm, Arch::TimeLstm}) {
    NetHyper h = tiny(a, 3, 29);
    h.head_hidden = a == Arch::TimeLstm ? 5 : 0;
    auto m = make_model(h);
    const std::string text = text_of(*m);
    std::istringstream is(text);
    auto back = model_read(is);
    EXPECT_EQ(back->hyper(), m->hyper());
    EXPECT_TRUE(std::equal(back->params().begin(), back->params().end(), m->params().begin()));
    EXPECT_EQ(text_of(*back), text);
  }
}

TEST(ModelIo, RejectsCorruptTensor) {
  auto m = make_model(tiny(Arch::BiLstm));
  std::string text = text_of(*m);
  text.replace(text.find("tensor fwd.l0.W_f 4"), 19, "tensor fwd.l0.W_f 5");
  std::istringstream is(text);
  EXPECT_THROW(model_read(is), ParseError);
}

// ---------------------------------------------------------------------------
// Optimizer and training

TEST(Adam, ZeroGradLeavesParams) {
  std::vector<double> p{0.5, -1.0, 2.0}, g(3, 0.0);
  AdamState s(3, 1e-3);
  adam_step(s, p, g);
  EXPECT_EQ(p, (std::vector<double>{0.5, -1.0, 2.0}));
}

TEST(Adam, FirstStepIsLrTimesSign) {
  std::vector<double> p{0.0, 0.0, 0.0}, g{3.0, -0.01, 1e3};
  AdamState s(3, 1e-3);
  adam_step(s, p, g);
  EXPECT_NEAR(p[0], -1e-3, 1e-10);
  EXPECT_NEAR(p[1], 1e-3, 1e-8);
  EXPECT_NEAR(p[2], -1e-3, 1e-10);
}

TEST(Adam, SizeMismatch) {
  std::vector<double> p(3), g(2);
  AdamState s(3, 1e-3);
  EXPECT_THROW(adam_step(s, p, g), ShapeError);
}

TEST(Train, LossDropsAndIsDeterministic) {
  PairSet pairs = random_pairs(3, 3, 200, 30);
  // A learnable target: the first history component.
  for (std::size_t g = 0; g < pairs.groups(); ++g)
    for (int m = 0; m < 3; ++m) {
      pairs.target(g, m)[0] = 0.8 * pairs.features(g, m)[4];
      pairs.target(g, m)[1] = -0.5 * pairs.features(g, m)[1];
    }
  TrainOptions opt;
  opt.epochs = 8;
  opt.batch = 16;
  opt.lr = 1e-2;
  opt.seed = 4;
  auto run = [&] {
    auto m = make_model(tiny(Arch::BiLstm, 0, 31));
    TrainResult r = train(*m, pairs, opt);
    return std::make_pair(std::move(m), r);
  };
  auto [m1, r1] = run();
  auto [m2, r2] = run();
  ASSERT_EQ(r1.curve.size(), 8u);
  EXPECT_LT(r1.curve.back().holdout_mse, r1.initial_mse);
  EXPECT_EQ(r1.estimation.size(), 3u);
  EXPECT_TRUE(std::equal(m1->params().begin(), m1->params().end(), m2->params().begin()));
  EXPECT_EQ(r1.curve.back().train_mse, r2.curve.back().train_mse);
  EXPECT_EQ(r1.holdout_groups, r2.holdout_groups);
}

TEST(Train, SerialAndParallelTrainIdentically) {
  PairSet pairs = random_pairs(2, 3, 90, 32);
  TrainOptions opt;
  opt.epochs = 2;
  opt.batch = 40;
  auto a = make_model(tiny(Arch::TimeLstm, 2, 33));
  auto b = make_model(tiny(Arch::TimeLstm, 2, 33));
  opt.parallel = false;
  train(*a, pairs, opt);
  opt.parallel = true;
  train(*b, pairs, opt);
  EXPECT_TRUE(std::equal(a->params().begin(), a->params().end(), b->params().begin()));
}

TEST(Train, EstimationErrorIsPercentOfRange) {
  auto m = make_model(tiny(Arch::BiLstm));
  std::fill(m->params().begin(), m->params().end(), 0.0);
  PairSet pairs = random_pairs(2, 3, 4, 34);
  for (std::size_t g = 0; g < 4; ++g)
    for (int mod = 0; mod < 2; ++mod) {
      pairs.target(g, mod)[0] = 0.5;
      pairs.target(g, mod)[1] = -0.5;
    }
  for (const MeanStd& e : estimation_error(*m, pairs, all(pairs))) {
    EXPECT_NEAR(e.mean, 25.0, 1e-12);
    EXPECT_NEAR(e.std, 0.0, 1e-12);
  }
}

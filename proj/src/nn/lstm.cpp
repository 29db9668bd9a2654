#include "modsoft/nn/lstm.hpp"

#include <cmath>

#include "modsoft/errors.hpp"

namespace modsoft::nn {

std::size_t ParamLayout::add(std::string name, int rows, int cols) {
  tensors_.push_back({std::move(name), rows, cols, total_});
  total_ += tensors_.back().size();
  return tensors_.size() - 1;
}

std::size_t ParamLayout::find(const std::string& name) const {
  for (std::size_t i = 0; i < tensors_.size(); ++i)
    if (tensors_[i].name == name) return i;
  return npos;
}

namespace {

template <class Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& z) {
  return (1.0 + (-z.array()).exp()).inverse();
}

}  // namespace

LstmParams LstmParams::zeros(int hidden, int input) {
  LstmParams p;
  for (Mat* w : {&p.W_f, &p.W_i, &p.W_c, &p.W_o}) *w = Mat::Zero(hidden, hidden + input);
  for (Eigen::VectorXd* b : {&p.b_f, &p.b_i, &p.b_c, &p.b_o}) *b = Eigen::VectorXd::Zero(hidden);
  return p;
}

LstmOutput lstm_step(const LstmParams& p, const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                     const Eigen::VectorXd& c_prev) {
  const int H = p.hidden();
  if (h_prev.size() != H || c_prev.size() != H || x.size() != p.input())
    throw ShapeError("lstm_step: state or input size does not match the cell");
  Eigen::VectorXd hx(H + x.size());
  hx << h_prev, x;
  const Eigen::ArrayXd f = sigmoid(p.W_f * hx + p.b_f);
  const Eigen::ArrayXd i = sigmoid(p.W_i * hx + p.b_i);
  const Eigen::ArrayXd g = (p.W_c * hx + p.b_c).array().tanh();
  const Eigen::ArrayXd o = sigmoid(p.W_o * hx + p.b_o);
  LstmOutput out;
  out.c = (f * c_prev.array() + i * g).matrix();
  out.h = (o * out.c.array().tanh()).matrix();
  return out;
}

LstmStack::LstmStack(ParamLayout& layout, const std::string& prefix, int input, int hidden, int layers)
    : input_(input), hidden_(hidden), layers_(layers) {
  if (input < 1 || hidden < 1 || layers < 1) throw ConfigError("lstm stack needs positive sizes");
  static const char* gate[4] = {"f", "i", "c", "o"};
  for (int k = 0; k < layers; ++k) {
    const std::string base = prefix + "l" + std::to_string(k) + ".";
    const int cols = hidden + layer_input(k);
    for (int g = 0; g < 4; ++g) {
      const std::size_t idx = layout.add(base + "W_" + gate[g], hidden, cols);
      if (g == 0) {
        w_idx_.push_back(idx);
        w_off_.push_back(layout[idx].offset);
      }
    }
    for (int g = 0; g < 4; ++g) {
      const std::size_t idx = layout.add(base + "b_" + gate[g], hidden, 1);
      if (g == 0) {
        b_idx_.push_back(idx);
        b_off_.push_back(layout[idx].offset);
      }
    }
  }
}

void LstmStack::forward(std::span<const double> params, const std::vector<Mat>& inputs, LstmStackTape& tape) const {
  const int H = hidden_;
  const std::size_t T = inputs.size();
  const Eigen::Index B = T ? inputs.front().cols() : 0;
  tape.layers.assign(static_cast<std::size_t>(layers_), {});
  for (int k = 0; k < layers_; ++k) {
    const int in = layer_input(k);
    ConstRowMap W(params.data() + w_off_[k], 4 * H, H + in);
    Eigen::Map<const Eigen::VectorXd> b(params.data() + b_off_[k], 4 * H);
    const std::vector<Mat>& x = k == 0 ? inputs : tape.layers[k - 1].h;
    LstmLayerTape& L = tape.layers[k];
    L.xin.resize(T);
    L.gates.resize(T);
    L.c.resize(T);
    L.tanh_c.resize(T);
    L.h.resize(T);
    for (std::size_t s = 0; s < T; ++s) {
      if (x[s].rows() != in) throw ShapeError("lstm stack: input has wrong dimension");
      Mat& xin = L.xin[s];
      xin.resize(H + in, B);
      if (s == 0)
        xin.topRows(H).setZero();
      else
        xin.topRows(H) = L.h[s - 1];
      xin.bottomRows(in) = x[s];
      Mat& z = L.gates[s];
      z.noalias() = W * xin;
      z.colwise() += b;
      z.topRows(2 * H) = sigmoid(z.topRows(2 * H)).matrix();
      z.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh().matrix();
      z.bottomRows(H) = sigmoid(z.bottomRows(H)).matrix();
      const auto f = z.topRows(H).array();
      const auto i = z.middleRows(H, H).array();
      const auto g = z.middleRows(2 * H, H).array();
      const auto o = z.bottomRows(H).array();
      if (s == 0)
        L.c[s] = (i * g).matrix();
      else
        L.c[s] = (f * L.c[s - 1].array() + i * g).matrix();
      L.tanh_c[s] = L.c[s].array().tanh().matrix();
      L.h[s] = (o * L.tanh_c[s].array()).matrix();
    }
  }
}

std::vector<Mat> LstmStack::backward(std::span<const double> params, std::span<double> grad, const LstmStackTape& tape,
                                     const std::vector<Mat>& dtop, bool want_dx) const {
  const int H = hidden_;
  const std::size_t T = tape.layers.front().h.size();
  const Eigen::Index B = T ? tape.layers.front().h.front().cols() : 0;
  std::vector<Mat> dh_in = dtop;  // gradient arriving at each step's h from above
  for (int k = layers_ - 1; k >= 0; --k) {
    const int in = layer_input(k);
    ConstRowMap W(params.data() + w_off_[k], 4 * H, H + in);
    RowMap dW(grad.data() + w_off_[k], 4 * H, H + in);
    Eigen::Map<Eigen::VectorXd> db(grad.data() + b_off_[k], 4 * H);
    const LstmLayerTape& L = tape.layers[k];
    std::vector<Mat> dx(T);
    Mat dh_next = Mat::Zero(H, B);  // from step s+1 through h_prev
    Mat dc_next = Mat::Zero(H, B);
    Mat dz(4 * H, B);
    for (std::size_t s = T; s-- > 0;) {
      Mat dh = dh_next;
      if (dh_in[s].size() > 0) dh += dh_in[s];
      const auto f = L.gates[s].topRows(H).array();
      const auto i = L.gates[s].middleRows(H, H).array();
      const auto g = L.gates[s].middleRows(2 * H, H).array();
      const auto o = L.gates[s].bottomRows(H).array();
      const auto tc = L.tanh_c[s].array();
      const Eigen::ArrayXXd dc = dc_next.array() + dh.array() * o * (1.0 - tc * tc);
      if (s > 0)
        dz.topRows(H) = (dc * L.c[s - 1].array() * f * (1.0 - f)).matrix();
      else
        dz.topRows(H).setZero();
      dz.middleRows(H, H) = (dc * g * i * (1.0 - i)).matrix();
      dz.middleRows(2 * H, H) = (dc * i * (1.0 - g * g)).matrix();
      dz.bottomRows(H) = (dh.array() * tc * o * (1.0 - o)).matrix();
      dc_next = (dc * f).matrix();
      dW.noalias() += dz * L.xin[s].transpose();
      db += dz.rowwise().sum();
      if (s > 0 || k > 0 || want_dx) {
        const Mat dxin = W.transpose() * dz;
        dh_next = dxin.topRows(H);
        if (k > 0 || want_dx) dx[s] = dxin.bottomRows(in);
      }
    }
    dh_in = std::move(dx);
  }
  return want_dx ? dh_in : std::vector<Mat>{};
}

LstmParams LstmStack::cell(std::span<const double> params, int layer) const {
  const int H = hidden_, cols = H + layer_input(layer);
  LstmParams p;
  Mat* w[4] = {&p.W_f, &p.W_i, &p.W_c, &p.W_o};
  Eigen::VectorXd* b[4] = {&p.b_f, &p.b_i, &p.b_c, &p.b_o};
  for (int g = 0; g < 4; ++g) {
    *w[g] = ConstRowMap(params.data() + w_off_[layer] + static_cast<std::size_t>(g) * H * cols, H, cols);
    *b[g] = Eigen::Map<const Eigen::VectorXd>(params.data() + b_off_[layer] + static_cast<std::size_t>(g) * H, H);
  }
  return p;
}

void LstmStack::set_cell(std::span<double> params, int layer, const LstmParams& p) const {
  const int H = hidden_, cols = H + layer_input(layer);
  if (p.hidden() != H || p.W_f.cols() != cols) throw ShapeError("set_cell: cell shape does not match layer");
  const Mat* w[4] = {&p.W_f, &p.W_i, &p.W_c, &p.W_o};
  const Eigen::VectorXd* b[4] = {&p.b_f, &p.b_i, &p.b_c, &p.b_o};
  for (int g = 0; g < 4; ++g) {
    RowMap(params.data() + w_off_[layer] + static_cast<std::size_t>(g) * H * cols, H, cols) = *w[g];
    Eigen::Map<Eigen::VectorXd>(params.data() + b_off_[layer] + static_cast<std::size_t>(g) * H, H) = *b[g];
  }
}

}  // namespace modsoft::nn

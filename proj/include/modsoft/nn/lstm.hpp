#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <vector>

#include "modsoft/nn/params.hpp"

namespace modsoft::nn {

/// One LSTM cell. Every weight matrix multiplies the concatenation
/// [h_prev, x] and has shape hidden x (hidden + input).
struct LstmParams {
  Mat W_f, W_i, W_c, W_o;
  Eigen::VectorXd b_f, b_i, b_c, b_o;

  static LstmParams zeros(int hidden, int input);
  int hidden() const { return static_cast<int>(b_f.size()); }
  int input() const { return static_cast<int>(W_f.cols()) - hidden(); }
};

struct LstmOutput {
  Eigen::VectorXd h, c;
};

/// f = sig(W_f [h_prev, x] + b_f), i = sig(W_i [h_prev, x] + b_i),
/// c = f * c_prev + i * tanh(W_c [h_prev, x] + b_c),
/// o = sig(W_o [h_prev, x] + b_o), h = o * tanh(c).
LstmOutput lstm_step(const LstmParams& p, const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                     const Eigen::VectorXd& c_prev);

// Per-step activations of one layer kept for the backward pass. Columns are
// batch elements.
struct LstmLayerTape {
  std::vector<Mat> xin;    // [h_prev; x]
  std::vector<Mat> gates;  // [f; i; g; o] after their nonlinearities
  std::vector<Mat> c;
  std::vector<Mat> tanh_c;
  std::vector<Mat> h;
};

struct LstmStackTape {
  std::vector<LstmLayerTape> layers;
};

/// Stacked LSTM with zero initial states, scanned over a sequence of
/// batched inputs. Parameters live in a shared ParamLayout under
/// "<prefix>l<k>.W_f" ... "<prefix>l<k>.b_o".
class LstmStack {
 public:
  LstmStack() = default;
  LstmStack(ParamLayout& layout, const std::string& prefix, int input, int hidden, int layers);

  int input() const { return input_; }
  int hidden() const { return hidden_; }
  int layers() const { return layers_; }

  /// Fills the tape; returns nothing, top-layer hidden states are tape.layers.back().h.
  void forward(std::span<const double> params, const std::vector<Mat>& inputs, LstmStackTape& tape) const;

  /// dtop[s] is the loss gradient w.r.t. the top hidden state at step s
  /// (may be empty matrices for steps without a direct gradient).
  /// Accumulates into grad. Returns input gradients when want_dx.
  std::vector<Mat> backward(std::span<const double> params, std::span<double> grad, const LstmStackTape& tape,
                            const std::vector<Mat>& dtop, bool want_dx) const;

  /// Writes the layer-k cell as a standalone LstmParams.
  LstmParams cell(std::span<const double> params, int layer) const;
  void set_cell(std::span<double> params, int layer, const LstmParams& p) const;

  // First tensor index (W_f) and bias index (b_f) of each layer.
  std::size_t weight_index(int layer) const { return w_idx_[layer]; }
  std::size_t bias_index(int layer) const { return b_idx_[layer]; }

 private:
  int layer_input(int k) const { return k == 0 ? input_ : hidden_; }

  int input_ = 0, hidden_ = 0, layers_ = 0;
  std::vector<std::size_t> w_idx_, b_idx_;
  std::vector<std::size_t> w_off_, b_off_;
};

}  // namespace modsoft::nn

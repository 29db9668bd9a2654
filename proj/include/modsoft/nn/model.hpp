#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modsoft/core.hpp"
#include "modsoft/dataset.hpp"
#include "modsoft/nn/lstm.hpp"
#include "modsoft/nn/params.hpp"

namespace modsoft::nn {

enum class Arch {
  BiLstm,    // recurrence over the module chain, shared across modules
  FourLstm,  // one time-recurrent net per module, own features only
  TimeLstm,  // one time-recurrent net over all modules' concatenated features
};

std::string_view to_string(Arch a);
Arch arch_from_string(std::string_view s);

struct NetHyper {
  Arch arch = Arch::BiLstm;
  int hidden = 32;
  int layers = 2;  // per direction for the biLSTM
  int window = 5;
  int d = 3;
  int a_dim = 2;
  int n_sum = 0;        // required by the baselines, ignored by the biLSTM
  int head_hidden = 0;  // 0: one affine layer; >0: tanh hidden layer of this width
  std::uint64_t seed = 1;

  int feature_dim() const { return modsoft::feature_dim(d, a_dim, window); }
  void validate() const;
  bool operator==(const NetHyper&) const = default;
};

// Affine head, optionally with one tanh hidden layer.
class Head {
 public:
  Head() = default;
  Head(ParamLayout& layout, const std::string& prefix, int input, int output, int hidden);

  int input() const { return input_; }
  int output() const { return output_; }

  // Returns outputs; keeps hidden activations in `act` for backward.
  Mat forward(std::span<const double> params, const Mat& z, Mat& act) const;
  // Accumulates parameter gradients; returns dL/dz.
  Mat backward(std::span<const double> params, std::span<double> grad, const Mat& z, const Mat& act,
               const Mat& dy) const;

  std::size_t first_tensor() const { return first_; }
  std::size_t tensor_count() const { return hidden_ > 0 ? 4 : 2; }

 private:
  int input_ = 0, output_ = 0, hidden_ = 0;
  std::size_t first_ = 0;
  std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0;  // offsets
};

/// Common interface of the three inverse-model architectures. Parameters are
/// one flat buffer described by layout(); every method is const and safe to
/// call concurrently.
class Model {
 public:
  virtual ~Model() = default;

  const NetHyper& hyper() const { return hyper_; }
  const ParamLayout& layout() const { return layout_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  /// Module count the model is bound to; 0 when any chain length is accepted.
  virtual int bound_n_sum() const = 0;

  /// Sum of squared residuals over groups `idx` of `pairs` (all modules and
  /// components), with its gradient accumulated into `grad` when non-empty.
  /// Predictions are unclamped.
  virtual double sse_and_grad(const PairSet& pairs, std::span<const std::size_t> idx,
                              std::span<double> grad) const = 0;

  /// Unclamped predictions, [group][module][component].
  virtual std::vector<double> predict(const PairSet& pairs, std::span<const std::size_t> idx) const = 0;

  /// Inference for one time step: per-module feature vectors in chain order,
  /// outputs clamped to [-1, 1].
  std::vector<ModuleAction> act(const std::vector<std::vector<double>>& features) const;

  virtual std::unique_ptr<Model> clone() const = 0;

 protected:
  explicit Model(const NetHyper& h) : hyper_(h) {}
  void finalize_layout();  // allocates params_ and initializes them from the seed
  void check_pairs(const PairSet& pairs) const;

  NetHyper hyper_;
  ParamLayout layout_;
  std::vector<double> params_;
};

class BiLstmNet final : public Model {
 public:
  explicit BiLstmNet(const NetHyper& h);

  int bound_n_sum() const override { return 0; }
  double sse_and_grad(const PairSet& pairs, std::span<const std::size_t> idx, std::span<double> grad) const override;
  std::vector<double> predict(const PairSet& pairs, std::span<const std::size_t> idx) const override;
  std::unique_ptr<Model> clone() const override { return std::make_unique<BiLstmNet>(*this); }

  const LstmStack& forward_stack() const { return fwd_; }
  const LstmStack& backward_stack() const { return bwd_; }
  const Head& head() const { return head_; }

  /// Raw chain evaluation: xs[m] is the (feature_dim x B) input of module m;
  /// returns per-module (a_dim x B) unclamped outputs.
  std::vector<Mat> chain_forward(const std::vector<Mat>& xs) const;

 private:
  double run(const PairSet& pairs, std::span<const std::size_t> idx, std::span<double> grad,
             std::vector<double>* pred) const;

  LstmStack fwd_, bwd_;
  Head head_;
};

class FourLstmNet final : public Model {
 public:
  explicit FourLstmNet(const NetHyper& h);

  int bound_n_sum() const override { return hyper_.n_sum; }
  double sse_and_grad(const PairSet& pairs, std::span<const std::size_t> idx, std::span<double> grad) const override;
  std::vector<double> predict(const PairSet& pairs, std::span<const std::size_t> idx) const override;
  std::unique_ptr<Model> clone() const override { return std::make_unique<FourLstmNet>(*this); }

  const LstmStack& stack(int module) const { return stacks_[module]; }
  const Head& head(int module) const { return heads_[module]; }

 private:
  double run(const PairSet& pairs, std::span<const std::size_t> idx, std::span<double> grad,
             std::vector<double>* pred) const;

  std::vector<LstmStack> stacks_;
  std::vector<Head> heads_;
};

class TimeLstmNet final : public Model {
 public:
  explicit TimeLstmNet(const NetHyper& h);

  int bound_n_sum() const override { return hyper_.n_sum; }
  double sse_and_grad(const PairSet& pairs, std::span<const std::size_t> idx, std::span<double> grad) const override;
  std::vector<double> predict(const PairSet& pairs, std::span<const std::size_t> idx) const override;
  std::unique_ptr<Model> clone() const override { return std::make_unique<TimeLstmNet>(*this); }

 private:
  double run(const PairSet& pairs, std::span<const std::size_t> idx, std::span<double> grad,
             std::vector<double>* pred) const;

  LstmStack stack_;
  Head head_;
};

std::unique_ptr<Model> make_model(const NetHyper& h);

/// Self-describing text container: header line with the hyperparameters,
/// then one "tensor <name> <rows> <cols>" line per tensor followed by its
/// row-major values on one line.
void model_write(const Model& m, std::ostream& os);
std::unique_ptr<Model> model_read(std::istream& is);
void model_save(const Model& m, const std::filesystem::path& path);
std::unique_ptr<Model> model_load(const std::filesystem::path& path);

}  // namespace modsoft::nn

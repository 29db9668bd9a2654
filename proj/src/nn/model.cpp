#include "modsoft/nn/model.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "modsoft/errors.hpp"
#include "modsoft/rng.hpp"
#include "modsoft/textio.hpp"

namespace modsoft::nn {

std::string_view to_string(Arch a) {
  switch (a) {
    case Arch::BiLstm: return "bilstm";
    case Arch::FourLstm: return "four-lstm";
    case Arch::TimeLstm: return "time-lstm";
  }
  return "?";
}

Arch arch_from_string(std::string_view s) {
  if (s == "bilstm") return Arch::BiLstm;
  if (s == "four-lstm") return Arch::FourLstm;
  if (s == "time-lstm") return Arch::TimeLstm;
  throw ConfigError("unknown network variant '" + std::string(s) + "'");
}

void NetHyper::validate() const {
  if (hidden < 1 || layers < 1 || window < 1) throw ConfigError("network: hidden, layers and window must be >= 1");
  if (!((d == 3 && a_dim == 2) || (d == 2 && a_dim == 1)))
    throw ConfigError("network: (d, a_dim) must be (3, 2) or (2, 1)");
  if (head_hidden < 0) throw ConfigError("network: head_hidden must be >= 0");
  if (arch != Arch::BiLstm && n_sum < 1) throw ConfigError("network: baselines need n_sum >= 1");
}

// ---------------------------------------------------------------------------

Head::Head(ParamLayout& layout, const std::string& prefix, int input, int output, int hidden)
    : input_(input), output_(output), hidden_(hidden) {
  if (hidden > 0) {
    first_ = layout.add(prefix + "W1", hidden, input);
    b1_ = layout[layout.add(prefix + "b1", hidden, 1)].offset;
    w2_ = layout[layout.add(prefix + "W2", output, hidden)].offset;
    b2_ = layout[layout.add(prefix + "b2", output, 1)].offset;
    w1_ = layout[first_].offset;
  } else {
    first_ = layout.add(prefix + "W", output, input);
    w2_ = layout[first_].offset;
    b2_ = layout[layout.add(prefix + "b", output, 1)].offset;
  }
}

Mat Head::forward(std::span<const double> params, const Mat& z, Mat& act) const {
  const double* p = params.data();
  if (hidden_ > 0) {
    Mat pre = ConstRowMap(p + w1_, hidden_, input_) * z;
    pre.colwise() += Eigen::Map<const Eigen::VectorXd>(p + b1_, hidden_);
    act = pre.array().tanh().matrix();
    Mat y = ConstRowMap(p + w2_, output_, hidden_) * act;
    y.colwise() += Eigen::Map<const Eigen::VectorXd>(p + b2_, output_);
    return y;
  }
  Mat y = ConstRowMap(p + w2_, output_, input_) * z;
  y.colwise() += Eigen::Map<const Eigen::VectorXd>(p + b2_, output_);
  return y;
}

Mat Head::backward(std::span<const double> params, std::span<double> grad, const Mat& z, const Mat& act,
                   const Mat& dy) const {
  const double* p = params.data();
  double* g = grad.data();
  if (hidden_ > 0) {
    RowMap(g + w2_, output_, hidden_).noalias() += dy * act.transpose();
    Eigen::Map<Eigen::VectorXd>(g + b2_, output_) += dy.rowwise().sum();
    const Mat dpre = ((ConstRowMap(p + w2_, output_, hidden_).transpose() * dy).array() *
                      (1.0 - act.array() * act.array()))
                         .matrix();
    RowMap(g + w1_, hidden_, input_).noalias() += dpre * z.transpose();
    Eigen::Map<Eigen::VectorXd>(g + b1_, hidden_) += dpre.rowwise().sum();
    return ConstRowMap(p + w1_, hidden_, input_).transpose() * dpre;
  }
  RowMap(g + w2_, output_, input_).noalias() += dy * z.transpose();
  Eigen::Map<Eigen::VectorXd>(g + b2_, output_) += dy.rowwise().sum();
  return ConstRowMap(p + w2_, output_, input_).transpose() * dy;
}

// ---------------------------------------------------------------------------

void Model::finalize_layout() {
  params_.assign(layout_.total(), 0.0);
  Rng rng(mix_seed(hyper_.seed, 0x1417));
  double bound = 1.0;
  for (const TensorInfo& t : layout_.tensors()) {
    if (t.cols > 1) bound = 1.0 / std::sqrt(static_cast<double>(t.cols));
    for (std::size_t k = 0; k < t.size(); ++k) params_[t.offset + k] = rng.uniform(-bound, bound);
  }
}

void Model::check_pairs(const PairSet& pairs) const {
  if (pairs.feature_dim() != hyper_.feature_dim() || pairs.d() != hyper_.d || pairs.a_dim() != hyper_.a_dim ||
      pairs.window() != hyper_.window)
    throw ShapeError("feature layout (dim " + std::to_string(pairs.feature_dim()) + ") does not match the " +
                     std::string(to_string(hyper_.arch)) + " input (dim " + std::to_string(hyper_.feature_dim()) +
                     ")");
  if (bound_n_sum() != 0 && pairs.n_sum() != bound_n_sum())
    throw ShapeError(std::string(to_string(hyper_.arch)) + " was built for " + std::to_string(bound_n_sum()) +
                     " modules, got " + std::to_string(pairs.n_sum()));
  if (pairs.n_sum() < 1) throw ShapeError("empty module chain");
}

std::vector<ModuleAction> Model::act(const std::vector<std::vector<double>>& features) const {
  const int n = static_cast<int>(features.size());
  PairSet one(n, hyper_.d, hyper_.a_dim, hyper_.window);
  one.resize(1);
  for (int m = 0; m < n; ++m) {
    if (features[m].size() != static_cast<std::size_t>(hyper_.feature_dim()))
      throw ShapeError("feature vector of module " + std::to_string(m + 1) + " has wrong length");
    std::copy(features[m].begin(), features[m].end(), one.features(0, m).begin());
  }
  const std::size_t idx = 0;
  const auto y = predict(one, std::span<const std::size_t>(&idx, 1));
  std::vector<ModuleAction> out(static_cast<std::size_t>(n));
  for (int m = 0; m < n; ++m) {
    for (int k = 0; k < hyper_.a_dim; ++k) out[m].a[k] = y[static_cast<std::size_t>(m) * hyper_.a_dim + k];
    out[m] = out[m].clamped();
  }
  return out;
}

std::unique_ptr<Model> make_model(const NetHyper& h) {
  h.validate();
  switch (h.arch) {
    case Arch::BiLstm: return std::make_unique<BiLstmNet>(h);
    case Arch::FourLstm: return std::make_unique<FourLstmNet>(h);
    case Arch::TimeLstm: return std::make_unique<TimeLstmNet>(h);
  }
  throw ConfigError("unknown architecture");
}

// ---------------------------------------------------------------------------
// Serialization

void model_write(const Model& m, std::ostream& os) {
  const NetHyper& h = m.hyper();
  os << "modsoft-model version=1 arch=" << to_string(h.arch) << " hidden=" << h.hidden << " layers=" << h.layers
     << " window=" << h.window << " d=" << h.d << " a_dim=" << h.a_dim << " n_sum=" << h.n_sum
     << " head_hidden=" << h.head_hidden << " seed=" << h.seed << " tensors=" << m.layout().tensors().size() << '\n';
  std::string line;
  const auto p = m.params();
  for (const TensorInfo& t : m.layout().tensors()) {
    os << "tensor " << t.name << ' ' << t.rows << ' ' << t.cols << '\n';
    line.clear();
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (k) line += ' ';
      textio::append_double(line, p[t.offset + k]);
    }
    line += '\n';
    os << line;
  }
}

std::unique_ptr<Model> model_read(std::istream& is) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line) || line.rfind("modsoft-model", 0) != 0) throw ParseError("not a model file", lineno);
  const auto kv = textio::parse_header_fields(line);
  if (textio::require_field(kv, "version", lineno) != "1") throw ParseError("unsupported model version", lineno);
  NetHyper h;
  auto geti = [&](const char* k) { return static_cast<int>(textio::parse_int(textio::require_field(kv, k, lineno), lineno)); };
  try {
    h.arch = arch_from_string(textio::require_field(kv, "arch", lineno));
    h.hidden = geti("hidden");
    h.layers = geti("layers");
    h.window = geti("window");
    h.d = geti("d");
    h.a_dim = geti("a_dim");
    h.n_sum = geti("n_sum");
    h.head_hidden = geti("head_hidden");
    h.seed = textio::parse_u64(textio::require_field(kv, "seed", lineno), lineno);
    auto model = make_model(h);
    const auto& tensors = model->layout().tensors();
    if (static_cast<std::size_t>(geti("tensors")) != tensors.size())
      throw ParseError("tensor count does not match the architecture", lineno);
    auto p = model->params();
    for (const TensorInfo& t : tensors) {
      ++lineno;
      if (!std::getline(is, line)) throw ParseError("missing tensor " + t.name, lineno);
      const auto tok = textio::split(line);
      if (tok.size() != 4 || tok[0] != "tensor" || tok[1] != t.name ||
          textio::parse_int(tok[2], lineno) != t.rows || textio::parse_int(tok[3], lineno) != t.cols)
        throw ParseError("expected tensor " + t.name + " " + std::to_string(t.rows) + "x" + std::to_string(t.cols),
                         lineno);
      ++lineno;
      if (!std::getline(is, line)) throw ParseError("missing values of " + t.name, lineno);
      const auto vals = textio::split(line);
      if (vals.size() != t.size()) throw ParseError("wrong value count for " + t.name, lineno);
      for (std::size_t k = 0; k < t.size(); ++k) p[t.offset + k] = textio::parse_double(vals[k], lineno);
    }
    return model;
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), lineno);
  }
}

void model_save(const Model& m, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  model_write(m, os);
}

std::unique_ptr<Model> model_load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return model_read(is);
}

}  // namespace modsoft::nn

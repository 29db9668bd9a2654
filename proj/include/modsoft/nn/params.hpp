#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace modsoft::nn {

using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

// Named row-major tensors packed into one flat buffer. Gradients and
// optimizer moments reuse the layout through map() over their own buffers.
class ParamLayout {
 public:
  std::size_t add(std::string name, int rows, int cols);

  const std::vector<TensorInfo>& tensors() const { return tensors_; }
  const TensorInfo& operator[](std::size_t i) const { return tensors_[i]; }
  std::size_t total() const { return total_; }
  // Index of a tensor by name, or npos.
  std::size_t find(const std::string& name) const;

  RowMap map(std::span<double> buf, std::size_t i) const {
    return {buf.data() + tensors_[i].offset, tensors_[i].rows, tensors_[i].cols};
  }
  ConstRowMap map(std::span<const double> buf, std::size_t i) const {
    return {buf.data() + tensors_[i].offset, tensors_[i].rows, tensors_[i].cols};
  }
  // Rows of consecutive tensors with equal column counts, viewed as one matrix.
  RowMap map_rows(std::span<double> buf, std::size_t first, int total_rows) const {
    return {buf.data() + tensors_[first].offset, total_rows, tensors_[first].cols};
  }
  ConstRowMap map_rows(std::span<const double> buf, std::size_t first, int total_rows) const {
    return {buf.data() + tensors_[first].offset, total_rows, tensors_[first].cols};
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<TensorInfo> tensors_;
  std::size_t total_ = 0;
};

}  // namespace modsoft::nn

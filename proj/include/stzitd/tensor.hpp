#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace stzitd {

// Dense row-major tensor of doubles. Rank 0 (shape {}) holds a single
// scalar; ops that need matrices require rank 2. Value-semantic.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double v);
  static Tensor vec(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return v_.size(); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  // Rank-2 accessors; throw DimensionError on other ranks.
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t i, std::size_t j);
  double at(std::size_t i, std::size_t j) const;

  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

  // Value of a one-element tensor (any rank).
  double scalar_value() const;

  std::span<double> data() { return v_; }
  std::span<const double> data() const { return v_; }

  void fill(double v);

  // Throws NumericError naming the producing op and the first bad index.
  void ensure_finite(const std::string& op) const;

  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> v_;
};

}  // namespace stzitd

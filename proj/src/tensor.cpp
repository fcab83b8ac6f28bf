#include "stzitd/tensor.hpp"

#include <cmath>
#include <sstream>

#include "stzitd/errors.hpp"

namespace stzitd {

namespace {
std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  v_.assign(product(shape_), 0.0);
}

Tensor Tensor::scalar(double v) {
  Tensor t{std::vector<std::size_t>{}};
  t.v_[0] = v;
  return t;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::vec(std::vector<double> values) {
  Tensor t;
  t.shape_ = {values.size()};
  t.v_ = std::move(values);
  return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  if (values.size() != rows * cols)
    throw DimensionError("matrix: " + std::to_string(values.size()) + " values for " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  Tensor t;
  t.shape_ = {rows, cols};
  t.v_ = std::move(values);
  return t;
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::size_t r = rows.size();
  std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor t{{r, c}};
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("from_rows: ragged rows");
    for (double v : row) t.v_[i++] = v;
  }
  return t;
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t{{n, n}};
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows(): tensor has shape " + shape_str());
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols(): tensor has shape " + shape_str());
  return shape_[1];
}

double& Tensor::at(std::size_t i, std::size_t j) {
  if (rank() != 2) throw DimensionError("at(i,j): tensor has shape " + shape_str());
  return v_[i * shape_[1] + j];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2) throw DimensionError("at(i,j): tensor has shape " + shape_str());
  return v_[i * shape_[1] + j];
}

double Tensor::scalar_value() const {
  if (numel() != 1) throw DimensionError("scalar_value(): tensor has shape " + shape_str());
  return v_[0];
}

void Tensor::fill(double v) {
  for (double& x : v_) x = v;
}

void Tensor::ensure_finite(const std::string& op) const {
  for (std::size_t i = 0; i < v_.size(); ++i) {
    if (!std::isfinite(v_[i])) {
      std::ostringstream msg;
      msg << op << ": non-finite value " << v_[i] << " at flat index " << i << " (shape "
          << shape_str() << ")";
      throw NumericError(msg.str());
    }
  }
}

std::string Tensor::shape_str() const {
  std::ostringstream s;
  s << "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) s << (i ? "," : "") << shape_[i];
  s << ")";
  return s.str();
}

}  // namespace stzitd

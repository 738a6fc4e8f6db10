#include "cnenet/ndarray.hpp"

#include <algorithm>
#include <sstream>

#include "cnenet/error.hpp"

namespace cne {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  if (shape.empty()) return 0;
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("array shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("array dimensions must be positive, got " + shape_to_string(shape));
  }
}

}  // namespace

NdArray::NdArray(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

NdArray::NdArray(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw DimensionError("data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_to_string(shape_));
  }
}

NdArray NdArray::vector(std::vector<double> values) {
  const auto n = values.size();
  return NdArray({n}, std::move(values));
}

NdArray NdArray::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return NdArray({rows, cols}, std::move(values));
}

NdArray NdArray::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<double> values;
  std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("ragged matrix literal");
    values.insert(values.end(), r.begin(), r.end());
  }
  return NdArray({rows.size(), cols}, std::move(values));
}

std::size_t NdArray::rows() const noexcept {
  if (shape_.empty()) return 0;
  if (shape_.size() == 1) return 1;
  return shape_size(shape_) / shape_.back();
}

std::size_t NdArray::cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }

std::span<double> NdArray::grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), 0.0);
  return grad_;
}

std::span<const double> NdArray::grad() const { return grad_; }

void NdArray::accumulate_grad(std::span<const double> g) const {
  if (g.size() != data_.size()) throw DimensionError("gradient does not match " + shape_to_string(shape_));
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) grad_[i] += g[i];
}

void NdArray::zero_grad() { grad_.assign(data_.size(), 0.0); }

NdArray NdArray::reshaped(Shape shape) const {
  if (shape_size(shape) != size()) {
    throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " +
                         shape_to_string(shape));
  }
  return NdArray(std::move(shape), data_);
}

}  // namespace cne

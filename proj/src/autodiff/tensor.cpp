#include "opgan/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "opgan/error.hpp"

namespace opgan {

std::string Shape::str() const {
  return "[" + std::to_string(batch) + "," + std::to_string(channels) + "," +
         std::to_string(length) + "]";
}

Tensor3::Tensor3(Shape shape, double fill) : shape_(shape), data_(shape.numel(), fill) {}

Tensor3::Tensor3(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.numel()) {
    throw ConfigError("tensor data has " + std::to_string(data_.size()) +
                      " elements, shape " + shape_.str() + " needs " +
                      std::to_string(shape_.numel()));
  }
}

Tensor3 Tensor3::signal(std::span<const double> samples) {
  return Tensor3({1, 1, samples.size()}, std::vector<double>(samples.begin(), samples.end()));
}

Tensor3 Tensor3::signal(std::initializer_list<double> samples) {
  return Tensor3({1, 1, samples.size()}, std::vector<double>(samples));
}

void Tensor3::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor3::accumulate(const Tensor3& other) {
  if (other.shape_ != shape_) {
    throw ConfigError("accumulate: shape " + other.shape_.str() + " vs " + shape_.str());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

bool Tensor3::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace opgan

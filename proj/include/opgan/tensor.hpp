#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace opgan {

/// Extents of a rank-3 (batch x channels x length) array.
struct Shape {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t length = 0;

  std::size_t numel() const noexcept { return batch * channels * length; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

/// Dense rank-3 array of doubles, batch-major (B, C, L). Plain value type;
/// graph bookkeeping lives in ad::Var.
class Tensor3 {
 public:
  Tensor3() = default;
  explicit Tensor3(Shape shape, double fill = 0.0);
  Tensor3(Shape shape, std::vector<double> data);

  /// A [1, 1, n] signal.
  static Tensor3 signal(std::span<const double> samples);
  static Tensor3 signal(std::initializer_list<double> samples);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t numel() const noexcept { return data_.size(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  /// Contiguous samples of one (batch, channel) row.
  std::span<double> row(std::size_t b, std::size_t c) noexcept {
    return {data_.data() + (b * shape_.channels + c) * shape_.length, shape_.length};
  }
  std::span<const double> row(std::size_t b, std::size_t c) const noexcept {
    return {data_.data() + (b * shape_.channels + c) * shape_.length, shape_.length};
  }

  double& operator()(std::size_t b, std::size_t c, std::size_t l) noexcept {
    return data_[(b * shape_.channels + c) * shape_.length + l];
  }
  double operator()(std::size_t b, std::size_t c, std::size_t l) const noexcept {
    return data_[(b * shape_.channels + c) * shape_.length + l];
  }

  void fill(double v);
  /// this += other, elementwise; shapes must match.
  void accumulate(const Tensor3& other);
  bool all_finite() const noexcept;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

}  // namespace opgan

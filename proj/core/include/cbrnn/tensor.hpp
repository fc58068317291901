#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cbrnn {

/// Dense row-major volume of up to three axes: (time, feature, channel).
/// Unused trailing axes have extent 1. Channel is the fastest-varying axis.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t time, std::size_t feature, std::size_t channel = 1, double fill = 0.0)
      : dims_{time, feature, channel}, data_(time * feature * channel, fill) {}

  std::size_t time() const { return dims_[0]; }
  std::size_t feature() const { return dims_[1]; }
  std::size_t channel() const { return dims_[2]; }
  const std::array<std::size_t, 3>& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t t, std::size_t f, std::size_t c = 0) {
    return data_[(t * dims_[1] + f) * dims_[2] + c];
  }
  double operator()(std::size_t t, std::size_t f, std::size_t c = 0) const {
    return data_[(t * dims_[1] + f) * dims_[2] + c];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }
  std::string shape_string() const;

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::array<std::size_t, 3> dims_{0, 0, 0};
  std::vector<double> data_;
};

}  // namespace cbrnn

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ifgnet {

// Rank 1-3 row-major array of doubles. No broadcasting: callers reshape.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<std::size_t> shape);
  DenseTensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Rank-2 element access.
  double& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  // Rank-3 element access.
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Row i of a rank-2 tensor.
  std::span<double> row(std::size_t i) { return {data_.data() + i * shape_[1], shape_[1]}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * shape_[1], shape_[1]};
  }

  DenseTensor reshaped(std::vector<std::size_t> shape) const;
  void fill(double value);
  bool all_finite() const;
  bool same_shape(const DenseTensor& other) const { return shape_ == other.shape_; }
  std::string shape_string() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Throws NonFiniteError naming `what` if any entry is NaN/Inf.
void require_finite(const DenseTensor& t, const char* what);

// Throws ShapeError unless `t` has exactly `shape`.
void require_shape(const DenseTensor& t, const std::vector<std::size_t>& shape, const char* what);

// Trainable tensor with its gradient and Adam moment estimates.
struct Parameter {
  DenseTensor value;
  DenseTensor grad;
  DenseTensor adam_m;
  DenseTensor adam_v;
  std::uint64_t step_count = 0;

  Parameter() = default;
  explicit Parameter(std::vector<std::size_t> shape);

  void zero_grad();
  std::size_t size() const { return value.size(); }
};

struct NamedParameter {
  std::string name;
  Parameter* param;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update. Leaves grad untouched.
void adam_step(Parameter& p, const AdamConfig& cfg);

// Seeded generator whose draws are identical across platforms: the engine is
// std::mt19937_64 and every distribution is computed here rather than by the
// implementation-defined <random> distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Uniform integer in [0, n), unbiased.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

double silu(double x);
// d/dx silu(x)
double silu_grad(double x);

// Numerically stable softmax over the last axis.
DenseTensor softmax_lastdim(const DenseTensor& t);
// In-place softmax of one slice; returns nothing, throws on non-finite input.
void softmax_inplace(std::span<double> v);

}  // namespace ifgnet

#include "ifgnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "ifgnet/error.hpp"

namespace ifgnet {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw ShapeError("tensor rank must be 1..3, got " + std::to_string(shape.size()));
  }
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

DenseTensor::DenseTensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string());
  }
}

DenseTensor DenseTensor::reshaped(std::vector<std::size_t> shape) const {
  return DenseTensor(std::move(shape), data_);
}

void DenseTensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool DenseTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string DenseTensor::shape_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ", ";
    os << shape_[i];
  }
  os << ')';
  return os.str();
}

void require_finite(const DenseTensor& t, const char* what) {
  if (!t.all_finite()) throw NonFiniteError(std::string(what) + ": non-finite value");
}

void require_shape(const DenseTensor& t, const std::vector<std::size_t>& shape, const char* what) {
  if (t.shape() != shape) {
    std::ostringstream os;
    os << what << ": expected shape (";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
    os << "), got " << t.shape_string();
    throw ShapeError(os.str());
  }
}

Parameter::Parameter(std::vector<std::size_t> shape)
    : value(shape), grad(shape), adam_m(shape), adam_v(std::move(shape)) {}

void Parameter::zero_grad() { grad.fill(0.0); }

void adam_step(Parameter& p, const AdamConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (!p.grad.same_shape(p.value) || !p.adam_m.same_shape(p.value) ||
      !p.adam_v.same_shape(p.value)) {
    throw ShapeError("adam: parameter buffers are not shape-identical");
  }
  ++p.step_count;
  const double t = static_cast<double>(p.step_count);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  auto value = p.value.data();
  auto grad = p.grad.data();
  auto m = p.adam_m.data();
  auto v = p.adam_v.data();
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ConfigError("Rng::below: empty range");
  // Rejection sampling over the largest multiple of n.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t draw;
  do {
    draw = engine_();
  } while (draw >= limit);
  return draw % n;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

void softmax_inplace(std::span<double> v) {
  if (v.empty()) throw ShapeError("softmax: empty slice");
  double peak = v[0];
  for (double x : v) {
    if (!std::isfinite(x)) throw NonFiniteError("softmax: non-finite input");
    peak = std::max(peak, x);
  }
  double total = 0.0;
  for (double& x : v) {
    x = std::exp(x - peak);
    total += x;
  }
  for (double& x : v) x /= total;
}

DenseTensor softmax_lastdim(const DenseTensor& t) {
  if (t.rank() == 0) throw ShapeError("softmax: empty tensor");
  const std::size_t width = t.shape().back();
  if (width == 0) throw ShapeError("softmax: last dimension is empty");
  DenseTensor out = t;
  auto data = out.data();
  for (std::size_t start = 0; start < data.size(); start += width) {
    softmax_inplace(data.subspan(start, width));
  }
  return out;
}

}  // namespace ifgnet

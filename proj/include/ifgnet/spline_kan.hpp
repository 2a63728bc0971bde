#pragma once

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "ifgnet/tensor.hpp"

namespace ifgnet {

inline constexpr int kMaxSplineDegree = 5;

// Uniform knot grid over [t_min, t_max] with `degree` extra knots on each side,
// giving num_basis() = intervals + degree B-spline functions.
struct SplineGrid {
  double t_min = -3.0;
  double t_max = 3.0;
  int intervals = 8;
  int degree = 3;

  void validate() const;
  int num_basis() const { return intervals + degree; }
  double spacing() const { return (t_max - t_min) / intervals; }
  double knot(int i) const { return t_min + (i - degree) * spacing(); }
  std::vector<double> knots() const;

  bool operator==(const SplineGrid&) const = default;
};

// Nonzero window of the basis at one point: functions first..first+degree.
struct LocalBasis {
  int first = 0;
  std::array<double, kMaxSplineDegree + 1> value{};
  std::array<double, kMaxSplineDegree + 1> deriv{};
  // False when x was clamped, i.e. the spline is locally constant in x.
  bool inside = true;
};

// Evaluates the degree+1 nonzero basis functions and their derivatives at
// clamp(x, t_min, t_max) with the triangular Cox-de Boor scheme.
LocalBasis local_basis(double x, const SplineGrid& grid);

// Dense basis vector of length num_basis().
std::vector<double> bspline_basis(double x, const SplineGrid& grid);

// Kolmogorov-Arnold layer. Every edge (i -> j) carries
//   phi_ji(x) = base_weight[j,i] * silu(x) + scale_spline[j,i] * sum_b coeff[j,i,b] * B_b(x)
// and y[n,j] = sum_i phi_ji(x[n,i]).
class KanLayer {
 public:
  struct Cache {
    std::size_t rows = 0;
    std::size_t col_begin = 0;
    std::size_t cols = 0;
    std::vector<double> input;
    std::vector<LocalBasis> basis;
  };

  KanLayer() = default;
  KanLayer(std::size_t in_dim, std::size_t out_dim, SplineGrid grid = {});

  // coeffs ~ N(0, 0.1/sqrt(B)), base_weight ~ U(-1/sqrt(in), 1/sqrt(in)), scale_spline = 1.
  void initialize(Rng& rng);

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  const SplineGrid& grid() const { return grid_; }

  DenseTensor forward(const DenseTensor& x) const;
  DenseTensor forward(const DenseTensor& x, Cache& cache) const;
  // Returns dL/dx and accumulates parameter gradients.
  DenseTensor backward(const Cache& cache, const DenseTensor& dy);

  // The layer is a sum of per-input edge functions, so a contiguous block of
  // input columns [col_begin, col_begin + x.dim(1)) can be evaluated on its own.
  // forward() == sum of forward_columns() over a partition of the inputs.
  DenseTensor forward_columns(const DenseTensor& x, std::size_t col_begin) const;
  DenseTensor forward_columns(const DenseTensor& x, std::size_t col_begin, Cache& cache) const;

  void collect_parameters(std::string_view prefix, std::vector<NamedParameter>& out);
  void zero_grad();

  Parameter spline_coeffs;  // (out, in, B)
  Parameter base_weight;    // (out, in)
  Parameter scale_spline;   // (out, in)

 private:
  void check_columns(const DenseTensor& x, std::size_t col_begin) const;
  DenseTensor run_forward(const DenseTensor& x, std::size_t col_begin, Cache* cache) const;

  std::size_t in_dim_ = 0;
  std::size_t out_dim_ = 0;
  SplineGrid grid_;
};

}  // namespace ifgnet

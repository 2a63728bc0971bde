#include "ifgnet/spline_kan.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ifgnet/error.hpp"

namespace ifgnet {

void SplineGrid::validate() const {
  if (!(std::isfinite(t_min) && std::isfinite(t_max)) || !(t_min < t_max)) {
    throw ConfigError("spline grid: t_min must be below t_max");
  }
  if (intervals < 1) throw ConfigError("spline grid: need at least one interval");
  if (degree < 1 || degree > kMaxSplineDegree) {
    throw ConfigError("spline grid: degree must be in 1.." + std::to_string(kMaxSplineDegree));
  }
}

std::vector<double> SplineGrid::knots() const {
  std::vector<double> out(static_cast<std::size_t>(intervals + 2 * degree + 1));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = knot(static_cast<int>(i));
  return out;
}

LocalBasis local_basis(double x, const SplineGrid& grid) {
  const int k = grid.degree;
  const double h = grid.spacing();
  LocalBasis lb;
  lb.inside = x >= grid.t_min && x <= grid.t_max;
  const double xc = std::clamp(x, grid.t_min, grid.t_max);

  int span = static_cast<int>(std::floor((xc - grid.t_min) / h));
  span = std::clamp(span, 0, grid.intervals - 1);
  lb.first = span;
  // Knot index of the left end of the active interval.
  const int i = span + k;

  std::array<double, kMaxSplineDegree + 1> left{};
  std::array<double, kMaxSplineDegree + 1> right{};
  std::array<double, kMaxSplineDegree + 1> lower{};
  auto& n = lb.value;
  n.fill(0.0);
  n[0] = 1.0;
  for (int j = 1; j <= k; ++j) {
    if (j == k) lower = n;
    left[j] = xc - grid.knot(i + 1 - j);
    right[j] = grid.knot(i + j) - xc;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = n[r] / (right[r + 1] + left[j - r]);
      n[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    n[j] = saved;
  }

  lb.deriv.fill(0.0);
  if (lb.inside) {
    // B'_{j,k} = (B_{j,k-1} - B_{j+1,k-1}) / h on a uniform grid; lower[m] holds
    // the degree k-1 function with index span + 1 + m.
    for (int r = 0; r <= k; ++r) {
      const double a = r >= 1 ? lower[r - 1] : 0.0;
      const double b = r <= k - 1 ? lower[r] : 0.0;
      lb.deriv[r] = (a - b) / h;
    }
  }
  return lb;
}

std::vector<double> bspline_basis(double x, const SplineGrid& grid) {
  grid.validate();
  if (!std::isfinite(x)) throw NonFiniteError("bspline_basis: non-finite input");
  const LocalBasis lb = local_basis(x, grid);
  std::vector<double> out(static_cast<std::size_t>(grid.num_basis()), 0.0);
  for (int r = 0; r <= grid.degree; ++r) out[lb.first + r] = lb.value[r];
  return out;
}

KanLayer::KanLayer(std::size_t in_dim, std::size_t out_dim, SplineGrid grid)
    : spline_coeffs({out_dim, in_dim, static_cast<std::size_t>(grid.num_basis())}),
      base_weight({out_dim, in_dim}),
      scale_spline({out_dim, in_dim}),
      in_dim_(in_dim),
      out_dim_(out_dim),
      grid_(grid) {
  grid_.validate();
  if (in_dim == 0 || out_dim == 0) throw ConfigError("kan layer: dimensions must be positive");
}

void KanLayer::initialize(Rng& rng) {
  const double coeff_std = 0.1 / std::sqrt(static_cast<double>(grid_.num_basis()));
  for (double& c : spline_coeffs.value.data()) c = rng.normal(0.0, coeff_std);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim_));
  for (double& w : base_weight.value.data()) w = rng.uniform(-bound, bound);
  scale_spline.value.fill(1.0);
}

void KanLayer::check_columns(const DenseTensor& x, std::size_t col_begin) const {
  if (x.rank() != 2 || x.dim(1) == 0 || col_begin + x.dim(1) > in_dim_) {
    throw ShapeError("kan layer: input " + x.shape_string() + " at column " +
                     std::to_string(col_begin) + " does not fit in_dim " + std::to_string(in_dim_));
  }
  require_finite(x, "kan layer input");
}

DenseTensor KanLayer::forward(const DenseTensor& x) const {
  if (x.rank() != 2 || x.dim(1) != in_dim_) {
    throw ShapeError("kan layer: expected (N, " + std::to_string(in_dim_) + ") input, got " +
                     x.shape_string());
  }
  return run_forward(x, 0, nullptr);
}

DenseTensor KanLayer::forward(const DenseTensor& x, Cache& cache) const {
  if (x.rank() != 2 || x.dim(1) != in_dim_) {
    throw ShapeError("kan layer: expected (N, " + std::to_string(in_dim_) + ") input, got " +
                     x.shape_string());
  }
  return run_forward(x, 0, &cache);
}

DenseTensor KanLayer::forward_columns(const DenseTensor& x, std::size_t col_begin) const {
  return run_forward(x, col_begin, nullptr);
}

DenseTensor KanLayer::forward_columns(const DenseTensor& x, std::size_t col_begin,
                                      Cache& cache) const {
  return run_forward(x, col_begin, &cache);
}

DenseTensor KanLayer::run_forward(const DenseTensor& x, std::size_t col_begin,
                                  Cache* cache) const {
  check_columns(x, col_begin);
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  const std::size_t nb = static_cast<std::size_t>(grid_.num_basis());
  const int order = grid_.degree + 1;

  std::vector<LocalBasis> row_basis(cols);
  std::vector<double> row_silu(cols);
  if (cache) {
    cache->rows = rows;
    cache->col_begin = col_begin;
    cache->cols = cols;
    cache->input.assign(x.data().begin(), x.data().end());
    cache->basis.resize(rows * cols);
  }

  const double* coeff = spline_coeffs.value.data().data();
  const double* bw = base_weight.value.data().data();
  const double* ss = scale_spline.value.data().data();

  DenseTensor y({rows, out_dim_});
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double xv = x(n, c);
      row_basis[c] = local_basis(xv, grid_);
      row_silu[c] = silu(xv);
    }
    if (cache) std::copy(row_basis.begin(), row_basis.end(), cache->basis.begin() + n * cols);
    for (std::size_t j = 0; j < out_dim_; ++j) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t edge = j * in_dim_ + col_begin + c;
        const LocalBasis& lb = row_basis[c];
        const double* cf = coeff + edge * nb + lb.first;
        double spline = 0.0;
        for (int r = 0; r < order; ++r) spline += cf[r] * lb.value[r];
        acc += bw[edge] * row_silu[c] + ss[edge] * spline;
      }
      y(n, j) = acc;
    }
  }
  return y;
}

DenseTensor KanLayer::backward(const Cache& cache, const DenseTensor& dy) {
  if (dy.rank() != 2 || dy.dim(0) != cache.rows || dy.dim(1) != out_dim_ ||
      cache.basis.size() != cache.rows * cache.cols ||
      cache.col_begin + cache.cols > in_dim_) {
    throw ShapeError("kan layer backward: cache/gradient mismatch (dy " + dy.shape_string() + ")");
  }
  const std::size_t rows = cache.rows;
  const std::size_t cols = cache.cols;
  const std::size_t nb = static_cast<std::size_t>(grid_.num_basis());
  const int order = grid_.degree + 1;

  const double* coeff = spline_coeffs.value.data().data();
  const double* bw = base_weight.value.data().data();
  const double* ss = scale_spline.value.data().data();
  double* g_coeff = spline_coeffs.grad.data().data();
  double* g_bw = base_weight.grad.data().data();
  double* g_ss = scale_spline.grad.data().data();

  DenseTensor dx({rows, cols});
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double xv = cache.input[n * cols + c];
      const double s = silu(xv);
      const double ds = silu_grad(xv);
      const LocalBasis& lb = cache.basis[n * cols + c];
      double grad_x = 0.0;
      for (std::size_t j = 0; j < out_dim_; ++j) {
        const double g = dy(n, j);
        if (g == 0.0) continue;
        const std::size_t edge = j * in_dim_ + cache.col_begin + c;
        const double* cf = coeff + edge * nb + lb.first;
        double* gcf = g_coeff + edge * nb + lb.first;
        double spline = 0.0;
        double dspline = 0.0;
        const double gs = g * ss[edge];
        for (int r = 0; r < order; ++r) {
          spline += cf[r] * lb.value[r];
          dspline += cf[r] * lb.deriv[r];
          gcf[r] += gs * lb.value[r];
        }
        g_bw[edge] += g * s;
        g_ss[edge] += g * spline;
        grad_x += g * (bw[edge] * ds + ss[edge] * dspline);
      }
      dx(n, c) = grad_x;
    }
  }
  return dx;
}

void KanLayer::collect_parameters(std::string_view prefix, std::vector<NamedParameter>& out) {
  const std::string p(prefix);
  out.push_back({p + ".spline_coeffs", &spline_coeffs});
  out.push_back({p + ".base_weight", &base_weight});
  out.push_back({p + ".scale_spline", &scale_spline});
}

void KanLayer::zero_grad() {
  spline_coeffs.zero_grad();
  base_weight.zero_grad();
  scale_spline.zero_grad();
}

}  // namespace ifgnet

#include "ifgnet/frequency_aggregation.hpp"

#include <cmath>
#include <string>

#include "ifgnet/error.hpp"

namespace ifgnet {

namespace {

struct Twiddles {
  std::vector<double> cos_table;
  std::vector<double> sin_table;
};

// cos/sin of 2 pi m / P for m = 0..P-1; phases are reduced mod P first so
// every transform entry reads an exact table value.
Twiddles make_twiddles(std::size_t side) {
  Twiddles t;
  t.cos_table.resize(side);
  t.sin_table.resize(side);
  for (std::size_t m = 0; m < side; ++m) {
    const double angle = 2.0 * M_PI * static_cast<double>(m) / static_cast<double>(side);
    t.cos_table[m] = std::cos(angle);
    t.sin_table[m] = std::sin(angle);
  }
  return t;
}

void check_field(const DenseTensor& f, const char* what) {
  if (f.rank() != 2) throw ShapeError(std::string(what) + ": expected (P^2, D), got " + f.shape_string());
  square_side(f.dim(0));
}

// out(x) += scale * sum_y [wc * in_c(y) * cos(phase) + ws * in_s(y) * sin(phase)],
// phase = 2 pi (x_row y_row + x_col y_col) / P. Either input may be null.
void transform(const DenseTensor* in_c, double wc, const DenseTensor* in_s, double ws, double scale,
               DenseTensor& out) {
  const std::size_t pixels = out.dim(0);
  const std::size_t channels = out.dim(1);
  const std::size_t side = square_side(pixels);
  const Twiddles tw = make_twiddles(side);
  std::vector<double> acc(channels);
  for (std::size_t x = 0; x < pixels; ++x) {
    const std::size_t xr = x / side;
    const std::size_t xc = x % side;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t y = 0; y < pixels; ++y) {
      const std::size_t m = (xr * (y / side) + xc * (y % side)) % side;
      const double c = wc * tw.cos_table[m];
      const double s = ws * tw.sin_table[m];
      for (std::size_t ch = 0; ch < channels; ++ch) {
        double term = 0.0;
        if (in_c) term += c * (*in_c)(y, ch);
        if (in_s) term += s * (*in_s)(y, ch);
        acc[ch] += term;
      }
    }
    for (std::size_t ch = 0; ch < channels; ++ch) out(x, ch) = scale * acc[ch];
  }
}

}  // namespace

ComplexField dft2(const DenseTensor& field) {
  check_field(field, "dft2");
  ComplexField out{DenseTensor(field.shape()), DenseTensor(field.shape())};
  transform(&field, 1.0, nullptr, 0.0, 1.0, out.re);
  transform(nullptr, 0.0, &field, -1.0, 1.0, out.im);
  return out;
}

DenseTensor idft2(const ComplexField& spectrum) {
  check_field(spectrum.re, "idft2");
  if (!spectrum.re.same_shape(spectrum.im)) {
    throw ShapeError("idft2: real part " + spectrum.re.shape_string() +
                     " and imaginary part " + spectrum.im.shape_string() + " differ");
  }
  DenseTensor out(spectrum.re.shape());
  const double scale = 1.0 / static_cast<double>(spectrum.re.dim(0));
  transform(&spectrum.re, 1.0, &spectrum.im, -1.0, scale, out);
  return out;
}

DenseTensor dft2_adjoint(const ComplexField& d_spectrum) {
  check_field(d_spectrum.re, "dft2 adjoint");
  if (!d_spectrum.re.same_shape(d_spectrum.im)) throw ShapeError("dft2 adjoint: shape mismatch");
  DenseTensor out(d_spectrum.re.shape());
  transform(&d_spectrum.re, 1.0, &d_spectrum.im, -1.0, 1.0, out);
  return out;
}

ComplexField idft2_adjoint(const DenseTensor& d_field) {
  check_field(d_field, "idft2 adjoint");
  const double scale = 1.0 / static_cast<double>(d_field.dim(0));
  ComplexField out{DenseTensor(d_field.shape()), DenseTensor(d_field.shape())};
  transform(&d_field, 1.0, nullptr, 0.0, scale, out.re);
  transform(nullptr, 0.0, &d_field, -1.0, scale, out.im);
  return out;
}

FrequencyAggregator::FrequencyAggregator(std::size_t latent_dim, NeighborhoodConfig neighborhood,
                                         SplineGrid grid)
    : sia_re(latent_dim, neighborhood, grid), sia_im(latent_dim, neighborhood, grid) {}

void FrequencyAggregator::initialize(Rng& rng) {
  sia_re.initialize(rng);
  sia_im.initialize(rng);
}

void FrequencyAggregator::collect_parameters(std::string_view prefix,
                                             std::vector<NamedParameter>& out) {
  const std::string p(prefix);
  sia_re.collect_parameters(p + ".sia_re", out);
  sia_im.collect_parameters(p + ".sia_im", out);
}

void FrequencyAggregator::zero_grad() {
  sia_re.zero_grad();
  sia_im.zero_grad();
}

DenseTensor freq_aggregate(const SiaUnit& re_unit, const SiaUnit& im_unit, const DenseTensor& f_hsi,
                           const DenseTensor& f_lidar, FrequencyAggregator::Cache* cache) {
  if (!f_hsi.same_shape(f_lidar)) {
    throw ShapeError("freq_aggregate: " + f_hsi.shape_string() + " vs " + f_lidar.shape_string());
  }
  const ComplexField hsi = dft2(f_hsi);
  const ComplexField lidar = dft2(f_lidar);
  ComplexField fused;
  fused.re = sia_forward(re_unit, hsi.re, lidar.re, cache ? &cache->re : nullptr);
  fused.im = sia_forward(im_unit, hsi.im, lidar.im, cache ? &cache->im : nullptr);
  return idft2(fused);
}

std::pair<DenseTensor, DenseTensor> freq_aggregate_backward(SiaUnit& re_unit, SiaUnit& im_unit,
                                                            const FrequencyAggregator::Cache& cache,
                                                            const DenseTensor& d_out) {
  const ComplexField d_fused = idft2_adjoint(d_out);
  auto [d_hsi_re, d_lidar_re] = sia_backward(re_unit, cache.re, d_fused.re);
  auto [d_hsi_im, d_lidar_im] = sia_backward(im_unit, cache.im, d_fused.im);
  DenseTensor d_hsi = dft2_adjoint({std::move(d_hsi_re), std::move(d_hsi_im)});
  DenseTensor d_lidar = dft2_adjoint({std::move(d_lidar_re), std::move(d_lidar_im)});
  return {std::move(d_hsi), std::move(d_lidar)};
}

}  // namespace ifgnet

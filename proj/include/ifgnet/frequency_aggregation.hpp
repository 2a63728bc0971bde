#pragma once

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "ifgnet/spatial_aggregation.hpp"
#include "ifgnet/tensor.hpp"

namespace ifgnet {

// Real and imaginary parts of a per-channel 2D spectrum, each (P^2, D) with
// rows indexed row-major by frequency (u, v).
struct ComplexField {
  DenseTensor re;
  DenseTensor im;
};

// Unnormalized forward DFT per channel:
//   H(u,v) = sum_{a,b} h(a,b) exp(-2 pi i (u a + v b) / P).
ComplexField dft2(const DenseTensor& field);

// 1/P^2-normalized inverse DFT; returns the real part only.
DenseTensor idft2(const ComplexField& spectrum);

// Adjoints of the two transforms above, used by the backward pass.
DenseTensor dft2_adjoint(const ComplexField& d_spectrum);
ComplexField idft2_adjoint(const DenseTensor& d_field);

// Component-wise implicit aggregation in the frequency domain: one SIA pass
// over the real parts, one over the imaginary parts, neighborhoods taken on
// the (u, v) index grid.
class FrequencyAggregator {
 public:
  struct Cache {
    SiaUnit::Cache re;
    SiaUnit::Cache im;
  };

  FrequencyAggregator() = default;
  FrequencyAggregator(std::size_t latent_dim, NeighborhoodConfig neighborhood, SplineGrid grid);

  void initialize(Rng& rng);

  SiaUnit sia_re;
  SiaUnit sia_im;

  void collect_parameters(std::string_view prefix, std::vector<NamedParameter>& out);
  void zero_grad();
};

// Explicit-unit form; both units may be the same object (weight sharing).
DenseTensor freq_aggregate(const SiaUnit& re_unit, const SiaUnit& im_unit, const DenseTensor& f_hsi,
                           const DenseTensor& f_lidar, FrequencyAggregator::Cache* cache = nullptr);
std::pair<DenseTensor, DenseTensor> freq_aggregate_backward(SiaUnit& re_unit, SiaUnit& im_unit,
                                                            const FrequencyAggregator::Cache& cache,
                                                            const DenseTensor& d_out);

inline DenseTensor freq_aggregate(const FrequencyAggregator& agg, const DenseTensor& f_hsi,
                                  const DenseTensor& f_lidar,
                                  FrequencyAggregator::Cache* cache = nullptr) {
  return freq_aggregate(agg.sia_re, agg.sia_im, f_hsi, f_lidar, cache);
}

inline std::pair<DenseTensor, DenseTensor> freq_aggregate_backward(
    FrequencyAggregator& agg, const FrequencyAggregator::Cache& cache, const DenseTensor& d_out) {
  return freq_aggregate_backward(agg.sia_re, agg.sia_im, cache, d_out);
}

}  // namespace ifgnet

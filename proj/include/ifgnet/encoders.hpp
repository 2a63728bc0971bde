#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ifgnet/spline_kan.hpp"
#include "ifgnet/tensor.hpp"

namespace ifgnet {

enum class Modality { kHsi, kLidar };

// Two stacked KAN layers (channels -> D -> D) applied to every pixel of a
// patch independently.
class KanEncoder {
 public:
  struct Cache {
    KanLayer::Cache first;
    KanLayer::Cache second;
  };

  KanEncoder() = default;
  KanEncoder(Modality modality, std::size_t channels, std::size_t latent_dim, SplineGrid grid);

  void initialize(Rng& rng);

  Modality modality() const { return modality_; }
  std::size_t channels() const { return first_.in_dim(); }
  std::size_t latent_dim() const { return second_.out_dim(); }

  // (P^2, channels) -> (P^2, D)
  DenseTensor encode(const DenseTensor& patch) const;
  DenseTensor encode(const DenseTensor& patch, Cache& cache) const;
  // Returns dL/dpatch; accumulates parameter gradients.
  DenseTensor backward(const Cache& cache, const DenseTensor& d_latent);

  const KanLayer& first() const { return first_; }
  const KanLayer& second() const { return second_; }
  KanLayer& first() { return first_; }
  KanLayer& second() { return second_; }

  void collect_parameters(std::string_view prefix, std::vector<NamedParameter>& out);
  void zero_grad();

 private:
  void check_input(const DenseTensor& patch) const;

  Modality modality_ = Modality::kHsi;
  KanLayer first_;
  KanLayer second_;
};

inline KanEncoder make_hsi_encoder(std::size_t bands, std::size_t latent_dim, SplineGrid grid) {
  return KanEncoder(Modality::kHsi, bands, latent_dim, grid);
}

inline KanEncoder make_lidar_encoder(std::size_t latent_dim, SplineGrid grid) {
  return KanEncoder(Modality::kLidar, 1, latent_dim, grid);
}

}  // namespace ifgnet

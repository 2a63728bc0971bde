#pragma once

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "ifgnet/spline_kan.hpp"
#include "ifgnet/tensor.hpp"

namespace ifgnet {

// Square window of radius r around a query, clipped at the grid border.
// Offsets (q - x_k) are divided by offset_scale.
struct NeighborhoodConfig {
  int radius = 1;
  double offset_scale = 1.0;

  // offset_scale = max(r, 1), so normalized offsets lie in [-1, 1].
  static NeighborhoodConfig with_radius(int radius);
  void validate() const;
  int window() const { return 2 * radius + 1; }
};

struct Neighbor {
  int row = 0;
  int col = 0;
  std::size_t index = 0;  // row-major position in the patch
  double d_row = 0.0;     // (q - x_k) / offset_scale
  double d_col = 0.0;
};

// Row-major enumeration of the clipped window around (q_row, q_col).
std::vector<Neighbor> neighborhood(int q_row, int q_col, int side, const NeighborhoodConfig& cfg);

// Row-major neighbor lists for every query of a side x side grid.
std::vector<std::vector<Neighbor>> all_neighborhoods(int side, const NeighborhoodConfig& cfg);

// Implicit aggregation operator. One KAN maps
// [f_a(x_k) | f_b(q) | (q - x_k)] (width 2D + 2) to D candidate channels plus
// one unnormalized weight; weights are softmax-normalized over N(q) and the
// candidates summed.
class SiaUnit {
 public:
  struct Cache {
    std::size_t side = 0;
    std::size_t dim = 0;
    std::vector<std::vector<Neighbor>> neighbors;
    KanLayer::Cache kan_a;
    KanLayer::Cache kan_b;
    KanLayer::Cache kan_offset;
    // Per (query, neighbor) pair, flattened in query order.
    std::vector<double> candidates;  // pairs x (D + 1)
    std::vector<double> alpha;       // pairs
    std::vector<std::size_t> pair_begin;  // query -> first pair
    DenseTensor output;
  };

  SiaUnit() = default;
  SiaUnit(std::size_t latent_dim, NeighborhoodConfig neighborhood, SplineGrid grid);

  void initialize(Rng& rng);

  std::size_t latent_dim() const { return latent_dim_; }
  const NeighborhoodConfig& neighborhood_config() const { return neighborhood_; }
  const KanLayer& kan() const { return kan_; }
  KanLayer& kan() { return kan_; }

  void collect_parameters(std::string_view prefix, std::vector<NamedParameter>& out);
  void zero_grad() { kan_.zero_grad(); }

 private:
  std::size_t latent_dim_ = 0;
  NeighborhoodConfig neighborhood_;
  KanLayer kan_;
};

// F_a plays the role of the HSI latent (sampled at neighbors), F_b the LiDAR
// guidance (taken at the query). Both (P^2, D).
DenseTensor sia_forward(const SiaUnit& unit, const DenseTensor& f_a, const DenseTensor& f_b,
                        SiaUnit::Cache* cache = nullptr);

// Same operator over caller-supplied neighbor lists (one per query).
DenseTensor sia_aggregate(const SiaUnit& unit, const DenseTensor& f_a, const DenseTensor& f_b,
                          std::vector<std::vector<Neighbor>> neighbors,
                          SiaUnit::Cache* cache = nullptr);

// Returns (dL/dF_a, dL/dF_b) and accumulates gradients into the unit.
std::pair<DenseTensor, DenseTensor> sia_backward(SiaUnit& unit, const SiaUnit::Cache& cache,
                                                 const DenseTensor& d_out);

// Side length of a square patch with `pixels` positions; throws ShapeError
// if `pixels` is not a perfect square.
std::size_t square_side(std::size_t pixels);

}  // namespace ifgnet

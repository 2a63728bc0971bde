#include "ifgnet/spatial_aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ifgnet/error.hpp"

namespace ifgnet {

NeighborhoodConfig NeighborhoodConfig::with_radius(int radius) {
  NeighborhoodConfig cfg{radius, static_cast<double>(std::max(radius, 1))};
  cfg.validate();
  return cfg;
}

void NeighborhoodConfig::validate() const {
  if (radius < 0) throw ConfigError("neighborhood radius must be non-negative");
  if (!(offset_scale > 0.0) || !std::isfinite(offset_scale)) {
    throw ConfigError("neighborhood offset_scale must be positive");
  }
}

std::vector<Neighbor> neighborhood(int q_row, int q_col, int side, const NeighborhoodConfig& cfg) {
  std::vector<Neighbor> out;
  out.reserve(static_cast<std::size_t>(cfg.window() * cfg.window()));
  for (int r = q_row - cfg.radius; r <= q_row + cfg.radius; ++r) {
    if (r < 0 || r >= side) continue;
    for (int c = q_col - cfg.radius; c <= q_col + cfg.radius; ++c) {
      if (c < 0 || c >= side) continue;
      out.push_back(Neighbor{r, c, static_cast<std::size_t>(r * side + c),
                             (q_row - r) / cfg.offset_scale, (q_col - c) / cfg.offset_scale});
    }
  }
  return out;
}

std::vector<std::vector<Neighbor>> all_neighborhoods(int side, const NeighborhoodConfig& cfg) {
  std::vector<std::vector<Neighbor>> lists;
  lists.reserve(static_cast<std::size_t>(side * side));
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) lists.push_back(neighborhood(r, c, side, cfg));
  }
  return lists;
}

std::size_t square_side(std::size_t pixels) {
  auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(pixels))));
  if (pixels == 0 || side * side != pixels) {
    throw ShapeError("pixel count " + std::to_string(pixels) + " is not a square grid");
  }
  return side;
}

SiaUnit::SiaUnit(std::size_t latent_dim, NeighborhoodConfig neighborhood, SplineGrid grid)
    : latent_dim_(latent_dim),
      neighborhood_(neighborhood),
      kan_(2 * latent_dim + 2, latent_dim + 1, grid) {
  neighborhood_.validate();
}

void SiaUnit::initialize(Rng& rng) { kan_.initialize(rng); }

void SiaUnit::collect_parameters(std::string_view prefix, std::vector<NamedParameter>& out) {
  kan_.collect_parameters(std::string(prefix) + ".kan", out);
}

namespace {

void check_fields(const SiaUnit& unit, const DenseTensor& f_a, const DenseTensor& f_b) {
  const std::size_t d = unit.latent_dim();
  if (f_a.rank() != 2 || f_a.dim(1) != d || !f_a.same_shape(f_b)) {
    throw ShapeError("sia: expected two (P^2, " + std::to_string(d) + ") fields, got " +
                     f_a.shape_string() + " and " + f_b.shape_string());
  }
}

// Slot of an integer offset inside the (2r+1)^2 window.
std::size_t offset_slot(int d_row, int d_col, int radius) {
  return static_cast<std::size_t>((d_row + radius) * (2 * radius + 1) + (d_col + radius));
}

}  // namespace

DenseTensor sia_forward(const SiaUnit& unit, const DenseTensor& f_a, const DenseTensor& f_b,
                        SiaUnit::Cache* cache) {
  check_fields(unit, f_a, f_b);
  const int side = static_cast<int>(square_side(f_a.dim(0)));
  return sia_aggregate(unit, f_a, f_b, all_neighborhoods(side, unit.neighborhood_config()), cache);
}

DenseTensor sia_aggregate(const SiaUnit& unit, const DenseTensor& f_a, const DenseTensor& f_b,
                          std::vector<std::vector<Neighbor>> neighbors, SiaUnit::Cache* cache) {
  check_fields(unit, f_a, f_b);
  const std::size_t d = unit.latent_dim();
  const std::size_t pixels = f_a.dim(0);
  const int side = static_cast<int>(square_side(pixels));
  const NeighborhoodConfig& nb = unit.neighborhood_config();
  const int radius = nb.radius;
  const int window = nb.window();
  if (neighbors.size() != pixels) throw ShapeError("sia: need one neighbor list per query");

  // The KAN is a sum of per-input edge functions, so each input block is
  // evaluated once per pixel (or per offset) instead of once per pair.
  DenseTensor offsets({static_cast<std::size_t>(window * window), 2});
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      const std::size_t slot = offset_slot(dr, dc, radius);
      offsets(slot, 0) = dr / nb.offset_scale;
      offsets(slot, 1) = dc / nb.offset_scale;
    }
  }

  SiaUnit::Cache local;
  SiaUnit::Cache& c = cache ? *cache : local;
  const KanLayer& kan = unit.kan();
  const DenseTensor part_a = cache ? kan.forward_columns(f_a, 0, c.kan_a) : kan.forward_columns(f_a, 0);
  const DenseTensor part_b = cache ? kan.forward_columns(f_b, d, c.kan_b) : kan.forward_columns(f_b, d);
  const DenseTensor part_o =
      cache ? kan.forward_columns(offsets, 2 * d, c.kan_offset) : kan.forward_columns(offsets, 2 * d);

  const std::size_t width = d + 1;
  c.side = static_cast<std::size_t>(side);
  c.dim = d;
  c.pair_begin.assign(pixels + 1, 0);
  for (std::size_t q = 0; q < pixels; ++q) {
    if (neighbors[q].empty()) throw ShapeError("sia: empty neighborhood");
    c.pair_begin[q + 1] = c.pair_begin[q] + neighbors[q].size();
  }
  const std::size_t pairs = c.pair_begin[pixels];
  c.candidates.assign(pairs * width, 0.0);
  c.alpha.assign(pairs, 0.0);

  DenseTensor out({pixels, d});
  for (std::size_t q = 0; q < pixels; ++q) {
    const int q_row = static_cast<int>(q) / side;
    const int q_col = static_cast<int>(q) % side;
    const std::size_t begin = c.pair_begin[q];
    const auto& list = neighbors[q];
    for (std::size_t k = 0; k < list.size(); ++k) {
      const Neighbor& nbr = list[k];
      if (nbr.index >= pixels) throw ShapeError("sia: neighbor outside the patch");
      const int d_row = q_row - nbr.row;
      const int d_col = q_col - nbr.col;
      if (std::abs(d_row) > radius || std::abs(d_col) > radius) {
        throw ShapeError("sia: neighbor outside the configured window");
      }
      const std::size_t slot = offset_slot(d_row, d_col, radius);
      double* v = &c.candidates[(begin + k) * width];
      for (std::size_t j = 0; j < width; ++j) {
        v[j] = part_a(nbr.index, j) + part_b(q, j) + part_o(slot, j);
      }
      c.alpha[begin + k] = v[d];
    }
    softmax_inplace(std::span<double>(c.alpha).subspan(begin, list.size()));
    for (std::size_t k = 0; k < list.size(); ++k) {
      const double a = c.alpha[begin + k];
      const double* v = &c.candidates[(begin + k) * width];
      for (std::size_t j = 0; j < d; ++j) out(q, j) += a * v[j];
    }
  }
  c.neighbors = std::move(neighbors);
  if (cache) c.output = out;
  return out;
}

std::pair<DenseTensor, DenseTensor> sia_backward(SiaUnit& unit, const SiaUnit::Cache& cache,
                                                 const DenseTensor& d_out) {
  const std::size_t d = unit.latent_dim();
  const std::size_t pixels = cache.side * cache.side;
  if (cache.dim != d || cache.neighbors.size() != pixels || d_out.rank() != 2 ||
      d_out.dim(0) != pixels || d_out.dim(1) != d || !cache.output.same_shape(d_out)) {
    throw ShapeError("sia backward: cache/gradient mismatch (d_out " + d_out.shape_string() + ")");
  }
  const int side = static_cast<int>(cache.side);
  const int radius = unit.neighborhood_config().radius;
  const int window = unit.neighborhood_config().window();
  const std::size_t width = d + 1;

  DenseTensor d_part_a({pixels, width});
  DenseTensor d_part_b({pixels, width});
  DenseTensor d_part_o({static_cast<std::size_t>(window * window), width});
  for (std::size_t q = 0; q < pixels; ++q) {
    const int q_row = static_cast<int>(q) / side;
    const int q_col = static_cast<int>(q) % side;
    const auto g = d_out.row(q);
    double out_dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) out_dot += cache.output(q, j) * g[j];
    const std::size_t begin = cache.pair_begin[q];
    const auto& list = cache.neighbors[q];
    for (std::size_t k = 0; k < list.size(); ++k) {
      const Neighbor& nbr = list[k];
      const double a = cache.alpha[begin + k];
      const double* v = &cache.candidates[(begin + k) * width];
      double cand_dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) cand_dot += v[j] * g[j];
      const double d_logit = a * (cand_dot - out_dot);
      const std::size_t slot = offset_slot(q_row - nbr.row, q_col - nbr.col, radius);
      for (std::size_t j = 0; j < d; ++j) {
        const double dv = a * g[j];
        d_part_a(nbr.index, j) += dv;
        d_part_b(q, j) += dv;
        d_part_o(slot, j) += dv;
      }
      d_part_a(nbr.index, d) += d_logit;
      d_part_b(q, d) += d_logit;
      d_part_o(slot, d) += d_logit;
    }
  }

  KanLayer& kan = unit.kan();
  DenseTensor d_a = kan.backward(cache.kan_a, d_part_a);
  DenseTensor d_b = kan.backward(cache.kan_b, d_part_b);
  kan.backward(cache.kan_offset, d_part_o);
  return {std::move(d_a), std::move(d_b)};
}

}  // namespace ifgnet

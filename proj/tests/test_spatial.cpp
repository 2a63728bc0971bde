#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ifgnet/error.hpp"
#include "ifgnet/spatial_aggregation.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ifgnet;

namespace {

SiaUnit random_unit(std::size_t d, int radius, Rng& rng) {
  SiaUnit unit(d, NeighborhoodConfig::with_radius(radius), SplineGrid{});
  unit.initialize(rng);
  for (double& s : unit.kan().scale_spline.value.data()) s = rng.uniform(0.5, 1.5);
  return unit;
}

double weighted(const DenseTensor& w, const DenseTensor& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
  return s;
}

}  // namespace

TEST_CASE("neighborhood enumeration") {
  const auto cfg = NeighborhoodConfig::with_radius(1);
  CHECK(cfg.offset_scale == 1.0);
  const auto inner = neighborhood(2, 2, 5, cfg);
  REQUIRE(inner.size() == 9);
  CHECK(inner[0].row == 1);
  CHECK(inner[0].col == 1);
  CHECK(inner[0].d_row == 1.0);
  CHECK(inner[0].d_col == 1.0);
  CHECK(inner[4].index == 12);
  CHECK(inner[4].d_row == 0.0);
  for (const auto& n : inner) {
    CHECK(std::abs(n.d_row) <= 1.0);
    CHECK(std::abs(n.d_col) <= 1.0);
  }
  CHECK(neighborhood(0, 0, 5, cfg).size() == 4);
  CHECK(neighborhood(0, 2, 5, cfg).size() == 6);
  for (int r : {0, 1, 3}) {
    const auto one = neighborhood(0, 0, 1, NeighborhoodConfig::with_radius(r));
    REQUIRE(one.size() == 1);
    CHECK(one[0].d_row == 0.0);
    CHECK(one[0].d_col == 0.0);
  }
  const auto r2 = NeighborhoodConfig::with_radius(2);
  CHECK(r2.offset_scale == 2.0);
  CHECK(neighborhood(2, 2, 5, r2).size() == 25);
  CHECK_THROWS_AS(NeighborhoodConfig::with_radius(-1), ConfigError);
}

TEST_CASE("sia matches the brute-force loop oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const int side = 1 + static_cast<int>(rng.below(5));
    const std::size_t d = 1 + rng.below(8);
    const int radius = static_cast<int>(rng.below(3));
    SiaUnit unit = random_unit(d, radius, rng);
    const auto px = static_cast<std::size_t>(side * side);
    DenseTensor f_a = testutil::random_tensor({px, d}, rng);
    DenseTensor f_b = testutil::random_tensor({px, d}, rng);
    const DenseTensor got = sia_forward(unit, f_a, f_b);
    const DenseTensor want = oracle::oracle_sia(unit.kan(), f_a, f_b, side, radius,
                                                unit.neighborhood_config().offset_scale);
    CHECK(testutil::max_abs_diff(got, want) <= 1e-12);
  }
}

TEST_CASE("constant weight channel gives the mean of candidates") {
  Rng rng(5);
  const std::size_t d = 3;
  SiaUnit unit = random_unit(d, 1, rng);
  KanLayer& kan = unit.kan();
  // Zero every edge into the weight output.
  for (std::size_t i = 0; i < kan.in_dim(); ++i) {
    kan.base_weight.value(d, i) = 0.0;
    kan.scale_spline.value(d, i) = 0.0;
  }
  DenseTensor f_a = testutil::random_tensor({9, d}, rng);
  DenseTensor f_b = testutil::random_tensor({9, d}, rng);
  SiaUnit::Cache cache;
  const DenseTensor out = sia_forward(unit, f_a, f_b, &cache);
  for (int q = 0; q < 9; ++q) {
    const auto nbrs = neighborhood(q / 3, q % 3, 3, unit.neighborhood_config());
    for (std::size_t ch = 0; ch < d; ++ch) {
      double mean = 0.0;
      for (const auto& n : nbrs) {
        DenseTensor in({1, 2 * d + 2});
        for (std::size_t c = 0; c < d; ++c) {
          in(0, c) = f_a(n.index, c);
          in(0, d + c) = f_b(static_cast<std::size_t>(q), c);
        }
        in(0, 2 * d) = n.d_row;
        in(0, 2 * d + 1) = n.d_col;
        mean += kan.forward(in)(0, ch);
      }
      mean /= static_cast<double>(nbrs.size());
      CHECK(out(static_cast<std::size_t>(q), ch) == doctest::Approx(mean).epsilon(1e-12));
    }
  }
}

TEST_CASE("softmax weights sum to one per query") {
  Rng rng(6);
  SiaUnit unit = random_unit(4, 1, rng);
  SiaUnit::Cache cache;
  sia_forward(unit, testutil::random_tensor({25, 4}, rng), testutil::random_tensor({25, 4}, rng),
              &cache);
  REQUIRE(cache.pair_begin.size() == 26);
  for (std::size_t q = 0; q + 1 < cache.pair_begin.size(); ++q) {
    double sum = 0.0;
    for (std::size_t p = cache.pair_begin[q]; p < cache.pair_begin[q + 1]; ++p) sum += cache.alpha[p];
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("radius zero is a pointwise transform") {
  Rng rng(7);
  const std::size_t d = 3;
  SiaUnit unit = random_unit(d, 0, rng);
  DenseTensor f_a = testutil::random_tensor({9, d}, rng);
  DenseTensor f_b = testutil::random_tensor({9, d}, rng);
  const DenseTensor out = sia_forward(unit, f_a, f_b);
  for (std::size_t q = 0; q < 9; ++q) {
    DenseTensor in({1, 2 * d + 2});
    for (std::size_t c = 0; c < d; ++c) {
      in(0, c) = f_a(q, c);
      in(0, d + c) = f_b(q, c);
    }
    const DenseTensor y = unit.kan().forward(in);
    for (std::size_t c = 0; c < d; ++c) CHECK(std::abs(out(q, c) - y(0, c)) <= 1e-12);
  }
}

TEST_CASE("output does not depend on neighbor enumeration order") {
  Rng rng(8);
  SiaUnit unit = random_unit(4, 1, rng);
  DenseTensor f_a = testutil::random_tensor({16, 4}, rng);
  DenseTensor f_b = testutil::random_tensor({16, 4}, rng);
  auto lists = all_neighborhoods(4, unit.neighborhood_config());
  const DenseTensor base = sia_aggregate(unit, f_a, f_b, lists);
  CHECK(testutil::max_abs_diff(base, sia_forward(unit, f_a, f_b)) == 0.0);
  for (auto& l : lists) {
    std::reverse(l.begin(), l.end());
    std::rotate(l.begin(), l.begin() + static_cast<long>(l.size() / 2), l.end());
  }
  CHECK(testutil::max_abs_diff(base, sia_aggregate(unit, f_a, f_b, lists)) <= 1e-12);
}

TEST_CASE("sia input validation") {
  Rng rng(9);
  SiaUnit unit = random_unit(2, 1, rng);
  CHECK_THROWS_AS(sia_forward(unit, DenseTensor({9, 2}), DenseTensor({9, 3})), ShapeError);
  CHECK_THROWS_AS(sia_forward(unit, DenseTensor({8, 2}), DenseTensor({8, 2})), ShapeError);
  CHECK_THROWS_AS(square_side(10), ShapeError);
  CHECK(square_side(49) == 7);
}

TEST_CASE("sia backward") {
  Rng rng(10);
  const std::size_t d = 2;
  SiaUnit unit = random_unit(d, 1, rng);
  DenseTensor f_a = testutil::random_tensor({9, d}, rng);
  DenseTensor f_b = testutil::random_tensor({9, d}, rng);
  SiaUnit::Cache cache;
  sia_forward(unit, f_a, f_b, &cache);

  SUBCASE("zero upstream gradient") {
    unit.zero_grad();
    auto [da, db] = sia_backward(unit, cache, DenseTensor({9, d}));
    for (double v : da.data()) CHECK(v == 0.0);
    for (double v : db.data()) CHECK(v == 0.0);
  }
  SUBCASE("finite differences on inputs and parameters") {
    const DenseTensor w = testutil::random_tensor({9, d}, rng);
    unit.zero_grad();
    auto [da, db] = sia_backward(unit, cache, w);
    const double h = 1e-5;
    auto worst = [&](std::span<double> slots, std::span<const double> analytic) {
      double e = 0.0;
      for (std::size_t i = 0; i < slots.size(); ++i) {
        const double orig = slots[i];
        slots[i] = orig + h;
        const double up = weighted(w, sia_forward(unit, f_a, f_b));
        slots[i] = orig - h;
        const double down = weighted(w, sia_forward(unit, f_a, f_b));
        slots[i] = orig;
        const double n = (up - down) / (2 * h);
        e = std::max(e, std::abs(analytic[i] - n) / std::max({std::abs(analytic[i]), std::abs(n), 1e-3}));
      }
      return e;
    };
    CHECK(worst(f_a.data(), da.data()) <= 1e-5);
    CHECK(worst(f_b.data(), db.data()) <= 1e-5);
    std::vector<NamedParameter> params;
    unit.collect_parameters("sia", params);
    for (auto& np : params) {
      const DenseTensor g = np.param->grad;
      CHECK_MESSAGE(worst(np.param->value.data(), g.data()) <= 1e-5, np.name);
    }
  }
  SUBCASE("mismatched upstream gradient") {
    CHECK_THROWS_AS(sia_backward(unit, cache, DenseTensor({9, d + 1})), ShapeError);
  }
}

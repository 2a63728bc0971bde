#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <set>

#include "doctest.h"
#include "ifgnet/data.hpp"
#include "ifgnet/error.hpp"
#include "test_util.hpp"

using namespace ifgnet;

namespace {

SceneCube numbered_scene(std::size_t h, std::size_t w, std::size_t t) {
  SceneCube s;
  s.height = h;
  s.width = w;
  s.bands = t;
  s.hsi.resize(h * w * t);
  s.lidar.resize(h * w);
  s.labels.resize(h * w);
  for (std::size_t p = 0; p < h * w; ++p) {
    for (std::size_t b = 0; b < t; ++b) s.hsi[p * t + b] = static_cast<double>(p + 1) + 0.25 * b;
    s.lidar[p] = -static_cast<double>(p);
    s.labels[p] = static_cast<std::uint16_t>(1 + p % 2);
  }
  return s;
}

std::vector<char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void put_bytes(const std::filesystem::path& p, const std::vector<char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("cube and label files round trip") {
  testutil::TempDir dir("io");
  CubeFile c{2, 3, 2, {1.5, -2.0, 0.0, 3.25, 1e-3, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0}};
  write_cube(dir / "c.ifgc", c);
  const auto bytes = file_bytes(dir / "c.ifgc");
  REQUIRE(bytes.size() == 20 + 12 * 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "IFGC");
  CHECK(bytes[4] == 1);  // little-endian version
  const CubeFile back = read_cube(dir / "c.ifgc");
  CHECK(back.height == 2);
  CHECK(back.channels == 2);
  for (std::size_t i = 0; i < c.data.size(); ++i) {
    CHECK(back.data[i] == static_cast<double>(static_cast<float>(c.data[i])));
  }

  LabelFile l{2, 2, {0, 1, 65535, 2}};
  write_labels(dir / "l.ifgl", l);
  CHECK(read_labels(dir / "l.ifgl").labels == l.labels);

  SUBCASE("bad magic") {
    auto b = bytes;
    b[1] = 'Z';
    put_bytes(dir / "bad.ifgc", b);
    CHECK_THROWS_AS(read_cube(dir / "bad.ifgc"), FormatError);
    CHECK_THROWS_AS(read_labels(dir / "c.ifgc"), FormatError);
  }
  SUBCASE("truncated and trailing bytes") {
    auto b = bytes;
    b.pop_back();
    put_bytes(dir / "short.ifgc", b);
    CHECK_THROWS_AS(read_cube(dir / "short.ifgc"), FormatError);
    b = bytes;
    b.push_back(0);
    put_bytes(dir / "long.ifgc", b);
    CHECK_THROWS_AS(read_cube(dir / "long.ifgc"), FormatError);
  }
  SUBCASE("version") {
    auto b = bytes;
    b[4] = 2;
    put_bytes(dir / "v2.ifgc", b);
    CHECK_THROWS_AS(read_cube(dir / "v2.ifgc"), FormatError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(read_cube(dir / "none.ifgc"), FormatError); }
}

TEST_CASE("load_scene validates the three rasters") {
  testutil::TempDir dir("scene");
  SceneCube s = numbered_scene(8, 8, 4);
  const ScenePaths paths = write_scene(s, dir.path());
  const SceneCube back = load_scene(paths.hsi, paths.lidar, paths.labels);
  CHECK(back.height == 8);
  CHECK(back.width == 8);
  CHECK(back.bands == 4);
  CHECK(back.num_classes() == 2);
  CHECK(back.hsi == s.hsi);

  CubeFile narrow{8, 7, 1, std::vector<double>(56, 0.0)};
  write_cube(dir / "narrow.ifgc", narrow);
  CHECK_THROWS_AS(load_scene(paths.hsi, dir / "narrow.ifgc", paths.labels), ShapeError);
  LabelFile small{7, 8, std::vector<std::uint16_t>(56, 1)};
  write_labels(dir / "small.ifgl", small);
  CHECK_THROWS_AS(load_scene(paths.hsi, paths.lidar, dir / "small.ifgl"), ShapeError);
  CubeFile nan{8, 8, 1, std::vector<double>(64, 0.0)};
  nan.data[5] = std::nan("");
  write_cube(dir / "nan.ifgc", nan);
  CHECK_THROWS_AS(load_scene(paths.hsi, dir / "nan.ifgc", paths.labels), NonFiniteError);
}

TEST_CASE("standardization uses train pixels only") {
  SynthSpec spec;
  spec.height = spec.width = 16;
  spec.seed = 2;
  SceneCube s = synth_scene(spec);
  std::vector<std::size_t> train;
  for (std::size_t p = 0; p < s.pixels(); p += 3) train.push_back(p);
  const BandStats stats = compute_band_stats(s, train);

  // Recompute from the train pixels by hand.
  for (std::size_t b = 0; b < s.bands; ++b) {
    double m = 0.0;
    for (std::size_t p : train) m += s.hsi[p * s.bands + b];
    m /= static_cast<double>(train.size());
    double v = 0.0;
    for (std::size_t p : train) v += (s.hsi[p * s.bands + b] - m) * (s.hsi[p * s.bands + b] - m);
    v /= static_cast<double>(train.size());
    CHECK(stats.hsi_mean[b] == doctest::Approx(m).epsilon(1e-12));
    CHECK(stats.hsi_std[b] == doctest::Approx(std::sqrt(v)).epsilon(1e-12));
  }
  CHECK(BandStats::from_text(stats.to_text()) == stats);

  standardize(s, stats);
  for (std::size_t b = 0; b < s.bands; ++b) {
    double m = 0.0, sq = 0.0;
    for (std::size_t p : train) {
      m += s.hsi[p * s.bands + b];
      sq += s.hsi[p * s.bands + b] * s.hsi[p * s.bands + b];
    }
    m /= static_cast<double>(train.size());
    sq /= static_cast<double>(train.size());
    CHECK(std::abs(m) <= 1e-10);
    CHECK(std::abs(sq - m * m - 1.0) <= 1e-10);
  }
  double lm = 0.0;
  for (std::size_t p : train) lm += s.lidar[p];
  CHECK(std::abs(lm / static_cast<double>(train.size())) <= 1e-10);

  SceneCube flat = numbered_scene(4, 4, 2);
  for (double& v : flat.lidar) v = 3.0;
  const BandStats fs = compute_band_stats(flat, {0, 1, 2});
  CHECK(fs.lidar_std == 1.0);
  CHECK_THROWS_AS(compute_band_stats(flat, {}), ConfigError);
}

TEST_CASE("mirror padding") {
  CHECK(mirror_index(-1, 5) == 1);
  CHECK(mirror_index(-2, 5) == 2);
  CHECK(mirror_index(5, 5) == 3);
  CHECK(mirror_index(6, 5) == 2);
  CHECK(mirror_index(2, 5) == 2);
  CHECK(mirror_index(-3, 1) == 0);

  // 3x3 grid numbered 1..9 row-major; the corner window reflects index -1
  // onto index 1 in both directions.
  SceneCube g;
  g.height = g.width = 3;
  g.bands = 1;
  for (int v = 1; v <= 9; ++v) {
    g.hsi.push_back(v);
    g.lidar.push_back(10 * v);
    g.labels.push_back(1);
  }
  const PatchSample corner = extract_patch(g, 0, 0, 3);
  const std::vector<double> want{5, 4, 5, 2, 1, 2, 5, 4, 5};
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(corner.hsi(i, 0) == want[i]);
    CHECK(corner.lidar(i, 0) == 10 * want[i]);
  }
  const PatchSample inner = extract_patch(g, 1, 1, 3);
  for (std::size_t i = 0; i < 9; ++i) CHECK(inner.hsi(i, 0) == static_cast<double>(i + 1));
  const PatchSample one = extract_patch(g, 2, 1, 1);
  CHECK(one.hsi.size() == 1);
  CHECK(one.hsi(0, 0) == 8.0);
  CHECK(one.label == 0);
}

TEST_CASE("patch extraction contract") {
  SceneCube s = numbered_scene(6, 5, 3);
  s.labels[7] = 0;
  CHECK_THROWS_AS(extract_patch(s, 1, 2, 3), ConfigError);
  CHECK_NOTHROW(extract_window(s, 1, 2, 3));
  CHECK_THROWS_AS(extract_patch(s, 0, 0, 4), ConfigError);
  for (std::size_t r = 0; r < s.height; ++r) {
    for (std::size_t c = 0; c < s.width; ++c) {
      if (s.labels[r * s.width + c] == 0) continue;
      for (int p : {1, 3, 5, 7}) {
        const PatchSample ps = extract_patch(s, r, c, p);
        const auto center = static_cast<std::size_t>((p * p - 1) / 2);
        for (std::size_t b = 0; b < s.bands; ++b) {
          CHECK(ps.hsi(center, b) == s.hsi[(r * s.width + c) * s.bands + b]);
        }
        CHECK(ps.label == s.labels[r * s.width + c] - 1);
      }
    }
  }
}

TEST_CASE("balanced split") {
  SceneCube s;
  s.height = 20;
  s.width = 21;
  s.bands = 1;
  s.hsi.assign(420, 0.0);
  s.lidar.assign(420, 0.0);
  s.labels.assign(420, 0);
  for (std::size_t p = 0; p < 400; ++p) s.labels[p] = static_cast<std::uint16_t>(1 + p % 2);
  SplitSpec spec;
  spec.train_per_class = 150;
  spec.seed = 4;
  const Split a = split_balanced(s, spec);
  CHECK(a.train.size() == 300);
  CHECK(a.test.size() == 100);
  std::set<std::size_t> tr(a.train.begin(), a.train.end());
  for (std::size_t p : a.test) CHECK(tr.count(p) == 0);
  std::size_t class1 = 0;
  for (std::size_t p : a.train) {
    CHECK(s.labels[p] != 0);
    class1 += s.labels[p] == 1;
  }
  CHECK(class1 == 150);
  CHECK(std::is_sorted(a.train.begin(), a.train.end()));

  const Split b = split_balanced(s, spec);
  CHECK(a.train == b.train);
  spec.seed = 5;
  CHECK(split_balanced(s, spec).train != a.train);

  for (std::size_t p = 0; p < 400; ++p) {
    if (s.labels[p] == 2 && p > 200) s.labels[p] = 0;
  }
  spec.train_per_class = 150;
  try {
    split_balanced(s, spec);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("class 2") != std::string::npos);
  }

  SplitSpec mask_spec;
  LabelFile mask{20, 21, std::vector<std::uint16_t>(420, 0)};
  mask.labels[0] = mask.labels[1] = 1;
  mask_spec.train_mask = mask;
  const Split m = split_balanced(s, mask_spec);
  CHECK(m.train == std::vector<std::size_t>{0, 1});
}

TEST_CASE("synthetic scenes are deterministic") {
  testutil::TempDir dir("synth");
  SynthSpec spec;
  spec.height = spec.width = 24;
  spec.seed = 11;
  const SceneCube a = synth_scene(spec);
  const SceneCube b = synth_scene(spec);
  CHECK(a.hsi == b.hsi);
  CHECK(a.lidar == b.lidar);
  CHECK(a.labels == b.labels);
  const auto pa = write_scene(a, dir / "a");
  const auto pb = write_scene(b, dir / "b");
  CHECK(file_bytes(pa.hsi) == file_bytes(pb.hsi));
  CHECK(file_bytes(pa.labels) == file_bytes(pb.labels));
  CHECK(a.num_classes() == 4);
  SynthSpec one = spec;
  one.num_classes = 1;
  CHECK_THROWS_AS(synth_scene(one), ConfigError);
}

TEST_CASE("elevation-only scene is separable by a LiDAR threshold") {
  SynthSpec spec;
  spec.num_classes = 2;
  spec.height = spec.width = 32;
  spec.noise_sigma = 0.0;
  spec.spectral_cue = false;
  spec.texture_cue = false;
  spec.seed = 3;
  const SceneCube s = synth_scene(spec);
  std::size_t correct = 0;
  for (std::size_t p = 0; p < s.pixels(); ++p) {
    const int predicted = s.lidar[p] > 0.5 ? 2 : 1;
    correct += predicted == s.labels[p];
  }
  CHECK(correct == s.pixels());
}

TEST_CASE("texture-only scene: band means carry nothing, spectral peak is exact") {
  SynthSpec spec;
  spec.num_classes = 4;
  spec.height = spec.width = 48;
  spec.noise_sigma = 0.0;
  spec.spectral_cue = false;
  spec.elevation_cue = false;
  spec.seed = 5;
  const SceneCube s = synth_scene(spec);
  const auto t = s.bands;
  const int period = spec.texture_period;
  const auto weights = texture_band_weights(t);

  // Band-mean feature, nearest class centroid.
  std::vector<double> feature(s.pixels());
  double lo = 1e300, hi = -1e300;
  for (std::size_t p = 0; p < s.pixels(); ++p) {
    double m = 0.0;
    for (std::size_t b = 0; b < t; ++b) m += s.hsi[p * t + b];
    feature[p] = m / static_cast<double>(t);
    lo = std::min(lo, feature[p]);
    hi = std::max(hi, feature[p]);
  }
  CHECK(hi - lo < 1e-6);  // float rounding only
  std::vector<double> centroid(4, 0.0), count(4, 0.0);
  for (std::size_t p = 0; p < s.pixels(); ++p) {
    centroid[s.labels[p] - 1] += feature[p];
    count[s.labels[p] - 1] += 1.0;
  }
  for (int c = 0; c < 4; ++c) centroid[c] /= count[c];
  std::size_t mean_correct = 0;
  for (std::size_t p = 0; p < s.pixels(); ++p) {
    int best = 0;
    for (int c = 1; c < 4; ++c) {
      if (std::abs(feature[p] - centroid[c]) < std::abs(feature[p] - centroid[best])) best = c;
    }
    mean_correct += best == s.labels[p] - 1;
  }
  const double mean_acc = static_cast<double>(mean_correct) / static_cast<double>(s.pixels());
  CHECK(mean_acc < 0.25 + 0.10);

  // Peak of the period x period DFT of the texture projection, for every
  // pixel whose window lies inside one region.
  std::size_t judged = 0, peak_correct = 0;
  for (int r = 0; r + period <= static_cast<int>(s.height); ++r) {
    for (int c = 0; c + period <= static_cast<int>(s.width); ++c) {
      const auto label = s.labels[static_cast<std::size_t>(r) * s.width + static_cast<std::size_t>(c)];
      bool uniform = true;
      std::vector<double> proj;
      for (int a = 0; a < period; ++a) {
        for (int b = 0; b < period; ++b) {
          const auto p = static_cast<std::size_t>(r + a) * s.width + static_cast<std::size_t>(c + b);
          uniform &= s.labels[p] == label;
          double v = 0.0;
          for (std::size_t k = 0; k < t; ++k) v += weights[k] * s.hsi[p * t + k];
          proj.push_back(v);
        }
      }
      if (!uniform) continue;
      double best_mag = -1.0;
      int best_u = 0, best_v = 0;
      for (int u = 0; u < period; ++u) {
        for (int v = 0; v < period; ++v) {
          if (u == 0 && v == 0) continue;
          std::complex<double> acc = 0.0;
          for (int a = 0; a < period; ++a) {
            for (int b = 0; b < period; ++b) {
              acc += proj[static_cast<std::size_t>(a * period + b)] *
                     std::polar(1.0, -2.0 * std::numbers::pi * (u * a + v * b) / period);
            }
          }
          if (std::abs(acc) > best_mag + 1e-9) {
            best_mag = std::abs(acc);
            best_u = u;
            best_v = v;
          }
        }
      }
      int predicted = -1;
      for (int k = 0; k < 4; ++k) {
        const TextureFrequency f = texture_frequency(k);
        if ((f.u == best_u && f.v == best_v) ||
            ((period - f.u) % period == best_u && (period - f.v) % period == best_v)) {
          predicted = k;
        }
      }
      ++judged;
      peak_correct += predicted == label - 1;
    }
  }
  CHECK(judged > 500);
  CHECK(peak_correct == judged);
}

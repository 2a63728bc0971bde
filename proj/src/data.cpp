#include "ifgnet/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "byte_io.hpp"
#include "ifgnet/error.hpp"

namespace ifgnet {

namespace {

constexpr std::uint32_t kFormatVersion = 1;

using detail::ByteReader;
using detail::ByteWriter;

ByteReader open_reader(const std::filesystem::path& path) {
  std::vector<char> buf;
  if (!ByteReader::slurp(path, buf)) throw FormatError("cannot open " + path.string());
  return ByteReader(std::move(buf),
                    [name = path.string()] { throw FormatError(name + ": truncated file"); });
}

void save_bytes(const ByteWriter& out, const std::filesystem::path& path) {
  if (!out.save(path)) throw FormatError("failed writing " + path.string());
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw FormatError(std::string(what) + " does not fit in u32");
  }
  return static_cast<std::uint32_t>(v);
}

void read_header(ByteReader& in, const std::filesystem::path& path, const char* expected_magic) {
  if (in.str(4) != expected_magic) {
    throw FormatError(path.string() + ": bad magic, expected " + expected_magic);
  }
  const std::uint32_t version = in.u32();
  if (version != kFormatVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  }
}

std::string join_doubles(const std::vector<double>& values) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << values[i];
  return os.str();
}

std::vector<double> split_doubles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

double class_elevation(int class_index) { return static_cast<double>(class_index); }

}  // namespace

// ---- scene ------------------------------------------------------------------

int SceneCube::num_classes() const {
  std::uint16_t top = 0;
  for (auto l : labels) top = std::max(top, l);
  return top;
}

void SceneCube::validate() const {
  if (height == 0 || width == 0 || bands == 0) throw FormatError("scene: empty dimensions");
  if (hsi.size() != pixels() * bands || lidar.size() != pixels() || labels.size() != pixels()) {
    throw ShapeError("scene: raster sizes disagree with H x W x T");
  }
  for (double v : hsi) {
    if (!std::isfinite(v)) throw NonFiniteError("scene: non-finite HSI value");
  }
  for (double v : lidar) {
    if (!std::isfinite(v)) throw NonFiniteError("scene: non-finite LiDAR value");
  }
}

void write_cube(const std::filesystem::path& path, const CubeFile& cube) {
  if (cube.data.size() != cube.height * cube.width * cube.channels) {
    throw ShapeError("write_cube: data size does not match H x W x C");
  }
  ByteWriter out;
  out.raw("IFGC", 4);
  out.u32(kFormatVersion);
  out.u32(checked_u32(cube.height, "height"));
  out.u32(checked_u32(cube.width, "width"));
  out.u32(checked_u32(cube.channels, "channels"));
  for (double v : cube.data) out.f32(static_cast<float>(v));
  save_bytes(out, path);
}

CubeFile read_cube(const std::filesystem::path& path) {
  ByteReader in = open_reader(path);
  read_header(in, path, "IFGC");
  CubeFile cube;
  cube.height = in.u32();
  cube.width = in.u32();
  cube.channels = in.u32();
  const std::size_t count = cube.height * cube.width * cube.channels;
  in.need(count * 4);
  cube.data.resize(count);
  for (auto& v : cube.data) {
    v = in.f32();
    if (!std::isfinite(v)) throw NonFiniteError(path.string() + ": non-finite value in cube");
  }
  if (!in.at_end()) throw FormatError(path.string() + ": trailing bytes after cube data");
  return cube;
}

void write_labels(const std::filesystem::path& path, const LabelFile& labels) {
  if (labels.labels.size() != labels.height * labels.width) {
    throw ShapeError("write_labels: label count does not match H x W");
  }
  ByteWriter out;
  out.raw("IFGL", 4);
  out.u32(kFormatVersion);
  out.u32(checked_u32(labels.height, "height"));
  out.u32(checked_u32(labels.width, "width"));
  for (auto l : labels.labels) out.u16(l);
  save_bytes(out, path);
}

LabelFile read_labels(const std::filesystem::path& path) {
  ByteReader in = open_reader(path);
  read_header(in, path, "IFGL");
  LabelFile lf;
  lf.height = in.u32();
  lf.width = in.u32();
  in.need(lf.height * lf.width * 2);
  lf.labels.resize(lf.height * lf.width);
  for (auto& l : lf.labels) l = in.u16();
  if (!in.at_end()) throw FormatError(path.string() + ": trailing bytes after labels");
  return lf;
}

SceneCube load_scene(const std::filesystem::path& hsi_path, const std::filesystem::path& lidar_path,
                     const std::filesystem::path& label_path) {
  CubeFile hsi = read_cube(hsi_path);
  CubeFile lidar = read_cube(lidar_path);
  LabelFile labels = read_labels(label_path);
  if (lidar.channels != 1) {
    throw ShapeError("LiDAR raster must have one channel, got " + std::to_string(lidar.channels));
  }
  auto dims = [](std::size_t h, std::size_t w) {
    return std::to_string(h) + "x" + std::to_string(w);
  };
  if (lidar.height != hsi.height || lidar.width != hsi.width) {
    throw ShapeError("dimension mismatch: HSI " + dims(hsi.height, hsi.width) + " vs LiDAR " +
                     dims(lidar.height, lidar.width));
  }
  if (labels.height != hsi.height || labels.width != hsi.width) {
    throw ShapeError("dimension mismatch: HSI " + dims(hsi.height, hsi.width) + " vs labels " +
                     dims(labels.height, labels.width));
  }
  SceneCube scene;
  scene.height = hsi.height;
  scene.width = hsi.width;
  scene.bands = hsi.channels;
  scene.hsi = std::move(hsi.data);
  scene.lidar = std::move(lidar.data);
  scene.labels = std::move(labels.labels);
  scene.validate();
  return scene;
}

ScenePaths write_scene(const SceneCube& scene, const std::filesystem::path& directory) {
  scene.validate();
  std::filesystem::create_directories(directory);
  ScenePaths paths{directory / "hsi.ifgc", directory / "lidar.ifgc", directory / "labels.ifgl"};
  write_cube(paths.hsi, CubeFile{scene.height, scene.width, scene.bands, scene.hsi});
  write_cube(paths.lidar, CubeFile{scene.height, scene.width, 1, scene.lidar});
  write_labels(paths.labels, LabelFile{scene.height, scene.width, scene.labels});
  return paths;
}

// ---- standardization --------------------------------------------------------

std::string BandStats::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "hsi_mean=" << join_doubles(hsi_mean) << "\n";
  os << "hsi_std=" << join_doubles(hsi_std) << "\n";
  os << "lidar_mean=" << lidar_mean << "\n";
  os << "lidar_std=" << lidar_std << "\n";
  return os.str();
}

BandStats BandStats::from_text(const std::string& text) {
  BandStats stats;
  std::istringstream in(text);
  std::string line;
  bool seen[4] = {false, false, false, false};
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "hsi_mean") {
        stats.hsi_mean = split_doubles(value);
        seen[0] = true;
      } else if (key == "hsi_std") {
        stats.hsi_std = split_doubles(value);
        seen[1] = true;
      } else if (key == "lidar_mean") {
        stats.lidar_mean = std::stod(value);
        seen[2] = true;
      } else if (key == "lidar_std") {
        stats.lidar_std = std::stod(value);
        seen[3] = true;
      }
    } catch (const std::exception&) {
      throw FormatError("band stats: bad value for " + key);
    }
  }
  if (!(seen[0] && seen[1] && seen[2] && seen[3]) || stats.hsi_mean.size() != stats.hsi_std.size()) {
    throw FormatError("band stats: incomplete statistics");
  }
  return stats;
}

BandStats compute_band_stats(const SceneCube& scene, const std::vector<std::size_t>& train_pixels) {
  if (train_pixels.empty()) throw ConfigError("band stats: no train pixels");
  const std::size_t t = scene.bands;
  const double n = static_cast<double>(train_pixels.size());
  BandStats stats;
  stats.hsi_mean.assign(t, 0.0);
  stats.hsi_std.assign(t, 0.0);
  for (std::size_t p : train_pixels) {
    for (std::size_t b = 0; b < t; ++b) stats.hsi_mean[b] += scene.hsi[p * t + b];
    stats.lidar_mean += scene.lidar[p];
  }
  for (auto& m : stats.hsi_mean) m /= n;
  stats.lidar_mean /= n;
  double lidar_var = 0.0;
  for (std::size_t p : train_pixels) {
    for (std::size_t b = 0; b < t; ++b) {
      const double d = scene.hsi[p * t + b] - stats.hsi_mean[b];
      stats.hsi_std[b] += d * d;
    }
    const double d = scene.lidar[p] - stats.lidar_mean;
    lidar_var += d * d;
  }
  auto finish = [n](double sum_sq) {
    const double s = std::sqrt(sum_sq / n);
    return s > 0.0 ? s : 1.0;
  };
  for (auto& s : stats.hsi_std) s = finish(s);
  stats.lidar_std = finish(lidar_var);
  return stats;
}

void standardize(SceneCube& scene, const BandStats& stats) {
  if (stats.hsi_mean.size() != scene.bands) {
    throw ShapeError("standardize: stats cover " + std::to_string(stats.hsi_mean.size()) +
                     " bands, scene has " + std::to_string(scene.bands));
  }
  const std::size_t t = scene.bands;
  for (std::size_t p = 0; p < scene.pixels(); ++p) {
    for (std::size_t b = 0; b < t; ++b) {
      double& v = scene.hsi[p * t + b];
      v = (v - stats.hsi_mean[b]) / stats.hsi_std[b];
    }
    scene.lidar[p] = (scene.lidar[p] - stats.lidar_mean) / stats.lidar_std;
  }
}

// ---- patches ----------------------------------------------------------------

std::size_t mirror_index(long long i, std::size_t n) {
  if (n == 1) return 0;
  const long long period = 2 * (static_cast<long long>(n) - 1);
  long long m = ((i % period) + period) % period;
  if (m >= static_cast<long long>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

PatchSample extract_window(const SceneCube& scene, std::size_t row, std::size_t col,
                           int patch_side) {
  if (patch_side < 1 || patch_side % 2 == 0) {
    throw ConfigError("patch side must be odd and positive, got " + std::to_string(patch_side));
  }
  if (row >= scene.height || col >= scene.width) throw ShapeError("patch center outside the scene");
  const auto p = static_cast<std::size_t>(patch_side);
  const long long half = patch_side / 2;
  const std::size_t t = scene.bands;
  PatchSample s;
  s.hsi = DenseTensor({p * p, t});
  s.lidar = DenseTensor({p * p, 1});
  s.row = row;
  s.col = col;
  const std::uint16_t label = scene.labels[row * scene.width + col];
  s.label = static_cast<int>(label) - 1;
  std::size_t k = 0;
  for (long long dr = -half; dr <= half; ++dr) {
    const std::size_t r = mirror_index(static_cast<long long>(row) + dr, scene.height);
    for (long long dc = -half; dc <= half; ++dc, ++k) {
      const std::size_t c = mirror_index(static_cast<long long>(col) + dc, scene.width);
      const std::size_t pix = r * scene.width + c;
      std::copy_n(scene.hsi.begin() + static_cast<std::ptrdiff_t>(pix * t), t,
                  s.hsi.data().begin() + static_cast<std::ptrdiff_t>(k * t));
      s.lidar[k] = scene.lidar[pix];
    }
  }
  return s;
}

PatchSample extract_patch(const SceneCube& scene, std::size_t row, std::size_t col,
                          int patch_side) {
  if (row < scene.height && col < scene.width && scene.labels[row * scene.width + col] == 0) {
    throw ConfigError("patch center (" + std::to_string(row) + ", " + std::to_string(col) +
                      ") is unlabeled");
  }
  return extract_window(scene, row, col, patch_side);
}

std::vector<PatchSample> extract_patches(const SceneCube& scene,
                                         const std::vector<std::size_t>& pixels, int patch_side) {
  std::vector<PatchSample> out;
  out.reserve(pixels.size());
  for (std::size_t p : pixels) {
    out.push_back(extract_patch(scene, p / scene.width, p % scene.width, patch_side));
  }
  return out;
}

// ---- splits -------------------------------------------------------------------

Split split_balanced(const SceneCube& scene, const SplitSpec& spec) {
  Split split;
  if (spec.train_mask) {
    const LabelFile& mask = *spec.train_mask;
    if (mask.height != scene.height || mask.width != scene.width) {
      throw ShapeError("train mask dimensions do not match the scene");
    }
    for (std::size_t p = 0; p < scene.pixels(); ++p) {
      if (scene.labels[p] == 0) continue;
      (mask.labels[p] != 0 ? split.train : split.test).push_back(p);
    }
    return split;
  }
  if (!spec.train_per_class) throw ConfigError("split: need train_per_class or a train mask");
  const std::size_t want = *spec.train_per_class;
  const int classes = scene.num_classes();
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(classes) + 1);
  for (std::size_t p = 0; p < scene.pixels(); ++p) {
    if (scene.labels[p] != 0) by_class[scene.labels[p]].push_back(p);
  }
  Rng rng(spec.seed);
  for (int c = 1; c <= classes; ++c) {
    auto& members = by_class[static_cast<std::size_t>(c)];
    if (members.size() < want) {
      throw ConfigError("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                        " labeled pixels, " + std::to_string(want) + " requested for training");
    }
    rng.shuffle(std::span<std::size_t>(members));
    split.train.insert(split.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(want));
    split.test.insert(split.test.end(), members.begin() + static_cast<std::ptrdiff_t>(want), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// ---- synthetic scenes -----------------------------------------------------------

void SynthSpec::validate() const {
  if (num_classes < 2) throw ConfigError("synth: need at least 2 classes");
  if (num_classes > 65535) throw ConfigError("synth: too many classes");
  if (height == 0 || width == 0 || bands == 0) throw ConfigError("synth: empty dimensions");
  if (!(noise_sigma >= 0.0)) throw ConfigError("synth: noise sigma must be non-negative");
  if (texture_period < 5) throw ConfigError("synth: texture period must be at least 5");
  if (sites_per_class < 1) throw ConfigError("synth: need at least one site per class");
}

std::string SynthSpec::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "num_classes=" << num_classes << "\n"
     << "height=" << height << "\n"
     << "width=" << width << "\n"
     << "bands=" << bands << "\n"
     << "seed=" << seed << "\n"
     << "noise_sigma=" << noise_sigma << "\n"
     << "spectral_cue=" << (spectral_cue ? "true" : "false") << "\n"
     << "elevation_cue=" << (elevation_cue ? "true" : "false") << "\n"
     << "texture_cue=" << (texture_cue ? "true" : "false") << "\n"
     << "texture_period=" << texture_period << "\n"
     << "texture_amplitude=" << texture_amplitude << "\n"
     << "sites_per_class=" << sites_per_class << "\n";
  return os.str();
}

TextureFrequency texture_frequency(int class_index) {
  static constexpr std::array<TextureFrequency, 8> kTable{{
      {1, 0}, {0, 1}, {1, 1}, {2, 0}, {0, 2}, {2, 2}, {1, 2}, {2, 1}}};
  return kTable[static_cast<std::size_t>(class_index) % kTable.size()];
}

std::vector<double> texture_band_weights(std::size_t bands) {
  std::vector<double> w(bands);
  double mean = 0.0;
  for (std::size_t t = 0; t < bands; ++t) {
    w[t] = (t % 2 == 0) ? 1.0 : -1.0;
    mean += w[t];
  }
  mean /= static_cast<double>(bands);
  for (auto& v : w) v -= mean;
  return w;
}

SceneCube synth_scene(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int classes = spec.num_classes;
  const std::size_t h = spec.height;
  const std::size_t w = spec.width;
  const std::size_t t = spec.bands;

  // Voronoi sites; site i belongs to class i % C so every class is present.
  const std::size_t sites = static_cast<std::size_t>(classes * spec.sites_per_class);
  std::vector<std::array<double, 2>> site_pos(sites);
  for (auto& s : site_pos) {
    s[0] = rng.uniform(0.0, static_cast<double>(h));
    s[1] = rng.uniform(0.0, static_cast<double>(w));
  }

  // Gaussian-bump spectral signatures.
  std::vector<std::vector<double>> signature(static_cast<std::size_t>(classes),
                                             std::vector<double>(t));
  const double td = static_cast<double>(t);
  for (int c = 0; c < classes; ++c) {
    double center = (td - 1.0) / 2.0;
    double width = std::max(td / 4.0, 0.75);
    if (spec.spectral_cue) {
      center = (c + 0.5) * td / classes - 0.5;
      width = std::max(0.5 * td / classes, 0.75);
    }
    for (std::size_t b = 0; b < t; ++b) {
      const double d = static_cast<double>(b) - center;
      signature[static_cast<std::size_t>(c)][b] = std::exp(-d * d / (2.0 * width * width));
    }
  }
  const std::vector<double> band_w = texture_band_weights(t);

  SceneCube scene;
  scene.height = h;
  scene.width = w;
  scene.bands = t;
  scene.hsi.resize(h * w * t);
  scene.lidar.resize(h * w);
  scene.labels.resize(h * w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double y = static_cast<double>(r) + 0.5;
      const double x = static_cast<double>(c) + 0.5;
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < sites; ++s) {
        const double dy = y - site_pos[s][0];
        const double dx = x - site_pos[s][1];
        const double d = dy * dy + dx * dx;
        if (d < best_d) {
          best_d = d;
          best = s;
        }
      }
      const int cls = static_cast<int>(best % static_cast<std::size_t>(classes));
      const std::size_t pix = r * w + c;
      scene.labels[pix] = static_cast<std::uint16_t>(cls + 1);

      double texture = 0.0;
      if (spec.texture_cue) {
        const TextureFrequency f = texture_frequency(cls);
        const long long phase =
            (static_cast<long long>(f.u) * static_cast<long long>(r) +
             static_cast<long long>(f.v) * static_cast<long long>(c)) % spec.texture_period;
        texture = spec.texture_amplitude *
                  std::cos(2.0 * M_PI * static_cast<double>(phase) / spec.texture_period);
      }
      for (std::size_t b = 0; b < t; ++b) {
        double v = signature[static_cast<std::size_t>(cls)][b] + texture * band_w[b];
        if (spec.noise_sigma > 0.0) v += rng.normal(0.0, spec.noise_sigma);
        scene.hsi[pix * t + b] = static_cast<float>(v);
      }
      double elev = spec.elevation_cue ? class_elevation(cls) : 0.0;
      if (spec.noise_sigma > 0.0) elev += rng.normal(0.0, spec.noise_sigma);
      scene.lidar[pix] = static_cast<float>(elev);
    }
  }
  return scene;
}

}  // namespace ifgnet

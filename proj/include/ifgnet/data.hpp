#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ifgnet/tensor.hpp"

namespace ifgnet {

// Co-registered HSI cube, LiDAR raster and label map. Label 0 is unlabeled,
// 1..C are classes.
struct SceneCube {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t bands = 0;
  std::vector<double> hsi;      // H x W x T, band fastest
  std::vector<double> lidar;    // H x W
  std::vector<std::uint16_t> labels;  // H x W

  std::size_t pixels() const { return height * width; }
  int num_classes() const;  // largest label present
  void validate() const;
};

// HSI patch X_p (P^2, T), LiDAR patch L_p (P^2, 1) and the 0-based class of
// the center pixel.
struct PatchSample {
  DenseTensor hsi;
  DenseTensor lidar;
  int label = 0;
  std::size_t row = 0;
  std::size_t col = 0;
};

// ---- file formats -------------------------------------------------------
// Cube:  "IFGC" u32 version=1, u32 H, u32 W, u32 C, H*W*C little-endian f32
//        (row-major, channel fastest).
// Label: "IFGL" u32 version=1, u32 H, u32 W, H*W little-endian u16.

struct CubeFile {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> data;
};

struct LabelFile {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint16_t> labels;
};

void write_cube(const std::filesystem::path& path, const CubeFile& cube);
CubeFile read_cube(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabelFile& labels);
LabelFile read_labels(const std::filesystem::path& path);

// Reads and cross-validates the three rasters. Values are returned raw;
// standardization needs the train split (see compute_band_stats).
SceneCube load_scene(const std::filesystem::path& hsi_path, const std::filesystem::path& lidar_path,
                     const std::filesystem::path& label_path);

struct ScenePaths {
  std::filesystem::path hsi;
  std::filesystem::path lidar;
  std::filesystem::path labels;
};

// Writes hsi.ifgc, lidar.ifgc, labels.ifgl into `directory`.
ScenePaths write_scene(const SceneCube& scene, const std::filesystem::path& directory);

// ---- standardization ----------------------------------------------------

struct BandStats {
  std::vector<double> hsi_mean;
  std::vector<double> hsi_std;
  double lidar_mean = 0.0;
  double lidar_std = 1.0;

  std::string to_text() const;
  static BandStats from_text(const std::string& text);
  bool operator==(const BandStats&) const = default;
};

// Per-band mean/std over the given (train) pixels only. A zero std is
// stored as 1 so constant bands map to 0.
BandStats compute_band_stats(const SceneCube& scene, const std::vector<std::size_t>& train_pixels);
void standardize(SceneCube& scene, const BandStats& stats);

// ---- patches --------------------------------------------------------------

// Reflect-101 index: -1 -> 1, n -> n-2.
std::size_t mirror_index(long long i, std::size_t n);

// P x P window around (row, col), mirror-padded, no label requirement.
PatchSample extract_window(const SceneCube& scene, std::size_t row, std::size_t col, int patch_side);
// Same, but the center must be labeled; sample.label = label - 1.
PatchSample extract_patch(const SceneCube& scene, std::size_t row, std::size_t col, int patch_side);
std::vector<PatchSample> extract_patches(const SceneCube& scene,
                                         const std::vector<std::size_t>& pixels, int patch_side);

// ---- splits ---------------------------------------------------------------

struct SplitSpec {
  // Class-balanced random split: this many train pixels per class...
  std::optional<std::size_t> train_per_class;
  // ...or a fixed train mask (nonzero = train), Houston-style.
  std::optional<LabelFile> train_mask;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::size_t> train;  // pixel indices row * W + col, ascending
  std::vector<std::size_t> test;
};

Split split_balanced(const SceneCube& scene, const SplitSpec& spec);

// ---- synthetic scenes ---------------------------------------------------

struct SynthSpec {
  int num_classes = 4;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t bands = 8;
  std::uint64_t seed = 0;
  double noise_sigma = 0.1;
  // Which cues separate the classes.
  bool spectral_cue = true;
  bool elevation_cue = true;
  bool texture_cue = true;
  int texture_period = 5;
  double texture_amplitude = 0.5;
  int sites_per_class = 3;

  void validate() const;
  std::string to_text() const;
};

// Integer frequency (u, v) of a class texture on a texture_period grid.
struct TextureFrequency {
  int u = 0;
  int v = 0;
};
TextureFrequency texture_frequency(int class_index);
// Zero-sum band weights that carry the texture.
std::vector<double> texture_band_weights(std::size_t bands);

SceneCube synth_scene(const SynthSpec& spec);

}  // namespace ifgnet

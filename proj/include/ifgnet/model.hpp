#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ifgnet/data.hpp"
#include "ifgnet/encoders.hpp"
#include "ifgnet/frequency_aggregation.hpp"
#include "ifgnet/spatial_aggregation.hpp"
#include "ifgnet/spline_kan.hpp"
#include "ifgnet/tensor.hpp"

namespace ifgnet {

enum class Variant { kFull, kSpatialOnly, kFrequencyOnly };
enum class HeadPool { kMean, kCenter };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
std::string to_string(HeadPool p);
HeadPool parse_head_pool(const std::string& s);

struct IfgNetConfig {
  int patch_side = 5;
  int bands = 1;
  int latent_dim = 32;
  int num_classes = 2;
  Variant variant = Variant::kFull;
  // One SIA parameter set for the spatial unit and both frequency units.
  bool share_sia_params = false;
  int neighborhood_radius = 1;
  SplineGrid grid;
  HeadPool head_pool = HeadPool::kMean;
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json() const;
  static IfgNetConfig from_json(const std::string& text);
  bool operator==(const IfgNetConfig&) const = default;
};

// Test hook: force a branch's output to an exact zero tensor.
struct BranchMask {
  bool zero_spatial = false;
  bool zero_frequency = false;
};

// KAN encoders -> {spatial SIA, frequency SIA} -> z = F_spa + F_fre ->
// pooled affine head.
class IfgNet {
 public:
  struct Cache {
    KanEncoder::Cache hsi;
    KanEncoder::Cache lidar;
    SiaUnit::Cache spatial;
    FrequencyAggregator::Cache frequency;
    bool spatial_used = false;
    bool frequency_used = false;
    std::vector<double> pooled;
  };

  explicit IfgNet(IfgNetConfig config);

  const IfgNetConfig& config() const { return config_; }
  bool spatial_active() const { return config_.variant != Variant::kFrequencyOnly; }
  bool frequency_active() const { return config_.variant != Variant::kSpatialOnly; }

  std::vector<double> forward(const PatchSample& sample, BranchMask mask = {}) const;
  std::vector<double> forward(const PatchSample& sample, Cache& cache, BranchMask mask = {}) const;
  // Accumulates dL/dparams given dL/dlogits.
  void backward(const Cache& cache, std::span<const double> d_logits);

  // Branch outputs, exposed for composition checks.
  DenseTensor spatial_features(const DenseTensor& f_hsi, const DenseTensor& f_lidar) const;
  DenseTensor frequency_features(const DenseTensor& f_hsi, const DenseTensor& f_lidar) const;
  std::vector<double> head(const DenseTensor& fused) const;

  // Trainable parameters of the active variant, in a fixed order.
  std::vector<NamedParameter> parameters();
  std::size_t parameter_count() const;
  void zero_grad();

  KanEncoder hsi_encoder;
  KanEncoder lidar_encoder;
  SiaUnit spatial_sia;
  FrequencyAggregator frequency;
  Parameter head_weight;  // (C, D)
  Parameter head_bias;    // (C)

 private:
  void check_sample(const PatchSample& sample) const;
  const SiaUnit& freq_re_unit() const { return config_.share_sia_params ? spatial_sia : frequency.sia_re; }
  const SiaUnit& freq_im_unit() const { return config_.share_sia_params ? spatial_sia : frequency.sia_im; }
  std::vector<double> pool(const DenseTensor& fused) const;

  IfgNetConfig config_;
};

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> d_logits;
};

// -log softmax(logits)[label] and its gradient softmax - onehot.
CrossEntropy cross_entropy(std::span<const double> logits, int label);

// Index of the largest logit; ties go to the lowest index.
int argmax(std::span<const double> logits);

// Checkpoint: "IFGK", u32 version, u32 length + UTF-8 JSON config, then one
// record per parameter: u32 name length, name, u32 rank, u32 dims[rank],
// little-endian f64 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const IfgNet& model, const std::filesystem::path& path);
IfgNet load_checkpoint(const std::filesystem::path& path);
// Also checks the stored config against `expected`.
IfgNet load_checkpoint(const std::filesystem::path& path, const IfgNetConfig& expected);

}  // namespace ifgnet

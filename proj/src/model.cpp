#include "ifgnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "json.hpp"

#include "byte_io.hpp"
#include "ifgnet/error.hpp"

namespace ifgnet {

using nlohmann::json;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFull:
      return "full";
    case Variant::kSpatialOnly:
      return "spatial_only";
    case Variant::kFrequencyOnly:
      return "frequency_only";
  }
  return "unknown";
}

Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::kFull;
  if (s == "spatial_only") return Variant::kSpatialOnly;
  if (s == "frequency_only") return Variant::kFrequencyOnly;
  throw ConfigError("unknown variant '" + s + "' (expected full, spatial_only, frequency_only)");
}

std::string to_string(HeadPool p) { return p == HeadPool::kMean ? "mean" : "center"; }

HeadPool parse_head_pool(const std::string& s) {
  if (s == "mean") return HeadPool::kMean;
  if (s == "center") return HeadPool::kCenter;
  throw ConfigError("unknown head pooling '" + s + "' (expected mean, center)");
}

void IfgNetConfig::validate() const {
  if (patch_side < 1 || patch_side % 2 == 0) {
    throw ConfigError("patch_side must be odd and >= 1, got " + std::to_string(patch_side));
  }
  if (bands < 1) throw ConfigError("bands must be >= 1");
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (neighborhood_radius < 0) throw ConfigError("neighborhood_radius must be >= 0");
  grid.validate();
}

std::string IfgNetConfig::to_json() const {
  json j = {
      {"patch_side", patch_side},
      {"bands", bands},
      {"latent_dim", latent_dim},
      {"num_classes", num_classes},
      {"variant", to_string(variant)},
      {"share_sia_params", share_sia_params},
      {"neighborhood_radius", neighborhood_radius},
      {"grid",
       {{"t_min", grid.t_min},
        {"t_max", grid.t_max},
        {"intervals", grid.intervals},
        {"degree", grid.degree}}},
      {"head_pool", to_string(head_pool)},
      {"seed", seed},
  };
  return j.dump();
}

IfgNetConfig IfgNetConfig::from_json(const std::string& text) {
  IfgNetConfig c;
  try {
    const json j = json::parse(text);
    c.patch_side = j.at("patch_side").get<int>();
    c.bands = j.at("bands").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.num_classes = j.at("num_classes").get<int>();
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.share_sia_params = j.at("share_sia_params").get<bool>();
    c.neighborhood_radius = j.at("neighborhood_radius").get<int>();
    const json& g = j.at("grid");
    c.grid.t_min = g.at("t_min").get<double>();
    c.grid.t_max = g.at("t_max").get<double>();
    c.grid.intervals = g.at("intervals").get<int>();
    c.grid.degree = g.at("degree").get<int>();
    c.head_pool = parse_head_pool(j.at("head_pool").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- model --------------------------------------------------------------------

namespace {

IfgNetConfig validated(IfgNetConfig c) {
  c.validate();
  return c;
}

}  // namespace

IfgNet::IfgNet(IfgNetConfig config) : config_(validated(std::move(config))) {
  const auto d = static_cast<std::size_t>(config_.latent_dim);
  const auto classes = static_cast<std::size_t>(config_.num_classes);
  const NeighborhoodConfig nb = NeighborhoodConfig::with_radius(config_.neighborhood_radius);
  hsi_encoder = make_hsi_encoder(static_cast<std::size_t>(config_.bands), d, config_.grid);
  lidar_encoder = make_lidar_encoder(d, config_.grid);
  spatial_sia = SiaUnit(d, nb, config_.grid);
  frequency = FrequencyAggregator(d, nb, config_.grid);
  head_weight = Parameter({classes, d});
  head_bias = Parameter({classes});

  // Every component is drawn in the same order whatever the variant, so
  // variants built from one seed share their common weights.
  Rng rng(config_.seed);
  hsi_encoder.initialize(rng);
  lidar_encoder.initialize(rng);
  spatial_sia.initialize(rng);
  frequency.initialize(rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& w : head_weight.value.data()) w = rng.uniform(-bound, bound);
}

void IfgNet::check_sample(const PatchSample& sample) const {
  const auto pixels = static_cast<std::size_t>(config_.patch_side * config_.patch_side);
  if (sample.hsi.rank() != 2 || sample.hsi.dim(0) != pixels ||
      sample.hsi.dim(1) != static_cast<std::size_t>(config_.bands)) {
    throw ShapeError("ifgnet: HSI patch " + sample.hsi.shape_string() + " does not match P=" +
                     std::to_string(config_.patch_side) + ", T=" + std::to_string(config_.bands));
  }
  if (sample.lidar.rank() != 2 || sample.lidar.dim(0) != pixels || sample.lidar.dim(1) != 1) {
    throw ShapeError("ifgnet: LiDAR patch " + sample.lidar.shape_string() +
                     " does not match P=" + std::to_string(config_.patch_side));
  }
}

DenseTensor IfgNet::spatial_features(const DenseTensor& f_hsi, const DenseTensor& f_lidar) const {
  return sia_forward(spatial_sia, f_hsi, f_lidar);
}

DenseTensor IfgNet::frequency_features(const DenseTensor& f_hsi, const DenseTensor& f_lidar) const {
  return freq_aggregate(freq_re_unit(), freq_im_unit(), f_hsi, f_lidar);
}

std::vector<double> IfgNet::pool(const DenseTensor& fused) const {
  const std::size_t pixels = fused.dim(0);
  const std::size_t d = fused.dim(1);
  std::vector<double> pooled(d, 0.0);
  if (config_.head_pool == HeadPool::kCenter) {
    const std::size_t center = (pixels - 1) / 2;
    for (std::size_t j = 0; j < d; ++j) pooled[j] = fused(center, j);
    return pooled;
  }
  for (std::size_t q = 0; q < pixels; ++q) {
    for (std::size_t j = 0; j < d; ++j) pooled[j] += fused(q, j);
  }
  for (double& v : pooled) v /= static_cast<double>(pixels);
  return pooled;
}

std::vector<double> IfgNet::head(const DenseTensor& fused) const {
  const std::vector<double> pooled = pool(fused);
  const std::size_t classes = head_bias.size();
  const std::size_t d = pooled.size();
  std::vector<double> logits(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    double acc = head_bias.value[c];
    for (std::size_t j = 0; j < d; ++j) acc += head_weight.value(c, j) * pooled[j];
    logits[c] = acc;
  }
  return logits;
}

std::vector<double> IfgNet::forward(const PatchSample& sample, BranchMask mask) const {
  Cache cache;
  return forward(sample, cache, mask);
}

std::vector<double> IfgNet::forward(const PatchSample& sample, Cache& cache,
                                    BranchMask mask) const {
  check_sample(sample);
  const DenseTensor f_hsi = hsi_encoder.encode(sample.hsi, cache.hsi);
  const DenseTensor f_lidar = lidar_encoder.encode(sample.lidar, cache.lidar);

  // Disabled branches contribute an exact zero tensor to z = F_spa + F_fre.
  DenseTensor spa(f_hsi.shape());
  DenseTensor fre(f_hsi.shape());
  cache.spatial_used = spatial_active() && !mask.zero_spatial;
  cache.frequency_used = frequency_active() && !mask.zero_frequency;
  if (spatial_active()) {
    spa = sia_forward(spatial_sia, f_hsi, f_lidar, &cache.spatial);
    if (mask.zero_spatial) spa.fill(0.0);
  }
  if (frequency_active()) {
    fre = freq_aggregate(freq_re_unit(), freq_im_unit(), f_hsi, f_lidar, &cache.frequency);
    if (mask.zero_frequency) fre.fill(0.0);
  }
  DenseTensor fused(spa.shape());
  for (std::size_t i = 0; i < fused.size(); ++i) fused[i] = spa[i] + fre[i];

  cache.pooled = pool(fused);
  std::vector<double> logits = head(fused);
  for (double v : logits) {
    if (!std::isfinite(v)) throw NonFiniteError("ifgnet: non-finite logits");
  }
  return logits;
}

void IfgNet::backward(const Cache& cache, std::span<const double> d_logits) {
  const std::size_t classes = head_bias.size();
  const auto d = static_cast<std::size_t>(config_.latent_dim);
  const auto pixels = static_cast<std::size_t>(config_.patch_side * config_.patch_side);
  if (d_logits.size() != classes || cache.pooled.size() != d) {
    throw ShapeError("ifgnet backward: gradient/cache mismatch");
  }
  std::vector<double> d_pooled(d, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    const double g = d_logits[c];
    head_bias.grad[c] += g;
    for (std::size_t j = 0; j < d; ++j) {
      head_weight.grad(c, j) += g * cache.pooled[j];
      d_pooled[j] += g * head_weight.value(c, j);
    }
  }
  DenseTensor d_fused({pixels, d});
  if (config_.head_pool == HeadPool::kCenter) {
    const std::size_t center = (pixels - 1) / 2;
    for (std::size_t j = 0; j < d; ++j) d_fused(center, j) = d_pooled[j];
  } else {
    const double inv = 1.0 / static_cast<double>(pixels);
    for (std::size_t q = 0; q < pixels; ++q) {
      for (std::size_t j = 0; j < d; ++j) d_fused(q, j) = d_pooled[j] * inv;
    }
  }

  DenseTensor d_hsi({pixels, d});
  DenseTensor d_lidar({pixels, d});
  auto add_into = [](DenseTensor& dst, const DenseTensor& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  };
  if (cache.spatial_used) {
    auto [a, b] = sia_backward(spatial_sia, cache.spatial, d_fused);
    add_into(d_hsi, a);
    add_into(d_lidar, b);
  }
  if (cache.frequency_used) {
    SiaUnit& re_unit = config_.share_sia_params ? spatial_sia : frequency.sia_re;
    SiaUnit& im_unit = config_.share_sia_params ? spatial_sia : frequency.sia_im;
    auto [a, b] = freq_aggregate_backward(re_unit, im_unit, cache.frequency, d_fused);
    add_into(d_hsi, a);
    add_into(d_lidar, b);
  }
  hsi_encoder.backward(cache.hsi, d_hsi);
  lidar_encoder.backward(cache.lidar, d_lidar);
}

std::vector<NamedParameter> IfgNet::parameters() {
  std::vector<NamedParameter> out;
  hsi_encoder.collect_parameters("hsi_encoder", out);
  lidar_encoder.collect_parameters("lidar_encoder", out);
  if (spatial_active() || config_.share_sia_params) spatial_sia.collect_parameters("spatial_sia", out);
  if (frequency_active() && !config_.share_sia_params) frequency.collect_parameters("frequency", out);
  out.push_back({"head.weight", &head_weight});
  out.push_back({"head.bias", &head_bias});
  return out;
}

std::size_t IfgNet::parameter_count() const {
  std::size_t total = 0;
  for (const auto& np : const_cast<IfgNet*>(this)->parameters()) total += np.param->size();
  return total;
}

void IfgNet::zero_grad() {
  hsi_encoder.zero_grad();
  lidar_encoder.zero_grad();
  spatial_sia.zero_grad();
  frequency.zero_grad();
  head_weight.zero_grad();
  head_bias.zero_grad();
}

// ---- loss -----------------------------------------------------------------------

CrossEntropy cross_entropy(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw ConfigError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                      std::to_string(logits.size()) + ")");
  }
  CrossEntropy ce;
  ce.d_logits.assign(logits.begin(), logits.end());
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - peak);
  ce.loss = peak + std::log(total) - logits[static_cast<std::size_t>(label)];
  softmax_inplace(ce.d_logits);
  ce.d_logits[static_cast<std::size_t>(label)] -= 1.0;
  return ce;
}

int argmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("argmax: empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<int>(best);
}

// ---- checkpoint ----------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[] = "IFGK";

[[noreturn]] void fail(CheckpointError::Kind kind, const std::string& what) {
  throw CheckpointError(kind, "checkpoint: " + what);
}

}  // namespace

void save_checkpoint(const IfgNet& model, const std::filesystem::path& path) {
  detail::ByteWriter out;
  out.raw(kCheckpointMagic, 4);
  out.u32(kCheckpointVersion);
  const std::string config = model.config().to_json();
  out.u32(static_cast<std::uint32_t>(config.size()));
  out.raw(config.data(), config.size());
  for (const auto& np : const_cast<IfgNet&>(model).parameters()) {
    out.u32(static_cast<std::uint32_t>(np.name.size()));
    out.raw(np.name.data(), np.name.size());
    const auto& shape = np.param->value.shape();
    out.u32(static_cast<std::uint32_t>(shape.size()));
    for (std::size_t dim : shape) out.u32(static_cast<std::uint32_t>(dim));
    for (double v : np.param->value.data()) out.f64(v);
  }
  if (!out.save(path)) fail(CheckpointError::Kind::kIo, "cannot write " + path.string());
}

IfgNet load_checkpoint(const std::filesystem::path& path) {
  std::vector<char> bytes;
  if (!detail::ByteReader::slurp(path, bytes)) {
    fail(CheckpointError::Kind::kIo, "cannot open " + path.string());
  }
  detail::ByteReader in(std::move(bytes), [&path] {
    fail(CheckpointError::Kind::kTruncated, path.string() + " is truncated");
  });
  if (in.str(4) != std::string(kCheckpointMagic, 4)) {
    fail(CheckpointError::Kind::kBadMagic, path.string() + " is not an IFGK checkpoint");
  }
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    fail(CheckpointError::Kind::kVersionMismatch,
         "version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
  }
  const std::uint32_t config_len = in.u32();
  IfgNetConfig config;
  try {
    config = IfgNetConfig::from_json(in.str(config_len));
  } catch (const ConfigError& e) {
    fail(CheckpointError::Kind::kMalformed, e.what());
  }

  IfgNet model(config);
  std::map<std::string, Parameter*> expected;
  for (const auto& np : model.parameters()) expected.emplace(np.name, np.param);
  std::map<std::string, bool> loaded;
  while (!in.at_end()) {
    const std::string name = in.str(in.u32());
    auto it = expected.find(name);
    if (it == expected.end()) {
      fail(CheckpointError::Kind::kShapeMismatch, "unexpected parameter '" + name + "'");
    }
    if (loaded[name]) fail(CheckpointError::Kind::kMalformed, "duplicate parameter '" + name + "'");
    const std::uint32_t rank = in.u32();
    std::vector<std::size_t> shape(rank);
    for (auto& dim : shape) dim = in.u32();
    Parameter& p = *it->second;
    if (shape != p.value.shape()) {
      fail(CheckpointError::Kind::kShapeMismatch, "parameter '" + name + "' has shape " +
                                                      DenseTensor(shape).shape_string() +
                                                      ", model expects " + p.value.shape_string());
    }
    in.need(p.size() * 8);
    for (double& v : p.value.data()) v = in.f64();
    if (!p.value.all_finite()) {
      fail(CheckpointError::Kind::kMalformed, "parameter '" + name + "' is not finite");
    }
    loaded[name] = true;
  }
  for (const auto& [name, p] : expected) {
    if (!loaded[name]) fail(CheckpointError::Kind::kTruncated, "missing parameter '" + name + "'");
  }
  return model;
}

IfgNet load_checkpoint(const std::filesystem::path& path, const IfgNetConfig& expected) {
  IfgNet model = load_checkpoint(path);
  const IfgNetConfig& got = model.config();
  if (got.variant != expected.variant) {
    fail(CheckpointError::Kind::kVariantMismatch,
         "checkpoint holds a " + to_string(got.variant) + " model, " + to_string(expected.variant) +
             " expected");
  }
  if (got.patch_side != expected.patch_side || got.bands != expected.bands ||
      got.latent_dim != expected.latent_dim || got.num_classes != expected.num_classes ||
      got.neighborhood_radius != expected.neighborhood_radius || !(got.grid == expected.grid) ||
      got.share_sia_params != expected.share_sia_params || got.head_pool != expected.head_pool) {
    fail(CheckpointError::Kind::kShapeMismatch,
         "checkpoint config " + got.to_json() + " does not match " + expected.to_json());
  }
  return model;
}

}  // namespace ifgnet

#include "ifgnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "ifgnet/encoders.hpp"
#include "ifgnet/frequency_aggregation.hpp"
#include "ifgnet/model.hpp"
#include "ifgnet/spatial_aggregation.hpp"
#include "ifgnet/spline_kan.hpp"

namespace ifgnet {

double gradcheck_relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / denom;
}

bool GradcheckReport::pass() const {
  return std::all_of(groups.begin(), groups.end(), [](const auto& g) { return g.pass(); });
}

double GradcheckReport::max_error(const std::string& module) const {
  double worst = 0.0;
  for (const auto& g : groups) {
    if (g.module == module) worst = std::max(worst, g.max_rel_error);
  }
  return worst;
}

std::string GradcheckReport::to_text() const {
  std::ostringstream os;
  for (const auto& g : groups) {
    char line[256];
    std::snprintf(line, sizeof line, "%-22s %-36s checked=%-6zu max_rel_err=%.3e tol=%.0e %s\n",
                  g.module.c_str(), g.name.c_str(), g.checked, g.max_rel_error, g.tolerance,
                  g.pass() ? "PASS" : "FAIL");
    os << line;
  }
  os << (pass() ? "gradcheck: PASS\n" : "gradcheck: FAIL\n");
  return os.str();
}

namespace {

using LossFn = std::function<double()>;

class Checker {
 public:
  Checker(GradcheckReport& report, std::string module, double tolerance, double step)
      : report_(report), module_(std::move(module)), tolerance_(tolerance), step_(step) {}

  // Compares analytic[i] with the central difference of loss() in slots[i]
  // for every i in `which` (all entries when empty).
  void check(const std::string& name, std::span<double> slots, std::span<const double> analytic,
             const LossFn& loss, const std::vector<std::size_t>& which = {}) {
    GradcheckGroup& g = group(name);
    auto one = [&](std::size_t i) {
      const double orig = slots[i];
      slots[i] = orig + step_;
      const double up = loss();
      slots[i] = orig - step_;
      const double down = loss();
      slots[i] = orig;
      const double numeric = (up - down) / (2.0 * step_);
      g.max_rel_error = std::max(g.max_rel_error, gradcheck_relative_error(analytic[i], numeric));
      ++g.checked;
    };
    if (which.empty()) {
      for (std::size_t i = 0; i < slots.size(); ++i) one(i);
    } else {
      for (std::size_t i : which) one(i);
    }
  }

 private:
  GradcheckGroup& group(const std::string& name) {
    for (auto& g : report_.groups) {
      if (g.module == module_ && g.name == name) return g;
    }
    report_.groups.push_back(GradcheckGroup{module_, name, 0, 0.0, tolerance_});
    return report_.groups.back();
  }

  GradcheckReport& report_;
  std::string module_;
  double tolerance_;
  double step_;
};

DenseTensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double stddev = 1.0) {
  DenseTensor t(std::move(shape));
  for (double& v : t.data()) v = rng.normal(0.0, stddev);
  return t;
}

double weighted_sum(const DenseTensor& weights, const DenseTensor& values) {
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += weights[i] * values[i];
  return acc;
}

std::vector<double> copy_of(const DenseTensor& t) { return {t.data().begin(), t.data().end()}; }

void randomize_scales(KanLayer& layer, Rng& rng) {
  for (double& s : layer.scale_spline.value.data()) s = rng.uniform(0.5, 1.5);
}

void check_kan_layers(const GradcheckOptions& opt, GradcheckReport& report, Rng& rng) {
  Checker checker(report, "spline-kan", opt.module_tolerance, opt.step);
  for (std::size_t in : {1, 2, 4}) {
    for (std::size_t out : {1, 2, 4}) {
      KanLayer layer(in, out);
      layer.initialize(rng);
      randomize_scales(layer, rng);
      DenseTensor x = random_tensor({3, in}, rng, 1.2);
      const DenseTensor w = random_tensor({3, out}, rng);
      KanLayer::Cache cache;
      layer.forward(x, cache);
      layer.zero_grad();
      const DenseTensor dx = layer.backward(cache, w);
      LossFn loss = [&] { return weighted_sum(w, layer.forward(x)); };
      checker.check("kan.input", x.data(), dx.data(), loss);
      const auto g_coeff = copy_of(layer.spline_coeffs.grad);
      const auto g_base = copy_of(layer.base_weight.grad);
      const auto g_scale = copy_of(layer.scale_spline.grad);
      checker.check("kan.spline_coeffs", layer.spline_coeffs.value.data(), g_coeff, loss);
      checker.check("kan.base_weight", layer.base_weight.value.data(), g_base, loss);
      checker.check("kan.scale_spline", layer.scale_spline.value.data(), g_scale, loss);
    }
  }
}

void check_encoder(Checker& checker, KanEncoder& enc, const std::string& prefix, Rng& rng) {
  enc.initialize(rng);
  randomize_scales(enc.first(), rng);
  randomize_scales(enc.second(), rng);
  DenseTensor x = random_tensor({1, enc.channels()}, rng);
  const DenseTensor w = random_tensor({1, enc.latent_dim()}, rng);
  KanEncoder::Cache cache;
  enc.encode(x, cache);
  enc.zero_grad();
  const DenseTensor dx = enc.backward(cache, w);
  LossFn loss = [&] { return weighted_sum(w, enc.encode(x)); };
  checker.check(prefix + ".input", x.data(), dx.data(), loss);
  std::vector<NamedParameter> params;
  enc.collect_parameters(prefix, params);
  for (auto& np : params) {
    const auto g = copy_of(np.param->grad);
    checker.check(np.name, np.param->value.data(), g, loss);
  }
}

void check_encoders(const GradcheckOptions& opt, GradcheckReport& report, Rng& rng) {
  Checker checker(report, "encoders", opt.module_tolerance, opt.step);
  const auto d = static_cast<std::size_t>(opt.latent_dim);
  KanEncoder hsi = make_hsi_encoder(static_cast<std::size_t>(opt.bands), d, SplineGrid{});
  KanEncoder lidar = make_lidar_encoder(d, SplineGrid{});
  check_encoder(checker, hsi, "hsi_encoder", rng);
  check_encoder(checker, lidar, "lidar_encoder", rng);
}

void check_spatial(const GradcheckOptions& opt, GradcheckReport& report, Rng& rng) {
  Checker checker(report, "spatial-aggregation", opt.module_tolerance, opt.step);
  const auto d = static_cast<std::size_t>(opt.latent_dim);
  const auto pixels = static_cast<std::size_t>(opt.patch_side * opt.patch_side);
  SiaUnit unit(d, NeighborhoodConfig::with_radius(1), SplineGrid{});
  unit.initialize(rng);
  randomize_scales(unit.kan(), rng);
  DenseTensor f_a = random_tensor({pixels, d}, rng);
  DenseTensor f_b = random_tensor({pixels, d}, rng);
  const DenseTensor w = random_tensor({pixels, d}, rng);
  SiaUnit::Cache cache;
  sia_forward(unit, f_a, f_b, &cache);
  unit.zero_grad();
  auto [d_a, d_b] = sia_backward(unit, cache, w);
  LossFn loss = [&] { return weighted_sum(w, sia_forward(unit, f_a, f_b)); };
  std::vector<NamedParameter> params;
  unit.collect_parameters("sia", params);
  const double corrupt = opt.corrupt_backward ? 1.01 : 1.0;
  auto corrupted = [corrupt](std::vector<double> g) {
    for (double& v : g) v *= corrupt;
    return g;
  };
  checker.check("f_a", f_a.data(), corrupted(copy_of(d_a)), loss);
  checker.check("f_b", f_b.data(), corrupted(copy_of(d_b)), loss);
  for (auto& np : params) {
    checker.check(np.name, np.param->value.data(), corrupted(copy_of(np.param->grad)), loss);
  }
}

void check_frequency(const GradcheckOptions& opt, GradcheckReport& report, Rng& rng) {
  Checker checker(report, "frequency-aggregation", opt.module_tolerance, opt.step);
  const auto d = static_cast<std::size_t>(opt.latent_dim);
  const auto pixels = static_cast<std::size_t>(opt.patch_side * opt.patch_side);
  FrequencyAggregator agg(d, NeighborhoodConfig::with_radius(1), SplineGrid{});
  agg.initialize(rng);
  randomize_scales(agg.sia_re.kan(), rng);
  randomize_scales(agg.sia_im.kan(), rng);
  // Latents scaled so the spectra mostly stay on the spline grid.
  DenseTensor f_hsi = random_tensor({pixels, d}, rng, 0.4);
  DenseTensor f_lidar = random_tensor({pixels, d}, rng, 0.4);
  const DenseTensor w = random_tensor({pixels, d}, rng);
  FrequencyAggregator::Cache cache;
  freq_aggregate(agg, f_hsi, f_lidar, &cache);
  agg.zero_grad();
  auto [d_hsi, d_lidar] = freq_aggregate_backward(agg, cache, w);
  LossFn loss = [&] { return weighted_sum(w, freq_aggregate(agg, f_hsi, f_lidar)); };
  checker.check("f_hsi", f_hsi.data(), copy_of(d_hsi), loss);
  checker.check("f_lidar", f_lidar.data(), copy_of(d_lidar), loss);
  std::vector<NamedParameter> params;
  agg.collect_parameters("frequency", params);
  for (auto& np : params) {
    checker.check(np.name, np.param->value.data(), copy_of(np.param->grad), loss);
  }
}

void check_model(const GradcheckOptions& opt, GradcheckReport& report, Rng& rng) {
  Checker checker(report, "model-head", opt.model_tolerance, opt.step);
  IfgNetConfig cfg;
  cfg.patch_side = opt.patch_side;
  cfg.bands = opt.bands;
  cfg.latent_dim = opt.latent_dim;
  cfg.num_classes = opt.num_classes;
  cfg.seed = rng.next_u64();
  IfgNet model(cfg);
  // Break the scale_spline == 1 symmetry so those gradients are exercised.
  for (auto& np : model.parameters()) {
    if (np.name.ends_with("scale_spline")) {
      for (double& s : np.param->value.data()) s = rng.uniform(0.5, 1.5);
    }
  }
  const auto pixels = static_cast<std::size_t>(opt.patch_side * opt.patch_side);
  PatchSample sample;
  sample.hsi = random_tensor({pixels, static_cast<std::size_t>(opt.bands)}, rng);
  sample.lidar = random_tensor({pixels, 1}, rng);
  sample.label = 1 % opt.num_classes;

  IfgNet::Cache cache;
  const auto logits = model.forward(sample, cache);
  model.zero_grad();
  model.backward(cache, cross_entropy(logits, sample.label).d_logits);
  LossFn loss = [&] { return cross_entropy(model.forward(sample), sample.label).loss; };

  for (auto& np : model.parameters()) {
    const std::size_t size = np.param->size();
    const auto want = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(opt.model_fraction * static_cast<double>(size))));
    std::set<std::size_t> picked;
    while (picked.size() < std::min(want, size)) picked.insert(rng.below(size));
    const std::vector<std::size_t> which(picked.begin(), picked.end());
    checker.check(np.name, np.param->value.data(), copy_of(np.param->grad), loss, which);
  }
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  GradcheckReport report;
  Rng rng(options.seed);
  check_kan_layers(options, report, rng);
  check_encoders(options, report, rng);
  check_spatial(options, report, rng);
  check_frequency(options, report, rng);
  check_model(options, report, rng);
  return report;
}

}  // namespace ifgnet

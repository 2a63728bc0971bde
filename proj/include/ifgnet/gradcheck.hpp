#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ifgnet {

struct GradcheckOptions {
  int patch_side = 3;
  int bands = 4;
  int latent_dim = 8;
  int num_classes = 3;
  double step = 1e-5;
  double module_tolerance = 1e-5;
  double model_tolerance = 1e-4;
  // Fraction of model parameters sampled for the end-to-end check; every
  // parameter group contributes at least one entry.
  double model_fraction = 0.01;
  std::uint64_t seed = 7;
  // Negative control: perturbs the analytic spatial-aggregation gradients.
  bool corrupt_backward = false;
};

struct GradcheckGroup {
  std::string module;
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;

  bool pass() const { return max_rel_error <= tolerance; }
};

struct GradcheckReport {
  std::vector<GradcheckGroup> groups;

  bool pass() const;
  double max_error(const std::string& module) const;
  std::string to_text() const;
};

// |a - n| / max(|a|, |n|, 1e-3)
double gradcheck_relative_error(double analytic, double numeric);

// Central finite differences against the analytic backward passes of the
// KAN layer, encoders, spatial SIA, frequency path and the full model.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace ifgnet

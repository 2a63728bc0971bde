#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "ifgnet/data.hpp"
#include "ifgnet/model.hpp"
#include "ifgnet/training.hpp"

namespace ifgnet::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kCheckFailed = 2 };

// Everything a subcommand can be configured with. Keys are the snake_case
// field names; the matching flag is --key with '_' replaced by '-'.
struct RunConfig {
  std::string subcommand;

  // scene and artifacts
  std::string hsi;
  std::string lidar;
  std::string labels;
  std::string train_mask;
  std::string out = ".";
  std::string checkpoint;
  std::string stats;
  std::string predictions;
  std::string output;
  std::size_t train_per_class = 150;

  // model
  int patch_side = 5;
  int latent_dim = 32;
  Variant variant = Variant::kFull;
  bool share_sia_params = false;
  int neighborhood_radius = 1;
  int grid_intervals = 8;
  int grid_degree = 3;
  double grid_min = -3.0;
  double grid_max = 3.0;
  HeadPool head_pool = HeadPool::kMean;

  // training
  int epochs = 50;
  int batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  // synthetic scene; classes/bands also act as checks for train
  int classes = 4;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t bands = 8;
  double noise = 0.1;
  bool spectral_cue = true;
  bool elevation_cue = true;
  bool texture_cue = true;
  int texture_period = 5;
  double texture_amplitude = 0.5;
  int sites_per_class = 3;

  // Parses and stores one value; throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  // Keys assigned through set(), i.e. not left at their default.
  bool is_set(const std::string& key) const { return explicit_keys.count(key) > 0; }

  // key=value lines for every key; '#' starts a comment in from_text.
  std::string to_text() const;
  static RunConfig from_text(const std::string& text);
  void apply_text(const std::string& text);

  IfgNetConfig model_config(int bands, int num_classes) const;
  TrainConfig train_config() const;
  SynthSpec synth_spec() const;

  static const std::vector<std::string>& keys();

  std::set<std::string> explicit_keys;
};

bool operator==(const RunConfig& a, const RunConfig& b);

// Entry point shared by the executable and the tests. argv[0] is the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_train(const RunConfig& cfg, std::ostream& out);
int cmd_eval(const RunConfig& cfg, std::ostream& out);
int cmd_predict(const RunConfig& cfg, std::ostream& out);
int cmd_gradcheck(const RunConfig& cfg, bool corrupt_backward, std::ostream& out);
int cmd_synth(const RunConfig& cfg, std::ostream& out);

}  // namespace ifgnet::cli

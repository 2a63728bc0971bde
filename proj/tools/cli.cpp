#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "ifgnet/error.hpp"
#include "ifgnet/gradcheck.hpp"
#include "ifgnet/metrics.hpp"

namespace ifgnet::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("bad integer for " + key + ": '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("bad number for " + key + ": '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

std::string real_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field integer_field(T RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_integer<T>(k, v);
          },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field real_field(double RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_real(k, v);
          },
          [member](const RunConfig& c) { return real_text(c.*member); }};
}

Field string_field(std::string RunConfig::*member) {
  return {[member](RunConfig& c, const std::string&, const std::string& v) { c.*member = v; },
          [member](const RunConfig& c) { return c.*member; }};
}

Field bool_field(bool RunConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_bool(k, v);
          },
          [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

// Ordered key table; to_text() follows this order.
const std::vector<std::pair<std::string, Field>>& field_table() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"subcommand", string_field(&RunConfig::subcommand)},
      {"hsi", string_field(&RunConfig::hsi)},
      {"lidar", string_field(&RunConfig::lidar)},
      {"labels", string_field(&RunConfig::labels)},
      {"train_mask", string_field(&RunConfig::train_mask)},
      {"train_per_class", integer_field(&RunConfig::train_per_class)},
      {"out", string_field(&RunConfig::out)},
      {"checkpoint", string_field(&RunConfig::checkpoint)},
      {"stats", string_field(&RunConfig::stats)},
      {"predictions", string_field(&RunConfig::predictions)},
      {"output", string_field(&RunConfig::output)},
      {"patch_side", integer_field(&RunConfig::patch_side)},
      {"latent_dim", integer_field(&RunConfig::latent_dim)},
      {"variant",
       {[](RunConfig& c, const std::string&, const std::string& v) { c.variant = parse_variant(v); },
        [](const RunConfig& c) { return to_string(c.variant); }}},
      {"share_sia_params", bool_field(&RunConfig::share_sia_params)},
      {"neighborhood_radius", integer_field(&RunConfig::neighborhood_radius)},
      {"grid_intervals", integer_field(&RunConfig::grid_intervals)},
      {"grid_degree", integer_field(&RunConfig::grid_degree)},
      {"grid_min", real_field(&RunConfig::grid_min)},
      {"grid_max", real_field(&RunConfig::grid_max)},
      {"head_pool",
       {[](RunConfig& c, const std::string&, const std::string& v) {
          c.head_pool = parse_head_pool(v);
        },
        [](const RunConfig& c) { return to_string(c.head_pool); }}},
      {"epochs", integer_field(&RunConfig::epochs)},
      {"batch_size", integer_field(&RunConfig::batch_size)},
      {"lr", real_field(&RunConfig::lr)},
      {"seed", integer_field(&RunConfig::seed)},
      {"classes", integer_field(&RunConfig::classes)},
      {"height", integer_field(&RunConfig::height)},
      {"width", integer_field(&RunConfig::width)},
      {"bands", integer_field(&RunConfig::bands)},
      {"noise", real_field(&RunConfig::noise)},
      {"spectral_cue", bool_field(&RunConfig::spectral_cue)},
      {"elevation_cue", bool_field(&RunConfig::elevation_cue)},
      {"texture_cue", bool_field(&RunConfig::texture_cue)},
      {"texture_period", integer_field(&RunConfig::texture_period)},
      {"texture_amplitude", real_field(&RunConfig::texture_amplitude)},
      {"sites_per_class", integer_field(&RunConfig::sites_per_class)},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [k, f] : field_table()) {
    if (k == key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string flag_name(const std::string& key) {
  std::string s = "--" + key;
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ConfigError("cannot write " + path.string());
}

void require(const RunConfig& cfg, const std::string& key) {
  if (cfg.get(key).empty()) {
    throw ConfigError(cfg.subcommand + ": " + flag_name(key) + " is required");
  }
}

SplitSpec split_spec(const RunConfig& cfg, std::uint64_t seed) {
  SplitSpec spec;
  spec.seed = seed;
  if (!cfg.train_mask.empty()) {
    spec.train_mask = read_labels(cfg.train_mask);
  } else {
    spec.train_per_class = cfg.train_per_class;
  }
  return spec;
}

void check_patch_fits(int patch_side, const SceneCube& scene) {
  const auto half = static_cast<std::size_t>(patch_side / 2);
  if (half >= scene.height || half >= scene.width) {
    throw ConfigError("patch side " + std::to_string(patch_side) + " needs a scene larger than " +
                      std::to_string(scene.height) + "x" + std::to_string(scene.width));
  }
}

fs::path stats_path(const RunConfig& cfg) {
  if (!cfg.stats.empty()) return cfg.stats;
  return fs::path(cfg.checkpoint).parent_path() / "band_stats.txt";
}

void print_scores(const Scores& s, std::ostream& out) { out << format_report_table(s); }

}  // namespace

// ---- RunConfig ------------------------------------------------------------------

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, f] : field_table()) out.push_back(key);
    return out;
  }();
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  field(key).set(*this, key, value);
  explicit_keys.insert(key);
}

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

std::string RunConfig::to_text() const {
  std::string s;
  for (const auto& [key, f] : field_table()) s += key + "=" + f.get(*this) + "\n";
  return s;
}

void RunConfig::apply_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig c;
  c.apply_text(text);
  return c;
}

bool operator==(const RunConfig& a, const RunConfig& b) { return a.to_text() == b.to_text(); }

IfgNetConfig RunConfig::model_config(int bands_in, int num_classes) const {
  IfgNetConfig m;
  m.patch_side = patch_side;
  m.bands = bands_in;
  m.latent_dim = latent_dim;
  m.num_classes = num_classes;
  m.variant = variant;
  m.share_sia_params = share_sia_params;
  m.neighborhood_radius = neighborhood_radius;
  m.grid.t_min = grid_min;
  m.grid.t_max = grid_max;
  m.grid.intervals = grid_intervals;
  m.grid.degree = grid_degree;
  m.head_pool = head_pool;
  m.seed = seed;
  m.validate();
  m.grid.validate();
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.adam.lr = lr;
  t.seed = seed;
  t.threads = threads_from_env();
  t.validate();
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  return t;
}

SynthSpec RunConfig::synth_spec() const {
  SynthSpec s;
  s.num_classes = classes;
  s.height = height;
  s.width = width;
  s.bands = bands;
  s.seed = seed;
  s.noise_sigma = noise;
  s.spectral_cue = spectral_cue;
  s.elevation_cue = elevation_cue;
  s.texture_cue = texture_cue;
  s.texture_period = texture_period;
  s.texture_amplitude = texture_amplitude;
  s.sites_per_class = sites_per_class;
  s.validate();
  return s;
}

// ---- commands ---------------------------------------------------------------------

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  for (const char* k : {"hsi", "lidar", "labels"}) require(cfg, k);
  SceneCube scene = load_scene(cfg.hsi, cfg.lidar, cfg.labels);
  const int num_classes = scene.num_classes();
  if (cfg.is_set("classes") && cfg.classes != num_classes) {
    throw ConfigError("config expects " + std::to_string(cfg.classes) + " classes, scene has " +
                      std::to_string(num_classes));
  }
  if (cfg.is_set("bands") && cfg.bands != scene.bands) {
    throw ConfigError("config expects " + std::to_string(cfg.bands) + " bands, scene has " +
                      std::to_string(scene.bands));
  }
  const IfgNetConfig mcfg = cfg.model_config(static_cast<int>(scene.bands), num_classes);
  const TrainConfig tcfg = cfg.train_config();
  check_patch_fits(mcfg.patch_side, scene);

  const Split split = split_balanced(scene, split_spec(cfg, cfg.seed));
  if (split.train.empty()) throw ConfigError("train split is empty");
  const BandStats stats = compute_band_stats(scene, split.train);
  standardize(scene, stats);
  const auto train = extract_patches(scene, split.train, mcfg.patch_side);
  const auto test = extract_patches(scene, split.test, mcfg.patch_side);

  const fs::path dir = cfg.out;
  fs::create_directories(dir);
  write_text(dir / "run_config.txt", cfg.to_text());
  write_text(dir / "band_stats.txt", stats.to_text());

  IfgNet model(mcfg);
  out << "train: " << train.size() << " train / " << test.size() << " test pixels, "
      << model.parameter_count() << " parameters, variant " << to_string(mcfg.variant) << "\n";
  std::ofstream log(dir / "train_log.txt", std::ios::binary);
  Trainer trainer(model, tcfg);
  trainer.fit(train, [&](const EpochLog& e) {
    const std::string line = e.to_line();
    log << line << "\n";
    log.flush();
    out << line << "\n";
  });
  save_checkpoint(model, dir / "model.ifgk");

  if (test.empty()) {
    write_text(dir / "metrics.txt", "test_pixels=0\n");
    out << "no test pixels; metrics skipped\n";
    return kOk;
  }
  const Scores scores = oa_aa_kappa(evaluate(model, test, tcfg.threads));
  write_text(dir / "metrics.txt", format_report_kv(scores));
  print_scores(scores, out);
  return kOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out) {
  require(cfg, "labels");
  Scores scores;
  if (!cfg.predictions.empty()) {
    const LabelFile pred = read_labels(cfg.predictions);
    const LabelFile truth = read_labels(cfg.labels);
    if (pred.height != truth.height || pred.width != truth.width) {
      throw ShapeError("prediction map and label map differ in size");
    }
    std::uint16_t classes = 0;
    for (auto l : truth.labels) classes = std::max(classes, l);
    for (auto l : pred.labels) classes = std::max(classes, l);
    if (classes == 0) throw ConfigError("eval: no labeled pixels");
    ConfusionMatrix cm(classes);
    for (std::size_t p = 0; p < truth.labels.size(); ++p) {
      if (truth.labels[p] == 0) continue;
      if (pred.labels[p] == 0) throw ConfigError("eval: prediction map has unlabeled pixels");
      cm.accumulate(truth.labels[p] - 1, pred.labels[p] - 1);
    }
    scores = oa_aa_kappa(cm);
  } else {
    for (const char* k : {"checkpoint", "hsi", "lidar"}) require(cfg, k);
    const IfgNet model = load_checkpoint(cfg.checkpoint);
    const IfgNetConfig& mc = model.config();
    SceneCube scene = load_scene(cfg.hsi, cfg.lidar, cfg.labels);
    if (static_cast<int>(scene.bands) != mc.bands) {
      throw ShapeError("checkpoint expects " + std::to_string(mc.bands) + " bands, scene has " +
                       std::to_string(scene.bands));
    }
    if (scene.num_classes() > mc.num_classes) {
      throw ShapeError("scene has " + std::to_string(scene.num_classes()) +
                       " classes, checkpoint predicts " + std::to_string(mc.num_classes));
    }
    check_patch_fits(mc.patch_side, scene);
    const BandStats stats = BandStats::from_text(read_text(stats_path(cfg)));
    standardize(scene, stats);
    const std::uint64_t seed = cfg.is_set("seed") ? cfg.seed : mc.seed;
    const Split split = split_balanced(scene, split_spec(cfg, seed));
    const auto test = extract_patches(scene, split.test, mc.patch_side);
    if (test.empty()) throw ConfigError("eval: test split is empty");
    if (cfg.batch_size < 1) throw ConfigError("batch_size must be positive");
    scores = oa_aa_kappa(evaluate(model, test, threads_from_env(),
                                  static_cast<std::size_t>(cfg.batch_size)));
  }
  print_scores(scores, out);
  if (!cfg.output.empty()) write_text(cfg.output, format_report_kv(scores));
  return kOk;
}

int cmd_predict(const RunConfig& cfg, std::ostream& out) {
  for (const char* k : {"checkpoint", "hsi", "lidar"}) require(cfg, k);
  const IfgNet model = load_checkpoint(cfg.checkpoint);
  const IfgNetConfig& mc = model.config();
  const CubeFile hsi = read_cube(cfg.hsi);
  const CubeFile lidar = read_cube(cfg.lidar);
  if (hsi.height != lidar.height || hsi.width != lidar.width || lidar.channels != 1) {
    throw ShapeError("HSI and LiDAR rasters do not match");
  }
  if (static_cast<int>(hsi.channels) != mc.bands) {
    throw ShapeError("checkpoint expects " + std::to_string(mc.bands) + " bands, scene has " +
                     std::to_string(hsi.channels));
  }
  SceneCube scene;
  scene.height = hsi.height;
  scene.width = hsi.width;
  scene.bands = hsi.channels;
  scene.hsi = hsi.data;
  scene.lidar = lidar.data;
  scene.labels.assign(scene.pixels(), 0);
  check_patch_fits(mc.patch_side, scene);
  standardize(scene, BandStats::from_text(read_text(stats_path(cfg))));

  LabelFile map{scene.height, scene.width, std::vector<std::uint16_t>(scene.pixels(), 0)};
  const int threads = threads_from_env();
  constexpr std::size_t kChunk = 4096;
  for (std::size_t start = 0; start < scene.pixels(); start += kChunk) {
    const std::size_t end = std::min(scene.pixels(), start + kChunk);
    std::vector<PatchSample> batch;
    batch.reserve(end - start);
    for (std::size_t p = start; p < end; ++p) {
      batch.push_back(extract_window(scene, p / scene.width, p % scene.width, mc.patch_side));
    }
    const auto pred = predict_labels(model, batch, threads);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      map.labels[start + i] = static_cast<std::uint16_t>(pred[i] + 1);
    }
  }
  const fs::path target = cfg.output.empty() ? fs::path(cfg.out) / "predictions.ifgl" : fs::path(cfg.output);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  write_labels(target, map);
  out << "predict: wrote " << scene.height << "x" << scene.width << " label map to "
      << target.string() << "\n";
  return kOk;
}

int cmd_gradcheck(const RunConfig& cfg, bool corrupt_backward, std::ostream& out) {
  GradcheckOptions opt;
  opt.seed = cfg.is_set("seed") ? cfg.seed : opt.seed;
  opt.corrupt_backward = corrupt_backward;
  const GradcheckReport report = run_gradcheck(opt);
  out << report.to_text();
  return report.pass() ? kOk : kCheckFailed;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  const SynthSpec spec = cfg.synth_spec();
  const SceneCube scene = synth_scene(spec);
  const ScenePaths paths = write_scene(scene, cfg.out);
  write_text(fs::path(cfg.out) / "synth_spec.txt", spec.to_text());
  out << "synth: wrote " << paths.hsi.string() << ", " << paths.lidar.string() << ", "
      << paths.labels.string() << "\n";
  return kOk;
}

// ---- argument parsing --------------------------------------------------------------

namespace {

struct Command {
  const char* name;
  const char* help;
  std::vector<std::string> keys;
};

const std::vector<Command>& commands() {
  static const std::vector<std::string> model_keys = {
      "patch_side",     "latent_dim",  "variant",  "share_sia_params", "neighborhood_radius",
      "grid_intervals", "grid_degree", "grid_min", "grid_max",         "head_pool"};
  static const std::vector<Command> cmds = [] {
    std::vector<Command> c;
    Command train{"train", "Train a model on a scene and report test metrics",
                  {"hsi", "lidar", "labels", "train_mask", "train_per_class", "out", "epochs",
                   "batch_size", "lr", "seed", "classes", "bands"}};
    train.keys.insert(train.keys.end(), model_keys.begin(), model_keys.end());
    c.push_back(train);
    c.push_back({"eval", "Evaluate a checkpoint (or a prediction map) on the test split",
                 {"checkpoint", "hsi", "lidar", "labels", "train_mask", "train_per_class", "stats",
                  "seed", "batch_size", "predictions", "output"}});
    c.push_back({"predict", "Write a per-pixel label map for a scene",
                 {"checkpoint", "hsi", "lidar", "stats", "out", "output"}});
    c.push_back({"gradcheck", "Compare analytic gradients with finite differences", {"seed"}});
    c.push_back({"synth", "Generate a synthetic HSI + LiDAR scene",
                 {"out", "classes", "height", "width", "bands", "seed", "noise", "spectral_cue",
                  "elevation_cue", "texture_cue", "texture_period", "texture_amplitude",
                  "sites_per_class"}});
    return c;
  }();
  return cmds;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"IFGNet: spatial-frequency fusion of HSI and LiDAR patches with KAN layers", "ifgnet"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::vector<std::pair<std::string, std::string>> flags;
  std::string config_file;
  bool corrupt_backward = false;
  for (const Command& cmd : commands()) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_file, "key=value file; explicit flags take precedence");
    for (const std::string& key : cmd.keys) {
      RunConfig defaults;
      sub->add_option_function<std::string>(
             flag_name(key), [&flags, key](const std::string& v) { flags.emplace_back(key, v); },
             key)
          ->default_str(defaults.get(key));
    }
    if (std::string(cmd.name) == "gradcheck") {
      // Negative control for the test suite.
      sub->add_flag("--corrupt-backward", corrupt_backward)->group("");
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  RunConfig cfg;
  const CLI::App* chosen = app.get_subcommands().front();
  try {
    if (!config_file.empty()) cfg.apply_text(read_text(config_file));
    for (const auto& [k, v] : flags) cfg.set(k, v);
    cfg.subcommand = chosen->get_name();
    const std::string& name = cfg.subcommand;
    if (name == "train") return cmd_train(cfg, out);
    if (name == "eval") return cmd_eval(cfg, out);
    if (name == "predict") return cmd_predict(cfg, out);
    if (name == "gradcheck") return cmd_gradcheck(cfg, corrupt_backward, out);
    if (name == "synth") return cmd_synth(cfg, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}

}  // namespace ifgnet::cli

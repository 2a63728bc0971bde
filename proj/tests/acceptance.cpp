// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "ifgnet/data.hpp"
#include "ifgnet/frequency_aggregation.hpp"
#include "ifgnet/gradcheck.hpp"
#include "ifgnet/metrics.hpp"
#include "ifgnet/model.hpp"
#include "ifgnet/spatial_aggregation.hpp"
#include "ifgnet/spline_kan.hpp"
#include "ifgnet/training.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ifgnet;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("criterion %d %-24s %s  %s\n", id, name, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---- 1 -----------------------------------------------------------------------------

void gradient_fidelity() {
  const auto t0 = Clock::now();
  std::ostringstream sink;
  const int code = cli::cmd_gradcheck(cli::RunConfig{}, false, sink);
  const double secs = seconds_since(t0);
  const GradcheckReport r = run_gradcheck(GradcheckOptions{});
  double modules = 0.0;
  for (const char* m : {"spline-kan", "encoders", "spatial-aggregation", "frequency-aggregation"}) {
    modules = std::max(modules, r.max_error(m));
  }
  const double model = r.max_error("model-head");
  const bool pass = code == 0 && modules <= 1e-5 && model <= 1e-4 && secs < 60.0;
  report(1, "gradient-fidelity", pass,
         "modules " + fmt("%.2e", modules) + " (<=1e-5), end-to-end " + fmt("%.2e", model) +
             " (<=1e-4), " + fmt("%.2f", secs) + " s (<60)");
}

// ---- 2 -----------------------------------------------------------------------------

void spectral_correctness() {
  Rng rng(2002);
  const auto t0 = Clock::now();
  double dft_err = 0.0, rt_err = 0.0, parseval = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int side = 1 + static_cast<int>(rng.below(9));
    const std::size_t d = 1 + rng.below(4);
    const auto px = static_cast<std::size_t>(side * side);
    const DenseTensor f = testutil::random_tensor({px, d}, rng);
    const ComplexField s = dft2(f);
    for (std::size_t ch = 0; ch < d; ++ch) {
      const auto want = oracle::oracle_dft(f, ch, side);
      for (std::size_t i = 0; i < px; ++i) {
        dft_err = std::max(dft_err, std::abs(s.re(i, ch) - want[i].real()));
        dft_err = std::max(dft_err, std::abs(s.im(i, ch) - want[i].imag()));
      }
    }
    rt_err = std::max(rt_err, testutil::max_abs_diff(idft2(s), f));
    double e_space = 0.0, e_freq = 0.0;
    for (double v : f.data()) e_space += v * v;
    for (std::size_t i = 0; i < s.re.size(); ++i) e_freq += s.re[i] * s.re[i] + s.im[i] * s.im[i];
    e_space *= static_cast<double>(px);
    parseval = std::max(parseval, std::abs(e_space - e_freq) / e_space);
  }
  const double secs = seconds_since(t0);
  const bool pass = dft_err <= 1e-10 && rt_err <= 1e-10 && parseval <= 1e-8 && secs < 10.0;
  report(2, "spectral-correctness", pass,
         "dft " + fmt("%.2e", dft_err) + " (<=1e-10), round trip " + fmt("%.2e", rt_err) +
             " (<=1e-10), Parseval " + fmt("%.2e", parseval) + " (<=1e-8), 1000 fields in " +
             fmt("%.2f", secs) + " s (<10)");
}

// ---- 3 -----------------------------------------------------------------------------

void spline_correctness() {
  Rng rng(3003);
  const SplineGrid grid;
  double unity = 0.0;
  int max_support = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto b = bspline_basis(rng.uniform(grid.t_min, grid.t_max), grid);
    double sum = 0.0;
    int nonzero = 0;
    for (double v : b) {
      sum += v;
      nonzero += v != 0.0;
    }
    unity = std::max(unity, std::abs(sum - 1.0));
    max_support = std::max(max_support, nonzero);
  }
  double oracle_err = 0.0;
  const SplineGrid small{-1.0, 1.0, 4, 3};
  auto compare = [&](double x, const SplineGrid& g) {
    const auto got = bspline_basis(x, g);
    const auto want = oracle::oracle_basis(x, g.t_min, g.t_max, g.intervals, g.degree);
    for (std::size_t i = 0; i < got.size(); ++i) oracle_err = std::max(oracle_err, std::abs(got[i] - want[i]));
  };
  compare(0.1, small);
  for (int i = 0; i < 1000; ++i) compare(rng.uniform(grid.t_min, grid.t_max), grid);
  const bool pass = unity <= 1e-12 && max_support <= grid.degree + 1 && oracle_err <= 1e-12;
  report(3, "spline-correctness", pass,
         "partition of unity " + fmt("%.2e", unity) + " (<=1e-12), max support " +
             std::to_string(max_support) + " (<=" + std::to_string(grid.degree + 1) +
             "), Cox-de Boor " + fmt("%.2e", oracle_err) + " (<=1e-12)");
}

// ---- 4 -----------------------------------------------------------------------------

void sia_oracle() {
  Rng rng(4004);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int side = 1 + static_cast<int>(rng.below(5));
    const std::size_t d = 1 + rng.below(8);
    SiaUnit unit(d, NeighborhoodConfig::with_radius(1), SplineGrid{});
    unit.initialize(rng);
    for (double& s : unit.kan().scale_spline.value.data()) s = rng.uniform(0.5, 1.5);
    const auto px = static_cast<std::size_t>(side * side);
    const DenseTensor a = testutil::random_tensor({px, d}, rng);
    const DenseTensor b = testutil::random_tensor({px, d}, rng);
    const DenseTensor want = oracle::oracle_sia(unit.kan(), a, b, side, 1, 1.0);
    worst = std::max(worst, testutil::max_abs_diff(sia_forward(unit, a, b), want));
  }
  report(4, "sia-oracle", worst <= 1e-12,
         "max |diff| " + fmt("%.2e", worst) + " (<=1e-12) over 50 instances, P<=5, D<=8");
}

// ---- 5 -----------------------------------------------------------------------------

void metrics_oracle() {
  Rng rng(5005);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 2 + rng.below(7);
    std::vector<std::uint64_t> counts(c * c);
    std::vector<std::vector<double>> table(c, std::vector<double>(c));
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        counts[i * c + j] = rng.below(i == j ? 60 : 15);
      }
    }
    counts[0] += 1;
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < c; ++j) table[i][j] = static_cast<double>(counts[i * c + j]);
    }
    const Scores s = oa_aa_kappa(ConfusionMatrix(c, counts));
    const auto o = oracle::oracle_metrics(table);
    worst = std::max({worst, std::abs(s.oa - o.oa), std::abs(s.aa - o.aa), std::abs(s.kappa - o.kappa)});
  }
  const double kappa = oa_aa_kappa(ConfusionMatrix(2, {2, 0, 1, 1})).kappa;
  report(5, "metrics-oracle", worst <= 1e-12 && kappa == 0.5,
         "max |diff| " + fmt("%.2e", worst) + " (<=1e-12) over 100 matrices, [[2,0],[1,1]] kappa " +
             fmt("%.17g", kappa) + " (==0.5)");
}

// ---- 6 and 7: synthetic training runs -------------------------------------------------

struct RunResult {
  double train_oa = 0.0;
  double test_oa = 0.0;
  double seconds = 0.0;
};

RunResult train_on_synth(const SynthSpec& spec, std::size_t per_class, Variant variant,
                         std::uint64_t seed, int epochs) {
  const auto t0 = Clock::now();
  SceneCube scene = synth_scene(spec);
  SplitSpec sp;
  sp.train_per_class = per_class;
  sp.seed = seed;
  const Split split = split_balanced(scene, sp);
  standardize(scene, compute_band_stats(scene, split.train));
  const auto train = extract_patches(scene, split.train, 5);
  const auto test = extract_patches(scene, split.test, 5);
  IfgNetConfig mc;
  mc.patch_side = 5;
  mc.bands = static_cast<int>(spec.bands);
  mc.latent_dim = 32;
  mc.num_classes = spec.num_classes;
  mc.variant = variant;
  mc.seed = seed;
  IfgNet model(mc);
  TrainConfig tc;
  tc.epochs = epochs;
  tc.seed = seed;
  tc.threads = threads_from_env();
  Trainer(model, tc).fit(train);
  RunResult r;
  r.train_oa = oa_aa_kappa(evaluate(model, train, tc.threads)).oa;
  r.test_oa = oa_aa_kappa(evaluate(model, test, tc.threads)).oa;
  r.seconds = seconds_since(t0);
  return r;
}

void end_to_end() {
  SynthSpec spec;  // C=4, 64x64, T=8, noise 0.1
  spec.seed = 1;
  const RunResult r = train_on_synth(spec, 150, Variant::kFull, 1, 50);
  const bool pass = r.train_oa >= 0.99 && r.test_oa >= 0.90 && r.seconds < 300.0;
  report(6, "end-to-end-learning", pass,
         "train OA " + fmt("%.2f", 100 * r.train_oa) + "% (>=99), test OA " +
             fmt("%.2f", 100 * r.test_oa) + "% (>=90), " + fmt("%.1f", r.seconds) + " s (<300)");
}

double median3(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[1];
}

void ablation() {
  // All three cues on a 48x48 scene, 100 train pixels per class, 15 epochs.
  std::vector<double> full, spatial, frequency;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SynthSpec spec;
    spec.height = spec.width = 48;
    spec.seed = seed;
    full.push_back(train_on_synth(spec, 100, Variant::kFull, seed, 15).test_oa);
    spatial.push_back(train_on_synth(spec, 100, Variant::kSpatialOnly, seed, 15).test_oa);
    frequency.push_back(train_on_synth(spec, 100, Variant::kFrequencyOnly, seed, 15).test_oa);
  }
  const double mf = 100 * median3(full), ms = 100 * median3(spatial), mq = 100 * median3(frequency);

  // Classes separable by texture alone.
  SynthSpec tex;
  tex.spectral_cue = false;
  tex.elevation_cue = false;
  tex.seed = 1;
  const double tex_oa = 100 * train_on_synth(tex, 150, Variant::kFrequencyOnly, 1, 50).test_oa;
  const double chance = 100.0 / tex.num_classes;

  const bool pass = mf >= ms - 1.0 && mf >= mq - 1.0 && tex_oa >= chance + 20.0;
  report(7, "ablation-direction", pass,
         "median test OA full " + fmt("%.2f", mf) + " vs spatial " + fmt("%.2f", ms) +
             " / frequency " + fmt("%.2f", mq) + " (full >= each - 1.0); texture-only frequency " +
             fmt("%.2f", tex_oa) + "% (>= chance " + fmt("%.0f", chance) + " + 20)");
}

// ---- 8 -----------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void reproducibility() {
  testutil::TempDir dir("acceptance_repro");
  std::ostringstream sink;
  const auto scene = (dir / "scene").string();
  int code = cli::run({"ifgnet", "synth", "--out", scene, "--height", "24", "--width", "24",
                       "--seed", "8"},
                      sink, sink);
  bool same = code == 0;
  std::vector<std::string> files = {"model.ifgk", "metrics.txt", "train_log.txt"};
  for (const char* run : {"a", "b"}) {
    code = cli::run({"ifgnet", "train", "--hsi", scene + "/hsi.ifgc", "--lidar", scene + "/lidar.ifgc",
                     "--labels", scene + "/labels.ifgl", "--train-per-class", "30", "--epochs", "3",
                     "--latent-dim", "8", "--seed", "8", "--out", (dir / run).string()},
                    sink, sink);
    same = same && code == 0;
  }
  std::size_t bytes = 0;
  for (const auto& f : files) {
    const std::string a = slurp(dir / "a" / f);
    same = same && !a.empty() && a == slurp(dir / "b" / f);
    bytes += a.size();
  }
  report(8, "reproducibility", same,
         std::string(same ? "identical" : "different") + " checkpoint, metrics and log (" +
             std::to_string(bytes) + " bytes compared)");
}

// ---- 9 -----------------------------------------------------------------------------

void variant_algebra() {
  IfgNetConfig c;
  c.patch_side = 5;
  c.bands = 8;
  c.latent_dim = 16;
  c.num_classes = 4;
  c.seed = 9009;
  IfgNetConfig cs = c, cf = c;
  cs.variant = Variant::kSpatialOnly;
  cf.variant = Variant::kFrequencyOnly;
  const IfgNet full(c), spatial(cs), frequency(cf);
  Rng rng(9);
  int mismatches = 0;
  const int samples = 25;
  for (int i = 0; i < samples; ++i) {
    PatchSample s;
    s.hsi = testutil::random_tensor({25, 8}, rng);
    s.lidar = testutil::random_tensor({25, 1}, rng);
    mismatches += full.forward(s, BranchMask{false, true}) != spatial.forward(s);
    mismatches += full.forward(s, BranchMask{true, false}) != frequency.forward(s);
  }
  report(9, "variant-algebra", mismatches == 0,
         std::to_string(2 * samples - mismatches) + "/" + std::to_string(2 * samples) +
             " masked full-model logit vectors bit-identical to the single-branch variant");
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> checks = {
      gradient_fidelity, spectral_correctness, spline_correctness, sia_oracle, metrics_oracle,
      end_to_end,        ablation,             reproducibility,    variant_algebra};
  for (const auto& check : checks) {
    try {
      check();
    } catch (const std::exception& e) {
      std::printf("criterion error: %s\n", e.what());
      ++failures;
    }
  }
  std::printf("acceptance: %s (%d failing)\n", failures == 0 ? "PASS" : "FAIL", failures);
  return failures == 0 ? 0 : 1;
}

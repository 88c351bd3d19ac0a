// dgp: dense GP few-shot segmentation engine.
//
//   dgp run EPISODE_DIR [--out DIR] [--dump-maps]
//   dgp sweep --shots 1,5,10 --episodes 200 [--out DIR]
//   dgp bench --shots 1,2,4,8 [--runs 100] [--out DIR]
//   dgp selftest
//   dgp dump FILE
//
// Exit status: 0 success, 1 numerical failure, 2 bad input or usage.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dgp/episode.hpp"
#include "dgp/error.hpp"
#include "dgp/evaluation.hpp"
#include "dgp/oracles.hpp"
#include "dgp/tensor_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitNumerical = 1;
constexpr int kExitInput = 2;

struct PipelineFlags {
  std::string kernel = "se";
  double sigma_f_sq = 1.0;
  double noise_sq = 0.1;
  std::optional<double> length_sq;
  long window = 5;
  std::vector<long> strides{16, 32};
  double threshold = 0.0;
  std::string encoding = "pm1";
  long channels = 1;
  std::uint64_t encoding_seed = 0;

  void add_to(CLI::App& app) {
    app.add_option("--kernel", kernel, "Kernel: se | exp | linear")
        ->check(CLI::IsMember({"se", "exp", "linear"}))
        ->capture_default_str();
    app.add_option("--sigma-f-sq", sigma_f_sq, "Prior signal variance")->capture_default_str();
    app.add_option("--noise-sq", noise_sq, "Observation noise variance")->capture_default_str();
    app.add_option("--length-sq", length_sq, "Squared length scale (default sqrt(D) per level)");
    app.add_option("--window", window, "Covariance window N (odd)")->capture_default_str();
    app.add_option("--strides", strides, "Level strides")->delimiter(',')->capture_default_str();
    app.add_option("--threshold", threshold, "Readout threshold on the fused mean")->capture_default_str();
    app.add_option("--encoding", encoding, "Mask encoding: pm1 | channels")
        ->check(CLI::IsMember({"pm1", "channels"}))
        ->capture_default_str();
    app.add_option("--channels", channels, "Output channels E for --encoding channels")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--encoding-seed", encoding_seed, "Seed of the channel basis")->capture_default_str();
  }

  dgp::PipelineConfig config() const {
    dgp::PipelineConfig cfg;
    cfg.kernel = *dgp::parse_kernel_kind(kernel);
    cfg.sigma_f_sq = sigma_f_sq;
    cfg.noise_sq = noise_sq;
    cfg.length_sq = length_sq;
    cfg.window = window;
    cfg.readout_threshold = threshold;
    if (encoding == "channels") {
      cfg.encoding = {dgp::MaskEncodingKind::Channels, channels, encoding_seed};
    }
    dgp::KernelConfig probe = dgp::KernelConfig::defaults(cfg.kernel, 1);
    probe.sigma_f_sq = sigma_f_sq;
    probe.noise_sq = noise_sq;
    if (length_sq) probe.length_sq = *length_sq;
    probe.validate();
    cfg.validate(level_strides());
    return cfg;
  }

  std::vector<Eigen::Index> level_strides() const { return {strides.begin(), strides.end()}; }
};

struct SyntheticFlags {
  std::string preset = "standard";
  std::uint64_t seed = 0;
  std::optional<long> image_size;
  std::vector<long> dims;

  void add_to(CLI::App& app) {
    app.add_option("--preset", preset, "Synthetic task: standard | xor")
        ->check(CLI::IsMember({"standard", "xor"}))
        ->capture_default_str();
    app.add_option("--seed", seed, "Root seed")->capture_default_str();
    app.add_option("--image-size", image_size, "Image side in pixels");
    app.add_option("--dims", dims, "Feature dim per level")->delimiter(',');
  }

  dgp::SyntheticEpisodeSpec spec(const std::vector<Eigen::Index>& strides) const {
    dgp::SyntheticEpisodeSpec s = preset == "xor" ? dgp::xor_spec() : dgp::standard_spec();
    s.seed = seed;
    if (image_size) s.image_size = *image_size;
    s.level_strides = strides;
    if (!dims.empty()) {
      s.level_dims.assign(dims.begin(), dims.end());
    } else {
      s.level_dims.resize(strides.size(), s.level_dims.back());
    }
    s.validate();
    return s;
  }
};

void print_json(const json& j) { std::cout << j.dump() << std::endl; }

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

int cmd_run(const std::string& episode_dir, const PipelineFlags& flags, const std::string& out,
            bool dump_maps) {
  const dgp::PipelineConfig cfg = flags.config();
  const dgp::Episode ep = dgp::load_episode_dir(episode_dir, flags.level_strides());
  spdlog::info("episode {}: K={} levels={} image={}x{}", episode_dir, ep.shots(), ep.level_strides.size(),
               ep.image_height(), ep.image_width());

  dgp::PipelineConfig run_cfg = cfg;
  run_cfg.mean_only = !dump_maps;
  const dgp::EpisodeResult result = dgp::run_episode(ep, run_cfg);

  const fs::path dir = prepare_out(out);
  const fs::path pred_path = dir / "pred_mask.dgpt";
  dgp::save_tensor(dgp::from_mask(result.prediction), pred_path);

  json line;
  line["episode"] = episode_dir;
  line["shots"] = ep.shots();
  line["pred_mask"] = pred_path.string();
  line["iou"] = ep.query_mask.size() ? json(dgp::iou(result.prediction, ep.query_mask)) : json(nullptr);
  json levels = json::array();
  for (std::size_t a = 0; a < result.levels.size(); ++a) {
    const auto& lv = result.levels[a];
    json l{{"stride", ep.level_strides[a]}, {"S", lv.support_size}, {"Q", lv.posterior.mean.rows()}};
    if (dump_maps) {
      const fs::path zmu = dir / ("zmu_l" + std::to_string(a) + ".dgpt");
      const fs::path zsigma = dir / ("zsigma_l" + std::to_string(a) + ".dgpt");
      dgp::save_tensor(dgp::spatial_map_to_tensor(lv.mean_map), zmu);
      dgp::save_tensor(dgp::spatial_map_to_tensor(*lv.cov_window), zsigma);
      l["zmu"] = zmu.string();
      l["zsigma"] = zsigma.string();
    }
    levels.push_back(std::move(l));
  }
  line["levels"] = std::move(levels);
  print_json(line);
  return 0;
}

int cmd_sweep(const PipelineFlags& flags, const SyntheticFlags& synth, const std::vector<long>& shots,
              std::size_t episodes, std::size_t runs, unsigned workers, const std::string& out) {
  if (shots.empty()) throw dgp::Error(dgp::ErrorKind::InvalidArgument, "--shots must not be empty");
  const dgp::PipelineConfig cfg = flags.config();
  const dgp::SyntheticEpisodeSpec spec = synth.spec(flags.level_strides());
  const std::vector<Eigen::Index> k(shots.begin(), shots.end());
  const auto rows = dgp::kshot_sweep(spec, cfg, k, {episodes, runs, workers, 5});

  const fs::path path = prepare_out(out) / "kshot.csv";
  std::ofstream csv(path);
  dgp::write_kshot_csv(csv, rows);
  if (!csv) throw dgp::Error(dgp::ErrorKind::Io, "write failed for " + path.string());
  for (const auto& r : rows) {
    print_json({{"K", r.shots}, {"mean_miou", r.mean_miou}, {"std", r.std_miou}});
  }
  print_json({{"csv", path.string()}});
  return 0;
}

int cmd_bench(const PipelineFlags& flags, const SyntheticFlags& synth, const std::vector<long>& shots,
              std::size_t runs, const std::string& out) {
  const dgp::PipelineConfig cfg = flags.config();
  const dgp::SyntheticEpisodeSpec spec = synth.spec(flags.level_strides());
  const std::vector<Eigen::Index> k(shots.begin(), shots.end());
  const auto report = dgp::bench_runtimes(spec, cfg, k, runs);

  const fs::path path = prepare_out(out) / "bench.csv";
  std::ofstream csv(path);
  dgp::write_bench_csv(csv, report.rows);
  if (!csv) throw dgp::Error(dgp::ErrorKind::Io, "write failed for " + path.string());
  print_json({{"csv", path.string()},
              {"rows", report.rows.size()},
              {"fit_exponent", report.fit_exponent ? json(*report.fit_exponent) : json(nullptr)}});
  return 0;
}

int cmd_selftest(std::size_t instances, std::uint64_t seed, double perturb) {
  const auto gp = dgp::oracle::gp_oracle_suite(instances, seed, 1e-6, perturb);
  const auto win = dgp::oracle::window_oracle_suite(instances, seed + 1, 8, perturb);
  bool ok = true;
  for (const auto& s : {gp, win}) {
    print_json({{"suite", s.name},
                {"cases", s.cases},
                {"failures", s.failures},
                {"max_error", s.max_error},
                {"passed", s.passed()}});
    ok = ok && s.passed();
  }
  return ok ? 0 : kExitNumerical;
}

int cmd_dump(const std::string& file, std::size_t limit) {
  const dgp::DenseTensor t = dgp::load_tensor(file);
  std::cout << "dtype: " << (t.dtype() == dgp::DType::F32 ? "f32" : "f64") << "\nshape: [";
  for (std::size_t i = 0; i < t.rank(); ++i) std::cout << (i ? ", " : "") << t.shape()[i];
  std::cout << "]\nelements: " << t.size() << "\n";
  const std::size_t last = t.shape().back();
  const std::size_t shown = std::min(limit, t.size());
  for (std::size_t i = 0; i < shown; ++i) {
    std::cout << t.at(i) << ((i + 1) % last == 0 || i + 1 == shown ? "\n" : " ");
  }
  if (shown < t.size()) std::cout << "... (" << t.size() - shown << " more)\n";
  return 0;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("dgp");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("DGP_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Dense Gaussian-process few-shot segmentation"};
  app.require_subcommand(1);

  PipelineFlags run_flags, sweep_flags, bench_flags;
  SyntheticFlags sweep_synth, bench_synth;
  std::string episode_dir, out = ".", dump_file;
  bool dump_maps = false;
  std::vector<long> shots{1, 5, 10};
  std::vector<long> bench_shots{1, 2, 4, 8};
  std::size_t episodes = 200, folds = 5, bench_runs = 100, instances = 20, limit = 64;
  unsigned workers = 1;
  std::uint64_t selftest_seed = 1;
  double perturb = 0.0;

  auto* run = app.add_subcommand("run", "Segment the query of one episode directory");
  run->add_option("episode_dir", episode_dir, "Episode directory")->required()->check(CLI::ExistingDirectory);
  run->add_option("--out", out, "Output directory")->capture_default_str();
  run->add_flag("--dump-maps", dump_maps, "Also write z_mu / z_sigma maps per level");
  run_flags.add_to(*run);

  auto* sweep = app.add_subcommand("sweep", "K-shot sweep on synthetic episodes; writes kshot.csv");
  sweep->add_option("--shots", shots, "Support sizes")->delimiter(',')->capture_default_str();
  sweep->add_option("--episodes", episodes, "Episodes per K")->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--folds", folds, "Folds for the std column")->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_option("--out", out, "Output directory")->capture_default_str();
  sweep_flags.add_to(*sweep);
  sweep_synth.add_to(*sweep);

  auto* bench = app.add_subcommand("bench", "Per-phase runtimes; writes bench.csv");
  bench->add_option("--shots", bench_shots, "Support sizes")->delimiter(',')->capture_default_str();
  bench->add_option("--runs", bench_runs, "Repetitions per point")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--out", out, "Output directory")->capture_default_str();
  bench_flags.add_to(*bench);
  bench_synth.add_to(*bench);

  auto* selftest = app.add_subcommand("selftest", "Oracle-equivalence and window-index suites");
  selftest->add_option("--instances", instances, "Random cases per suite and kernel")->capture_default_str();
  selftest->add_option("--seed", selftest_seed, "Seed")->capture_default_str();
  selftest->add_option("--perturb", perturb, "Offset injected into the library output")->capture_default_str();

  auto* dump = app.add_subcommand("dump", "Print a .dgpt tensor");
  dump->add_option("file", dump_file, "Tensor file")->required();
  dump->add_option("--limit", limit, "Maximum elements shown")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*run) return cmd_run(episode_dir, run_flags, out, dump_maps);
    if (*sweep) return cmd_sweep(sweep_flags, sweep_synth, shots, episodes, folds, workers, out);
    if (*bench) return cmd_bench(bench_flags, bench_synth, bench_shots, bench_runs, out);
    if (*selftest) return cmd_selftest(instances, selftest_seed, perturb);
    if (*dump) return cmd_dump(dump_file, limit);
  } catch (const dgp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.numerical() ? kExitNumerical : kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitInput;
}

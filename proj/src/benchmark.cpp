#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include "dgp/error.hpp"
#include "dgp/evaluation.hpp"

namespace dgp {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Samples {
  std::vector<double> ms;

  BenchRow row(std::string phase, Eigen::Index s) const {
    double mean = 0.0;
    for (double v : ms) mean += v;
    mean /= static_cast<double>(ms.size());
    double var = 0.0;
    for (double v : ms) var += (v - mean) * (v - mean);
    const double sd = ms.size() > 1 ? std::sqrt(var / static_cast<double>(ms.size() - 1)) : 0.0;
    return {std::move(phase), s, mean, sd};
  }
};

// Keeps results observable so timed work is not elided.
volatile double g_sink = 0.0;

}  // namespace

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "log-log fit needs at least two paired samples");
  }
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw Error(ErrorKind::InvalidArgument, "log-log fit needs distinct sizes");
  return sxy / sxx;
}

BenchReport bench_runtimes(const SyntheticEpisodeSpec& spec, const PipelineConfig& cfg,
                           std::span<const Eigen::Index> shots, std::size_t runs) {
  BenchReport report;
  if (shots.empty()) return report;
  if (runs == 0) throw Error(ErrorKind::InvalidArgument, "runs must be >= 1");

  std::vector<double> sizes;
  std::vector<double> fit_ms;
  for (auto k : shots) {
    SyntheticEpisodeSpec s = spec;
    s.shots = k;
    const Episode ep = generate_episode(s);
    ep.validate();
    cfg.validate(ep.level_strides);
    const Eigen::Index h0 = ep.image_height();
    const Eigen::Index w0 = ep.image_width();

    for (std::size_t a = 0; a < ep.level_strides.size(); ++a) {
      const FeatureMap& query = ep.query[a];
      const KernelConfig kernel = cfg.kernel_for(a, query.dim());
      Samples encode, fitting, predicting, window, readout;
      Eigen::Index support_size = 0;

      for (std::size_t run = 0; run < runs; ++run) {
        auto t0 = Clock::now();
        auto [xs, ys] = level_support(ep, cfg, a);
        encode.ms.push_back(elapsed_ms(t0));
        support_size = xs.rows();

        t0 = Clock::now();
        const auto gp = fit(xs, ys, kernel);
        fitting.ms.push_back(elapsed_ms(t0));

        t0 = Clock::now();
        const auto post = predict(gp, query.features, !cfg.mean_only);
        predicting.ms.push_back(elapsed_ms(t0));

        t0 = Clock::now();
        if (post.covariance) {
          const auto win =
              extract_cov_window(*post.covariance, query.height, query.width, cfg.window, cfg.pad);
          g_sink = g_sink + win.data(0, 0);
        }
        window.ms.push_back(elapsed_ms(t0));

        t0 = Clock::now();
        const MeanMap mean = unflatten_mean(post.mean, query.height, query.width);
        const Mask pred = threshold_map(upsample_bilinear(mean.channel(0), h0, w0), cfg.readout_threshold);
        readout.ms.push_back(elapsed_ms(t0));
        g_sink = g_sink + static_cast<double>(pred.count());
      }

      report.rows.push_back(encode.row("mask_encode", support_size));
      report.rows.push_back(fitting.row("fit", support_size));
      report.rows.push_back(predicting.row("predict", support_size));
      report.rows.push_back(window.row("window", support_size));
      report.rows.push_back(readout.row("readout", support_size));
      sizes.push_back(static_cast<double>(support_size));
      fit_ms.push_back(report.rows[report.rows.size() - 4].mean_ms);
    }
  }

  bool distinct = false;
  for (double s : sizes) distinct |= s != sizes.front();
  if (distinct) report.fit_exponent = loglog_slope(sizes, fit_ms);
  return report;
}

void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows) {
  out << "phase,S,mean_ms,std_ms\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%ld,%.6f,%.6f\n", r.phase.c_str(),
                  static_cast<long>(r.support_size), r.mean_ms, r.std_ms);
    out << buf;
  }
}

}  // namespace dgp

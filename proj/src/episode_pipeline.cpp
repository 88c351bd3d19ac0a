#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "dgp/episode.hpp"
#include "dgp/error.hpp"

namespace dgp {
namespace {

std::string extent_string(Eigen::Index h, Eigen::Index w) {
  return std::to_string(h) + "x" + std::to_string(w);
}

}  // namespace

Eigen::Index Episode::image_height() const {
  return support.empty() ? query_mask.rows() : support.front().mask.rows();
}

Eigen::Index Episode::image_width() const {
  return support.empty() ? query_mask.cols() : support.front().mask.cols();
}

void Episode::validate() const {
  if (support.empty()) throw Error(ErrorKind::InvalidArgument, "episode has no support samples");
  if (level_strides.empty()) throw Error(ErrorKind::InvalidArgument, "episode has no levels");
  const std::size_t levels = level_strides.size();
  if (query.size() != levels) {
    throw Error(ErrorKind::ShapeMismatch, "query has " + std::to_string(query.size()) +
                                              " levels, expected " + std::to_string(levels));
  }
  const Eigen::Index h0 = image_height();
  const Eigen::Index w0 = image_width();
  if (h0 < 1 || w0 < 1) throw Error(ErrorKind::ShapeMismatch, "empty support mask");
  if (query_mask.size() != 0 && (query_mask.rows() != h0 || query_mask.cols() != w0)) {
    throw Error(ErrorKind::ShapeMismatch, "query mask " +
                                              extent_string(query_mask.rows(), query_mask.cols()) +
                                              " vs support " + extent_string(h0, w0));
  }
  for (std::size_t k = 0; k < support.size(); ++k) {
    const auto& s = support[k];
    if (s.mask.rows() != h0 || s.mask.cols() != w0) {
      throw Error(ErrorKind::ShapeMismatch, "support " + std::to_string(k) + " mask " +
                                                extent_string(s.mask.rows(), s.mask.cols()) +
                                                " vs " + extent_string(h0, w0));
    }
    if (s.levels.size() != levels) {
      throw Error(ErrorKind::ShapeMismatch, "support " + std::to_string(k) + " has " +
                                                std::to_string(s.levels.size()) + " levels");
    }
  }
  for (std::size_t a = 0; a < levels; ++a) {
    const Eigen::Index stride = level_strides[a];
    if (stride < 1 || h0 % stride != 0 || w0 % stride != 0) {
      throw Error(ErrorKind::NonDivisibleResolution,
                  "level " + std::to_string(a) + ": image " + extent_string(h0, w0) +
                      " not divisible by stride " + std::to_string(stride));
    }
    const Eigen::Index h = h0 / stride;
    const Eigen::Index w = w0 / stride;
    const Eigen::Index d = query[a].dim();
    auto check = [&](const FeatureMap& f, const std::string& who) {
      if (f.height != h || f.width != w || f.features.rows() != h * w) {
        throw Error(ErrorKind::ShapeMismatch, who + " level " + std::to_string(a) + " features " +
                                                  extent_string(f.height, f.width) +
                                                  ", expected " + extent_string(h, w));
      }
      if (f.dim() != d || d < 1) {
        throw Error(ErrorKind::DimensionMismatch, who + " level " + std::to_string(a) +
                                                      " feature dim " + std::to_string(f.dim()) +
                                                      " vs query " + std::to_string(d));
      }
    };
    check(query[a], "query");
    for (std::size_t k = 0; k < support.size(); ++k) {
      check(support[k].levels[a], "support " + std::to_string(k));
    }
  }
}

KernelConfig PipelineConfig::kernel_for(std::size_t level, Eigen::Index feature_dim) const {
  if (!level_kernels.empty()) return level_kernels.at(level);
  KernelConfig k = KernelConfig::defaults(kernel, feature_dim);
  k.sigma_f_sq = sigma_f_sq;
  k.noise_sq = noise_sq;
  if (length_sq) k.length_sq = *length_sq;
  k.length_sq *= length_sq_scale;
  return k;
}

void PipelineConfig::validate(const std::vector<Eigen::Index>& level_strides) const {
  if (window < 1 || window % 2 == 0) {
    throw Error(ErrorKind::InvalidArgument, "window must be odd, got " + std::to_string(window));
  }
  if (!(length_sq_scale > 0.0)) throw Error(ErrorKind::InvalidArgument, "length_sq_scale must be > 0");
  if (encoding.output_dim() < 1) throw Error(ErrorKind::InvalidArgument, "encoding needs E >= 1");
  if (!level_kernels.empty() && level_kernels.size() != level_strides.size()) {
    throw Error(ErrorKind::InvalidArgument, std::to_string(level_kernels.size()) +
                                                " level kernels for " +
                                                std::to_string(level_strides.size()) + " levels");
  }
  for (auto stride : level_strides) {
    if (stride < 1 || support_stride_target % stride != 0) {
      throw Error(ErrorKind::InvalidArgument,
                  "support stride " + std::to_string(support_stride_target) +
                      " is not a multiple of level stride " + std::to_string(stride));
    }
  }
  for (const auto& k : level_kernels) k.validate();
}

Eigen::MatrixXd downsample_mask(const Mask& mask, Eigen::Index stride) {
  if (stride < 1 || mask.rows() % stride != 0 || mask.cols() % stride != 0) {
    throw Error(ErrorKind::NonDivisibleResolution,
                "mask " + extent_string(mask.rows(), mask.cols()) + " not divisible by stride " +
                    std::to_string(stride));
  }
  const Eigen::Index h = mask.rows() / stride;
  const Eigen::Index w = mask.cols() / stride;
  const double area = static_cast<double>(stride * stride);
  Eigen::MatrixXd out(h, w);
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) {
      out(r, c) = static_cast<double>(mask.block(r * stride, c * stride, stride, stride).count()) / area;
    }
  }
  return out;
}

Eigen::MatrixXd encode_mask(const Mask& mask, Eigen::Index level_stride,
                            const MaskEncoding& encoding) {
  const Eigen::MatrixXd avg = downsample_mask(mask, level_stride);
  const Eigen::Index h = avg.rows();
  const Eigen::Index w = avg.cols();
  const Eigen::Index e = encoding.output_dim();
  if (e < 1) throw Error(ErrorKind::InvalidArgument, "encoding needs E >= 1");

  Eigen::MatrixXd y(h * w, e);
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < w; ++c) y(r * w + c, 0) = 2.0 * avg(r, c) - 1.0;
  }
  if (e == 1) return y;

  // Smooth basis cos(2 pi (fx u + fy v) + phase) over normalized cell centres,
  // so the same channel means the same thing at every level.
  std::mt19937_64 rng(encoding.seed);
  std::uniform_real_distribution<double> freq(0.5, 2.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  for (Eigen::Index ch = 1; ch < e; ++ch) {
    const double fx = freq(rng);
    const double fy = freq(rng);
    const double ph = phase(rng);
    for (Eigen::Index r = 0; r < h; ++r) {
      const double v = (static_cast<double>(r) + 0.5) / static_cast<double>(h);
      for (Eigen::Index c = 0; c < w; ++c) {
        const double u = (static_cast<double>(c) + 0.5) / static_cast<double>(w);
        const double basis = std::cos(2.0 * std::numbers::pi * (fx * u + fy * v) + ph);
        y(r * w + c, ch) = y(r * w + c, 0) * basis;
      }
    }
  }
  return y;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> grid_subsample(const FeatureMap& x,
                                                           const Eigen::Ref<const Eigen::MatrixXd>& y,
                                                           Eigen::Index factor) {
  if (factor < 1) throw Error(ErrorKind::InvalidArgument, "subsample factor must be >= 1");
  if (x.features.rows() != x.cells() || y.rows() != x.cells()) {
    throw Error(ErrorKind::DimensionMismatch, "grid " + extent_string(x.height, x.width) + " with " +
                                                  std::to_string(x.features.rows()) +
                                                  " feature rows and " + std::to_string(y.rows()) +
                                                  " target rows");
  }
  const Eigen::Index offset = factor / 2;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = offset; r < x.height; r += factor) {
    for (Eigen::Index c = offset; c < x.width; c += factor) keep.push_back(r * x.width + c);
  }
  if (keep.empty()) {
    throw Error(ErrorKind::DegenerateGrid, "factor " + std::to_string(factor) + " selects nothing from " +
                                               extent_string(x.height, x.width));
  }
  const auto n = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd xs(n, x.dim());
  Eigen::MatrixXd ys(n, y.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    xs.row(i) = x.features.row(keep[i]);
    ys.row(i) = y.row(keep[i]);
  }
  return {std::move(xs), std::move(ys)};
}

Eigen::MatrixXd upsample_bilinear(const Eigen::Ref<const Eigen::MatrixXd>& map, Eigen::Index height,
                                  Eigen::Index width) {
  const Eigen::Index h = map.rows();
  const Eigen::Index w = map.cols();
  if (h < 1 || w < 1 || height < h || width < w) {
    throw Error(ErrorKind::ShapeMismatch, "cannot upsample " + extent_string(h, w) + " to " +
                                              extent_string(height, width));
  }
  const double sy = height > 1 ? static_cast<double>(h - 1) / static_cast<double>(height - 1) : 0.0;
  const double sx = width > 1 ? static_cast<double>(w - 1) / static_cast<double>(width - 1) : 0.0;
  Eigen::MatrixXd out(height, width);
  for (Eigen::Index y = 0; y < height; ++y) {
    const double fy_src = static_cast<double>(y) * sy;
    const auto y0 = std::min(static_cast<Eigen::Index>(fy_src), h - 1);
    const Eigen::Index y1 = std::min(y0 + 1, h - 1);
    const double ty = fy_src - static_cast<double>(y0);
    for (Eigen::Index x = 0; x < width; ++x) {
      const double fx_src = static_cast<double>(x) * sx;
      const auto x0 = std::min(static_cast<Eigen::Index>(fx_src), w - 1);
      const Eigen::Index x1 = std::min(x0 + 1, w - 1);
      const double tx = fx_src - static_cast<double>(x0);
      const double top = map(y0, x0) + tx * (map(y0, x1) - map(y0, x0));
      const double bottom = map(y1, x0) + tx * (map(y1, x1) - map(y1, x0));
      out(y, x) = top + ty * (bottom - top);
    }
  }
  return out;
}

MeanMap upsample_bilinear(const MeanMap& map, Eigen::Index height, Eigen::Index width) {
  MeanMap out{height, width, Eigen::MatrixXd(height * width, map.channels())};
  for (Eigen::Index c = 0; c < map.channels(); ++c) {
    const Eigen::MatrixXd up = upsample_bilinear(map.channel(c), height, width);
    for (Eigen::Index r = 0; r < height; ++r) {
      out.data.col(c).segment(r * width, width) = up.row(r).transpose();
    }
  }
  return out;
}

Mask threshold_map(const Eigen::Ref<const Eigen::MatrixXd>& map, double threshold) {
  return (map.array() > threshold);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> level_support(const Episode& ep,
                                                          const PipelineConfig& cfg,
                                                          std::size_t level) {
  const Eigen::Index stride = ep.level_strides.at(level);
  const Eigen::Index factor = cfg.support_stride_target / stride;
  std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> parts;
  Eigen::Index rows = 0;
  for (const auto& s : ep.support) {
    const Eigen::MatrixXd y = encode_mask(s.mask, stride, cfg.encoding);
    parts.push_back(grid_subsample(s.levels[level], y, factor));
    rows += parts.back().first.rows();
  }
  Eigen::MatrixXd xs(rows, parts.front().first.cols());
  Eigen::MatrixXd ys(rows, parts.front().second.cols());
  Eigen::Index at = 0;
  for (const auto& [x, y] : parts) {
    xs.middleRows(at, x.rows()) = x;
    ys.middleRows(at, y.rows()) = y;
    at += x.rows();
  }
  return {std::move(xs), std::move(ys)};
}

EpisodeResult run_episode(const Episode& ep, const PipelineConfig& cfg) {
  ep.validate();
  cfg.validate(ep.level_strides);
  const Eigen::Index h0 = ep.image_height();
  const Eigen::Index w0 = ep.image_width();

  EpisodeResult result;
  result.fused_mean = Eigen::MatrixXd::Zero(h0, w0);
  for (std::size_t a = 0; a < ep.level_strides.size(); ++a) {
    try {
      const FeatureMap& query = ep.query[a];
      auto [xs, ys] = level_support(ep, cfg, a);
      const KernelConfig kernel = cfg.kernel_for(a, query.dim());
      const auto gp = fit(xs, ys, kernel);

      LevelOutput out;
      out.support_size = xs.rows();
      out.posterior = predict(gp, query.features, !cfg.mean_only);
      out.mean_map = unflatten_mean(out.posterior.mean, query.height, query.width);
      if (!cfg.mean_only) {
        out.cov_window =
            extract_cov_window(*out.posterior.covariance, query.height, query.width, cfg.window, cfg.pad);
      }
      result.fused_mean += upsample_bilinear(out.mean_map.channel(0), h0, w0);
      result.levels.push_back(std::move(out));
    } catch (const Error& e) {
      throw e.with_context("level " + std::to_string(a));
    }
  }
  result.fused_mean /= static_cast<double>(ep.level_strides.size());
  result.prediction = threshold_map(result.fused_mean, cfg.readout_threshold);
  return result;
}

}  // namespace dgp

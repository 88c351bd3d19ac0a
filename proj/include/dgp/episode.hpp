#pragma once

// Few-shot episodes and the dense-GP pipeline that segments the query.
//
// Per pyramid level: masks are encoded to per-cell targets, support cells are
// subsampled to a stride-32 grid, one GP is fitted over the stacked support
// and evaluated on every query cell. The first (zero-centred mask) channel of
// each level's posterior mean is upsampled to image resolution, the levels are
// averaged, and the query mask is read out by thresholding.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dgp/covariance_features.hpp"
#include "dgp/gp.hpp"
#include "dgp/kernels.hpp"
#include "dgp/tensor_io.hpp"

namespace dgp {

/// Binary mask, rows x cols = H0 x W0.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Dense H x W grid of D-dimensional features, flattened row-major into an
/// (H*W) x D matrix.
struct FeatureMap {
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  Eigen::MatrixXd features;

  Eigen::Index dim() const noexcept { return features.cols(); }
  Eigen::Index cells() const noexcept { return height * width; }
};

struct SupportSample {
  std::vector<FeatureMap> levels;  // one per pyramid level
  Mask mask;
};

struct Episode {
  std::vector<SupportSample> support;
  std::vector<FeatureMap> query;
  Mask query_mask;  // ground truth; may be empty when unknown
  int class_id = 0;
  std::vector<Eigen::Index> level_strides{16, 32};

  Eigen::Index shots() const noexcept { return static_cast<Eigen::Index>(support.size()); }
  Eigen::Index image_height() const;
  Eigen::Index image_width() const;

  /// Throws on K == 0, inconsistent level counts/extents/feature dims, or
  /// masks that do not match the level grids.
  void validate() const;
};

enum class MaskEncodingKind { PlusMinusOne, Channels };

struct MaskEncoding {
  MaskEncodingKind kind = MaskEncodingKind::PlusMinusOne;
  Eigen::Index channels = 1;  // E; forced to 1 for PlusMinusOne
  std::uint64_t seed = 0;

  Eigen::Index output_dim() const noexcept {
    return kind == MaskEncodingKind::PlusMinusOne ? 1 : channels;
  }
};

struct PipelineConfig {
  KernelKind kernel = KernelKind::SquaredExponential;
  double sigma_f_sq = 1.0;
  double noise_sq = 0.1;
  /// Unset means sqrt(D) for each level's feature dimension D.
  std::optional<double> length_sq;
  /// Multiplier applied on top of length_sq (sensitivity studies).
  double length_sq_scale = 1.0;
  /// Explicit per-level kernels; when non-empty they override the fields above.
  std::vector<KernelConfig> level_kernels;

  Eigen::Index window = kDefaultWindow;
  double pad = 0.0;
  Eigen::Index support_stride_target = 32;
  double readout_threshold = 0.0;
  MaskEncoding encoding;
  /// Skip the Q x Q covariance and window maps.
  bool mean_only = false;

  KernelConfig kernel_for(std::size_t level, Eigen::Index feature_dim) const;
  void validate(const std::vector<Eigen::Index>& level_strides) const;
};

/// Area average of `mask` over stride x stride cells; result is H x W.
Eigen::MatrixXd downsample_mask(const Mask& mask, Eigen::Index stride);

/// Per-cell targets, (H*W) x E. Channel 0 is 2 * area_average - 1; further
/// channels multiply it by seeded smooth spatial basis functions.
Eigen::MatrixXd encode_mask(const Mask& mask, Eigen::Index level_stride,
                            const MaskEncoding& encoding);

/// Keeps every `factor`-th row and column of the grid starting at factor / 2.
/// Returns (features S x D, targets S x E).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> grid_subsample(const FeatureMap& x,
                                                           const Eigen::Ref<const Eigen::MatrixXd>& y,
                                                           Eigen::Index factor);

/// Corner-aligned bilinear interpolation of every channel to height x width.
MeanMap upsample_bilinear(const MeanMap& map, Eigen::Index height, Eigen::Index width);
/// Single-channel overload on an H x W matrix.
Eigen::MatrixXd upsample_bilinear(const Eigen::Ref<const Eigen::MatrixXd>& map, Eigen::Index height,
                                  Eigen::Index width);

/// Pixels strictly above `threshold`.
Mask threshold_map(const Eigen::Ref<const Eigen::MatrixXd>& map, double threshold);

/// Stacked, subsampled support set of one level.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> level_support(const Episode& ep,
                                                          const PipelineConfig& cfg,
                                                          std::size_t level);

struct LevelOutput {
  GPPosterior<double> posterior;
  MeanMap mean_map;
  std::optional<CovWindowMap> cov_window;
  Eigen::Index support_size = 0;
};

struct EpisodeResult {
  Mask prediction;            // H0 x W0
  Eigen::MatrixXd fused_mean; // H0 x W0
  std::vector<LevelOutput> levels;
};

EpisodeResult run_episode(const Episode& ep, const PipelineConfig& cfg);

// Episode directories:
//   feat_s{k}_l{a}.dgpt  [H_a, W_a, D_a]   support k, level a
//   mask_s{k}.dgpt       [H0, W0]          binary f32
//   feat_q_l{a}.dgpt     [H_a, W_a, D_a]
//   mask_q.dgpt          [H0, W0]          optional ground truth
// K is the number of consecutive mask_s{k} files starting at k = 0.

Episode load_episode_dir(const std::filesystem::path& dir,
                         const std::vector<Eigen::Index>& level_strides);
void save_episode_dir(const Episode& ep, const std::filesystem::path& dir);

FeatureMap feature_map_from_tensor(const DenseTensor& t);
DenseTensor feature_map_to_tensor(const FeatureMap& f);
DenseTensor spatial_map_to_tensor(const SpatialMap& m);

}  // namespace dgp

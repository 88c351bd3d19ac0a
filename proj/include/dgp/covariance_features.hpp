#pragma once

// Spatial decoder inputs built from a posterior over an H x W query grid whose
// points are flattened row-major (q = h * W + w).

#include <Eigen/Core>

namespace dgp {

/// Row-major H x W x C map stored as an (H*W) x C matrix; row h*W + w holds
/// the channels of pixel (h, w).
struct SpatialMap {
  Eigen::Index height = 0;
  Eigen::Index width = 0;
  Eigen::MatrixXd data;

  Eigen::Index channels() const noexcept { return data.cols(); }
  double operator()(Eigen::Index h, Eigen::Index w, Eigen::Index c) const {
    return data(h * width + w, c);
  }
  /// One channel as an H x W matrix.
  Eigen::MatrixXd channel(Eigen::Index c) const;
};

using MeanMap = SpatialMap;

/// Per-pixel covariances with the N x N neighbourhood; channel
/// (i + r) * N + (j + r), r = (N - 1) / 2, holds the covariance with pixel
/// (h + i, w + j).
struct CovWindowMap : SpatialMap {
  Eigen::Index window = 1;
  double pad = 0.0;
};

inline constexpr Eigen::Index kDefaultWindow = 5;

MeanMap unflatten_mean(const Eigen::Ref<const Eigen::MatrixXd>& mean, Eigen::Index height,
                       Eigen::Index width);

/// Inverse of unflatten_mean.
Eigen::MatrixXd flatten(const SpatialMap& map);

/// Throws shape-mismatch if `sigma` is not (H*W) x (H*W) or not symmetric
/// within 1e-6, invalid-argument for even or non-positive `window`.
CovWindowMap extract_cov_window(const Eigen::Ref<const Eigen::MatrixXd>& sigma,
                                Eigen::Index height, Eigen::Index width,
                                Eigen::Index window = kDefaultWindow, double pad = 0.0);

}  // namespace dgp

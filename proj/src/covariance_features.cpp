#include "dgp/covariance_features.hpp"

#include <string>

#include "dgp/error.hpp"

namespace dgp {

Eigen::MatrixXd SpatialMap::channel(Eigen::Index c) const {
  Eigen::MatrixXd out(height, width);
  for (Eigen::Index h = 0; h < height; ++h) {
    for (Eigen::Index w = 0; w < width; ++w) out(h, w) = data(h * width + w, c);
  }
  return out;
}

MeanMap unflatten_mean(const Eigen::Ref<const Eigen::MatrixXd>& mean, Eigen::Index height,
                       Eigen::Index width) {
  if (height < 1 || width < 1 || mean.rows() != height * width) {
    throw Error(ErrorKind::ShapeMismatch, std::to_string(mean.rows()) + " query rows cannot form a " +
                                              std::to_string(height) + "x" + std::to_string(width) +
                                              " grid");
  }
  return MeanMap{height, width, mean};
}

Eigen::MatrixXd flatten(const SpatialMap& map) { return map.data; }

CovWindowMap extract_cov_window(const Eigen::Ref<const Eigen::MatrixXd>& sigma,
                                Eigen::Index height, Eigen::Index width, Eigen::Index window,
                                double pad) {
  if (window < 1 || window % 2 == 0) {
    throw Error(ErrorKind::InvalidArgument, "window must be odd and positive, got " +
                                                std::to_string(window));
  }
  const Eigen::Index q = height * width;
  if (height < 1 || width < 1 || sigma.rows() != q || sigma.cols() != q) {
    throw Error(ErrorKind::ShapeMismatch, "covariance " + std::to_string(sigma.rows()) + "x" +
                                              std::to_string(sigma.cols()) + " does not match a " +
                                              std::to_string(height) + "x" +
                                              std::to_string(width) + " grid");
  }
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-6) {
    throw Error(ErrorKind::ShapeMismatch, "covariance not symmetric (max |S - S^T| = " +
                                              std::to_string(asym) + ")");
  }

  const Eigen::Index r = (window - 1) / 2;
  CovWindowMap out;
  out.height = height;
  out.width = width;
  out.window = window;
  out.pad = pad;
  out.data.setConstant(q, window * window, pad);
  for (Eigen::Index k = 0; k < height; ++k) {
    for (Eigen::Index l = 0; l < width; ++l) {
      const Eigen::Index p = k * width + l;
      for (Eigen::Index i = -r; i <= r; ++i) {
        const Eigen::Index kk = k + i;
        if (kk < 0 || kk >= height) continue;
        for (Eigen::Index j = -r; j <= r; ++j) {
          const Eigen::Index ll = l + j;
          if (ll < 0 || ll >= width) continue;
          out.data(p, (i + r) * window + (j + r)) = sigma(p, kk * width + ll);
        }
      }
    }
  }
  return out;
}

}  // namespace dgp

#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "dgp/error.hpp"

namespace dgp {

enum class KernelKind { Linear, Exponential, SquaredExponential };

/// Kernel hyperparameters. `length_sq` is the squared length scale; the
/// exponential kernel uses its square root.
struct KernelConfig {
  KernelKind kind = KernelKind::SquaredExponential;
  double sigma_f_sq = 1.0;
  double length_sq = 1.0;
  double noise_sq = 0.1;

  /// sigma_f^2 = 1, noise = 0.1, length^2 = sqrt(D).
  static KernelConfig defaults(KernelKind kind, Eigen::Index feature_dim) {
    return {kind, 1.0, std::sqrt(static_cast<double>(feature_dim)), 0.1};
  }

  void validate() const {
    if (!(sigma_f_sq > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma_f_sq must be > 0");
    if (!(length_sq > 0.0)) throw Error(ErrorKind::InvalidArgument, "length_sq must be > 0");
    if (!(noise_sq >= 0.0)) throw Error(ErrorKind::InvalidArgument, "noise_sq must be >= 0");
  }

  bool operator==(const KernelConfig&) const = default;
};

inline std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Exponential: return "exp";
    case KernelKind::SquaredExponential: return "se";
  }
  return "unknown";
}

/// Accepts "linear", "exp", "se" and the long spellings.
inline std::optional<KernelKind> parse_kernel_kind(std::string_view name) {
  if (name == "linear" || name == "lin") return KernelKind::Linear;
  if (name == "exp" || name == "exponential") return KernelKind::Exponential;
  if (name == "se" || name == "squared_exponential" || name == "rbf") {
    return KernelKind::SquaredExponential;
  }
  return std::nullopt;
}

/// Pairwise squared Euclidean distances between the rows of `x` and `y`,
/// via |x|^2 + |y|^2 - 2 x.y. Values within the cancellation error of the
/// expansion are flushed to zero, so identical rows give exactly 0.
template <typename DerivedX, typename DerivedY>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, Eigen::Dynamic> squared_distances(
    const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (x.cols() != y.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "feature dims " + std::to_string(x.cols()) + " vs " +
                                                  std::to_string(y.cols()));
  }
  using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
  const Vector xn = x.rowwise().squaredNorm();
  const Vector yn = y.rowwise().squaredNorm();
  Matrix d2 = Scalar(-2) * (x * y.transpose());
  d2.colwise() += xn;
  d2.rowwise() += yn.transpose();
  const Scalar tol = Scalar(8) * Eigen::NumTraits<Scalar>::epsilon();
  for (Eigen::Index j = 0; j < d2.cols(); ++j) {
    for (Eigen::Index i = 0; i < d2.rows(); ++i) {
      if (d2(i, j) <= tol * (xn(i) + yn(j))) d2(i, j) = Scalar(0);
    }
  }
  return d2;
}

/// Gram matrix K(m, n) = k(x_m, y_n) for row-feature matrices x (M x D) and
/// y (N x D).
///
///   linear:  x.y
///   exp:     sigma_f^2 exp(-|x - y| / l)
///   se:      sigma_f^2 exp(-|x - y|^2 / (2 l^2))
template <typename DerivedX, typename DerivedY>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, Eigen::Dynamic> gram(
    const KernelConfig& cfg, const Eigen::MatrixBase<DerivedX>& x,
    const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  static_assert(std::is_same_v<Scalar, typename DerivedY::Scalar>, "mixed scalar types");
  cfg.validate();
  if (x.cols() != y.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "feature dims " + std::to_string(x.cols()) + " vs " +
                                                  std::to_string(y.cols()));
  }

  // Plain operands; products of nullary expressions do not compile.
  const auto& xe = x.eval();
  const auto& ye = y.eval();
  switch (cfg.kind) {
    case KernelKind::Linear:
      return xe * ye.transpose();
    case KernelKind::Exponential: {
      const Scalar inv_len = Scalar(1) / std::sqrt(Scalar(cfg.length_sq));
      Matrix k = squared_distances(xe, ye);
      return Scalar(cfg.sigma_f_sq) * (-(k.array().sqrt() * inv_len)).exp().matrix();
    }
    case KernelKind::SquaredExponential: {
      const Scalar scale = Scalar(-0.5) / Scalar(cfg.length_sq);
      Matrix k = squared_distances(xe, ye);
      return Scalar(cfg.sigma_f_sq) * (k.array() * scale).exp().matrix();
    }
  }
  throw Error(ErrorKind::InvalidArgument, "unknown kernel kind");
}

/// Self-Gram of one point set. Symmetrized, and for the stationary kernels the
/// diagonal is exactly sigma_f^2.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> gram(
    const KernelConfig& cfg, const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> k = gram(cfg, x, x);
  k = (Scalar(0.5) * (k + k.transpose())).eval();
  if (cfg.kind != KernelKind::Linear) k.diagonal().setConstant(Scalar(cfg.sigma_f_sq));
  return k;
}

/// Prior variances k(x_i, x_i) for each row of `x`.
template <typename Derived>
Eigen::Vector<typename Derived::Scalar, Eigen::Dynamic> prior_variance(
    const KernelConfig& cfg, const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (cfg.kind == KernelKind::Linear) return x.rowwise().squaredNorm();
  return Eigen::Vector<Scalar, Eigen::Dynamic>::Constant(x.rows(), Scalar(cfg.sigma_f_sq));
}

}  // namespace dgp

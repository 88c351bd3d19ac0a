#pragma once

// Exact Gaussian-process regression with a zero prior mean and multi-output
// targets sharing one covariance.
//
//   mean = K_sq^T (K_ss + s^2 I)^{-1} Y_s
//   cov  = K_qq - K_sq^T (K_ss + s^2 I)^{-1} K_sq
//
// Both are evaluated through the Cholesky factor L of K_ss + s^2 I:
// alpha = L^T \ (L \ Y_s), v = L \ K_sq, cov = K_qq - v^T v.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dgp/error.hpp"
#include "dgp/kernels.hpp"

namespace dgp {

/// Index of the first leading minor of the symmetric matrix `a` that is not
/// positive definite, or -1 if `a` is positive definite. Plain unblocked
/// Cholesky; only used to diagnose failures.
template <typename Derived>
Eigen::Index first_non_pd_minor(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = a.rows();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> l =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Scalar pivot = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > Scalar(0)) || !std::isfinite(pivot)) return j;
    l(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return -1;
}

template <typename Scalar = double>
struct GPPosterior {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

  Matrix mean;                       // Q x E
  std::optional<Matrix> covariance;  // Q x Q, shared by all E channels

  /// Posterior variances with negative round-off clamped to zero. Requires
  /// the covariance.
  Vector variance() const {
    if (!covariance) throw Error(ErrorKind::InvalidArgument, "posterior has no covariance");
    return covariance->diagonal().cwiseMax(Scalar(0));
  }
};

/// Support-side state of a GP: the Cholesky factor of K_ss + s^2 I and the
/// solved weights. Immutable once built by `fit`.
template <typename Scalar = double>
class FittedGP {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  FittedGP(Matrix support, Eigen::LLT<Matrix> llt, Matrix alpha, KernelConfig cfg, Scalar jitter)
      : support_(std::move(support)),
        llt_(std::move(llt)),
        alpha_(std::move(alpha)),
        cfg_(cfg),
        jitter_(jitter) {}

  const Matrix& support_features() const noexcept { return support_; }
  const Matrix& alpha() const noexcept { return alpha_; }
  const KernelConfig& config() const noexcept { return cfg_; }
  const Eigen::LLT<Matrix>& llt() const noexcept { return llt_; }
  /// Diagonal jitter added on the retry path; zero when the first attempt succeeded.
  Scalar jitter() const noexcept { return jitter_; }

  /// Lower-triangular L with L L^T = K_ss + s^2 I (+ jitter I).
  Matrix chol_factor() const { return llt_.matrixL(); }

  Eigen::Index support_size() const noexcept { return support_.rows(); }
  Eigen::Index feature_dim() const noexcept { return support_.cols(); }
  Eigen::Index output_dim() const noexcept { return alpha_.cols(); }

 private:
  Matrix support_;
  Eigen::LLT<Matrix> llt_;
  Matrix alpha_;
  KernelConfig cfg_;
  Scalar jitter_;
};

/// Factor the support system and solve for the weights of every output
/// channel. With noise_sq == 0 a failed factorization of a stationary kernel
/// is retried once with jitter 1e-8 * mean(diag K_ss). A singular linear-kernel
/// Gram matrix is rank deficient by construction and fails directly.
template <typename DerivedX, typename DerivedY>
FittedGP<typename DerivedX::Scalar> fit(const Eigen::MatrixBase<DerivedX>& support,
                                        const Eigen::MatrixBase<DerivedY>& targets,
                                        const KernelConfig& cfg) {
  using Scalar = typename DerivedX::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  cfg.validate();
  if (support.rows() < 1) throw Error(ErrorKind::DimensionMismatch, "empty support set");
  if (targets.cols() < 1) throw Error(ErrorKind::DimensionMismatch, "targets have no channels");
  if (targets.rows() != support.rows()) {
    throw Error(ErrorKind::DimensionMismatch, std::to_string(support.rows()) + " support rows but " +
                                                  std::to_string(targets.rows()) + " target rows");
  }

  Matrix k = gram(cfg, support);
  k.diagonal().array() += Scalar(cfg.noise_sq);

  Scalar jitter = 0;
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success && cfg.noise_sq == 0.0 && cfg.kind != KernelKind::Linear) {
    jitter = Scalar(1e-8) * k.diagonal().mean();
    Matrix kj = k;
    kj.diagonal().array() += jitter;
    llt.compute(kj);
  }
  if (llt.info() != Eigen::Success) {
    const Eigen::Index minor = first_non_pd_minor(k);
    throw Error(ErrorKind::CholeskyFailure,
                "K_ss + noise*I is not positive definite (leading minor " + std::to_string(minor) +
                    " of " + std::to_string(k.rows()) + ")",
                static_cast<long>(minor));
  }

  Matrix alpha = llt.solve(targets.template cast<Scalar>());
  return FittedGP<Scalar>(support, std::move(llt), std::move(alpha), cfg, jitter);
}

/// Posterior over the query rows. The covariance (Q x Q) is only formed when
/// `want_cov` is set.
template <typename Scalar, typename DerivedQ>
GPPosterior<Scalar> predict(const FittedGP<Scalar>& gp, const Eigen::MatrixBase<DerivedQ>& query,
                            bool want_cov = true) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (query.cols() != gp.feature_dim()) {
    throw Error(ErrorKind::DimensionMismatch, "query feature dim " + std::to_string(query.cols()) +
                                                  " vs support " + std::to_string(gp.feature_dim()));
  }
  const Matrix k_sq = gram(gp.config(), gp.support_features(), query);

  GPPosterior<Scalar> post;
  post.mean.noalias() = k_sq.transpose() * gp.alpha();
  if (want_cov) {
    const Matrix v = gp.llt().matrixL().solve(k_sq);
    Matrix cov = gram(gp.config(), query);
    cov.noalias() -= v.transpose() * v;
    post.covariance = (Scalar(0.5) * (cov + cov.transpose())).eval();
  }
  return post;
}

template <typename Scalar = double>
struct LevelProblem {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix support;
  Matrix targets;
  Matrix query;
  KernelConfig kernel;
  bool want_cov = true;
};

/// One independent GP per pyramid level. Errors are re-raised tagged with
/// the level index.
template <typename Scalar>
std::vector<GPPosterior<Scalar>> fit_predict_multilevel(
    const std::vector<LevelProblem<Scalar>>& levels) {
  std::vector<GPPosterior<Scalar>> out;
  out.reserve(levels.size());
  for (std::size_t a = 0; a < levels.size(); ++a) {
    const auto& lv = levels[a];
    try {
      out.push_back(predict(fit(lv.support, lv.targets, lv.kernel), lv.query, lv.want_cov));
    } catch (const Error& e) {
      throw e.with_context("level " + std::to_string(a));
    }
  }
  return out;
}

}  // namespace dgp

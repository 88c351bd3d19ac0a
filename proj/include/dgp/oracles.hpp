#pragma once

// Reference computations that share no code path with the library: kernels by
// per-pair loops, posteriors by explicit inverses of the joint Gaussian,
// windows by channel-major index arithmetic.

#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Core>

#include "dgp/kernels.hpp"

namespace dgp::oracle {

/// k(x_m, y_n) evaluated pair by pair from the kernel definitions.
Eigen::MatrixXd gram_direct(const KernelConfig& cfg, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

struct Posterior {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd cov;
};

/// Builds the (S+Q) x (S+Q) joint covariance of (y_s, y_q), adds the noise to
/// the support block and conditions with an LU-based explicit inverse.
Posterior condition_joint(const KernelConfig& cfg, const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys,
                          const Eigen::MatrixXd& xq);

/// Weight-space posterior mean for the linear kernel:
/// X_q (X_s^T X_s + s^2 I_D)^{-1} X_s^T Y_s.
Eigen::MatrixXd ridge_mean(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys, const Eigen::MatrixXd& xq,
                           double noise_sq);

/// Covariance windows by looping over channels c and decoding the offset
/// (c / N - r, c % N - r).
Eigen::MatrixXd cov_window_loop(const Eigen::MatrixXd& sigma, Eigen::Index height, Eigen::Index width,
                                Eigen::Index window, double pad);

/// ||a - b||_F / ||b||_F (absolute when b is zero).
double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct GpInstance {
  KernelConfig cfg;
  Eigen::MatrixXd xs, ys, xq;
};

/// Random problem with 1 <= S, Q <= max_points, 1 <= D <= max_dim,
/// 1 <= E <= max_outputs, noise in [0.01, 1].
GpInstance random_instance(std::mt19937_64& rng, KernelKind kind, Eigen::Index max_points = 32,
                           Eigen::Index max_dim = 8, Eigen::Index max_outputs = 4);

Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, Eigen::Index n);

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double max_error = 0.0;

  bool passed() const noexcept { return failures == 0; }
};

/// Cholesky-path posterior vs condition_joint on `instances` random problems
/// per kernel. `perturb` is added to the library's mean before comparison.
SuiteResult gp_oracle_suite(std::size_t instances, std::uint64_t seed, double tolerance = 1e-6,
                            double perturb = 0.0);

/// extract_cov_window vs cov_window_loop on random grids up to max_extent per
/// side and N in {1, 3, 5, 7}; exact equality.
SuiteResult window_oracle_suite(std::size_t grids, std::uint64_t seed, Eigen::Index max_extent = 8,
                                double perturb = 0.0);

}  // namespace dgp::oracle

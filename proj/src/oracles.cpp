#include "dgp/oracles.hpp"

#include <cmath>

#include <Eigen/LU>

#include "dgp/covariance_features.hpp"
#include "dgp/gp.hpp"

namespace dgp::oracle {

Eigen::MatrixXd gram_direct(const KernelConfig& cfg, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd k(x.rows(), y.rows());
  for (Eigen::Index m = 0; m < x.rows(); ++m) {
    for (Eigen::Index n = 0; n < y.rows(); ++n) {
      double dot = 0.0, dist2 = 0.0;
      for (Eigen::Index d = 0; d < x.cols(); ++d) {
        dot += x(m, d) * y(n, d);
        dist2 += (x(m, d) - y(n, d)) * (x(m, d) - y(n, d));
      }
      switch (cfg.kind) {
        case KernelKind::Linear: k(m, n) = dot; break;
        case KernelKind::Exponential:
          k(m, n) = cfg.sigma_f_sq * std::exp(-std::sqrt(dist2) / std::sqrt(cfg.length_sq));
          break;
        case KernelKind::SquaredExponential:
          k(m, n) = cfg.sigma_f_sq * std::exp(-dist2 / (2.0 * cfg.length_sq));
          break;
      }
    }
  }
  return k;
}

Posterior condition_joint(const KernelConfig& cfg, const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys,
                          const Eigen::MatrixXd& xq) {
  const Eigen::Index s = xs.rows();
  const Eigen::Index q = xq.rows();
  Eigen::MatrixXd all(s + q, xs.cols());
  all << xs, xq;
  Eigen::MatrixXd joint = gram_direct(cfg, all, all);
  joint.topLeftCorner(s, s).diagonal().array() += cfg.noise_sq;

  const Eigen::MatrixXd inv_ss = joint.topLeftCorner(s, s).fullPivLu().inverse();
  const Eigen::MatrixXd k_qs = joint.bottomLeftCorner(q, s);
  Posterior p;
  p.mean = k_qs * inv_ss * ys;
  p.cov = joint.bottomRightCorner(q, q) - k_qs * inv_ss * joint.topRightCorner(s, q);
  return p;
}

Eigen::MatrixXd ridge_mean(const Eigen::MatrixXd& xs, const Eigen::MatrixXd& ys, const Eigen::MatrixXd& xq,
                           double noise_sq) {
  const Eigen::Index d = xs.cols();
  const Eigen::MatrixXd a = xs.transpose() * xs + noise_sq * Eigen::MatrixXd::Identity(d, d);
  return xq * (a.fullPivLu().inverse() * (xs.transpose() * ys));
}

Eigen::MatrixXd cov_window_loop(const Eigen::MatrixXd& sigma, Eigen::Index height, Eigen::Index width,
                                Eigen::Index window, double pad) {
  const Eigen::Index r = (window - 1) / 2;
  Eigen::MatrixXd z(height * width, window * window);
  for (Eigen::Index c = 0; c < window * window; ++c) {
    const Eigen::Index i = c / window - r;
    const Eigen::Index j = c % window - r;
    for (Eigen::Index k = 0; k < height; ++k) {
      for (Eigen::Index l = 0; l < width; ++l) {
        const bool inside = k + i >= 0 && k + i < height && l + j >= 0 && l + j < width;
        z(k * width + l, c) = inside ? sigma(k * width + l, (k + i) * width + (l + j)) : pad;
      }
    }
  }
  return z;
}

double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double denom = b.norm();
  const double diff = (a - b).norm();
  return denom > 0.0 ? diff / denom : diff;
}

GpInstance random_instance(std::mt19937_64& rng, KernelKind kind, Eigen::Index max_points,
                           Eigen::Index max_dim, Eigen::Index max_outputs) {
  std::uniform_int_distribution<Eigen::Index> points(1, max_points);
  std::uniform_int_distribution<Eigen::Index> dims(1, max_dim);
  std::uniform_int_distribution<Eigen::Index> outs(1, max_outputs);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  GpInstance inst;
  const Eigen::Index s = points(rng);
  const Eigen::Index q = points(rng);
  const Eigen::Index d = dims(rng);
  const Eigen::Index e = outs(rng);
  inst.cfg = KernelConfig::defaults(kind, d);
  inst.cfg.sigma_f_sq = 0.5 + 1.5 * unit(rng);
  inst.cfg.length_sq *= 0.5 + 1.5 * unit(rng);
  inst.cfg.noise_sq = std::pow(10.0, -2.0 + 2.0 * unit(rng));
  auto fill = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
  };
  inst.xs = fill(s, d);
  inst.ys = fill(s, e);
  inst.xq = fill(q, d);
  return inst;
}

Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return (m + m.transpose()).eval();
}

SuiteResult gp_oracle_suite(std::size_t instances, std::uint64_t seed, double tolerance, double perturb) {
  SuiteResult res{"gp_oracle"};
  std::mt19937_64 rng(seed);
  for (auto kind : {KernelKind::Linear, KernelKind::Exponential, KernelKind::SquaredExponential}) {
    for (std::size_t i = 0; i < instances; ++i) {
      const GpInstance inst = random_instance(rng, kind);
      const auto post = predict(fit(inst.xs, inst.ys, inst.cfg), inst.xq, true);
      const Posterior ref = condition_joint(inst.cfg, inst.xs, inst.ys, inst.xq);
      Eigen::MatrixXd mean = post.mean;
      mean.array() += perturb;
      const double err = std::max(rel_error(mean, ref.mean), rel_error(*post.covariance, ref.cov));
      res.max_error = std::max(res.max_error, err);
      ++res.cases;
      if (!(err <= tolerance)) ++res.failures;
    }
  }
  return res;
}

SuiteResult window_oracle_suite(std::size_t grids, std::uint64_t seed, Eigen::Index max_extent,
                                double perturb) {
  SuiteResult res{"window_oracle"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> extent(1, max_extent);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t g = 0; g < grids; ++g) {
    const Eigen::Index h = extent(rng);
    const Eigen::Index w = extent(rng);
    const Eigen::MatrixXd sigma = random_symmetric(rng, h * w);
    const double pad = normal(rng);
    for (Eigen::Index n : {1, 3, 5, 7}) {
      CovWindowMap z = extract_cov_window(sigma, h, w, n, pad);
      z.data.array() += perturb;
      const Eigen::MatrixXd ref = cov_window_loop(sigma, h, w, n, pad);
      const double err = (z.data - ref).cwiseAbs().maxCoeff();
      res.max_error = std::max(res.max_error, err);
      ++res.cases;
      if (!(z.data.array() == ref.array()).all()) ++res.failures;
    }
  }
  return res;
}

}  // namespace dgp::oracle

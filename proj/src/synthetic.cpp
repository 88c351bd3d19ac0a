#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/QR>

#include "dgp/error.hpp"
#include "dgp/evaluation.hpp"

namespace dgp {
namespace {

struct Centres {
  std::vector<Eigen::VectorXd> fg;
  std::vector<Eigen::VectorXd> bg;
};

Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = n(rng);
  return v;
}

Centres make_centres(const SyntheticEpisodeSpec& spec, Eigen::Index dim, std::mt19937_64& rng) {
  Centres c;
  if (spec.layout == ClusterLayout::Random) {
    for (int i = 0; i < spec.fg_clusters; ++i) {
      c.fg.push_back(spec.cluster_radius * gaussian_vector(rng, dim).normalized());
    }
    for (int i = 0; i < spec.bg_clusters; ++i) {
      c.bg.push_back(spec.cluster_radius * gaussian_vector(rng, dim).normalized());
    }
    return c;
  }

  // Antipodal: orthonormal directions from the QR of a Gaussian matrix.
  const Eigen::Index pairs = (spec.fg_clusters + spec.bg_clusters) / 2;
  Eigen::MatrixXd g(dim, pairs);
  for (Eigen::Index j = 0; j < pairs; ++j) g.col(j) = gaussian_vector(rng, dim);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ() *
                            Eigen::MatrixXd::Identity(dim, pairs);
  Eigen::Index col = 0;
  for (int i = 0; i < spec.fg_clusters / 2; ++i, ++col) {
    c.fg.push_back(spec.cluster_radius * q.col(col));
    c.fg.push_back(-spec.cluster_radius * q.col(col));
  }
  for (int i = 0; i < spec.bg_clusters / 2; ++i, ++col) {
    c.bg.push_back(spec.cluster_radius * q.col(col));
    c.bg.push_back(-spec.cluster_radius * q.col(col));
  }
  return c;
}

struct ImageLayout {
  Mask mask;
  // Per pixel: -1 background, otherwise the foreground cluster index.
  Eigen::ArrayXXi cluster;
  std::vector<int> bands;  // background cluster of each vertical band
};

ImageLayout make_layout(const SyntheticEpisodeSpec& spec, std::mt19937_64& rng) {
  const Eigen::Index n = spec.image_size;
  ImageLayout img;
  img.cluster = Eigen::ArrayXXi::Constant(n, n, -1);

  std::uniform_int_distribution<Eigen::Index> extent(spec.blob_min, spec.blob_max);
  std::uniform_int_distribution<int> first(0, spec.fg_clusters - 1);
  const int start = first(rng);
  for (int b = 0; b < spec.blobs_per_image; ++b) {
    const double ry = 0.5 * static_cast<double>(extent(rng));
    const double rx = 0.5 * static_cast<double>(extent(rng));
    std::uniform_real_distribution<double> cy(ry, static_cast<double>(n) - ry);
    std::uniform_real_distribution<double> cx(rx, static_cast<double>(n) - rx);
    const double y0 = cy(rng);
    const double x0 = cx(rng);
    const int cluster = (start + b) % spec.fg_clusters;
    for (Eigen::Index y = 0; y < n; ++y) {
      const double dy = (static_cast<double>(y) + 0.5 - y0) / ry;
      if (dy * dy > 1.0) continue;
      for (Eigen::Index x = 0; x < n; ++x) {
        const double dx = (static_cast<double>(x) + 0.5 - x0) / rx;
        if (dy * dy + dx * dx <= 1.0) img.cluster(y, x) = cluster;
      }
    }
  }
  img.mask = img.cluster >= 0;

  std::vector<int> order(static_cast<std::size_t>(spec.bg_clusters));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  img.bands.assign(order.begin(), order.begin() + spec.bg_per_image);
  return img;
}

FeatureMap make_features(const SyntheticEpisodeSpec& spec, const ImageLayout& img,
                         const Centres& centres, Eigen::Index stride, std::mt19937_64& rng) {
  const Eigen::Index n = spec.image_size;
  const Eigen::Index cells = n / stride;
  const Eigen::Index dim = centres.fg.front().size();
  const auto bands = static_cast<Eigen::Index>(img.bands.size());
  std::normal_distribution<double> noise(0.0, spec.spread);

  FeatureMap f{cells, cells, Eigen::MatrixXd(cells * cells, dim)};
  std::vector<Eigen::Index> votes(static_cast<std::size_t>(spec.fg_clusters));
  for (Eigen::Index r = 0; r < cells; ++r) {
    for (Eigen::Index c = 0; c < cells; ++c) {
      std::fill(votes.begin(), votes.end(), 0);
      Eigen::Index fg = 0;
      for (Eigen::Index y = r * stride; y < (r + 1) * stride; ++y) {
        for (Eigen::Index x = c * stride; x < (c + 1) * stride; ++x) {
          const int k = img.cluster(y, x);
          if (k >= 0) {
            ++fg;
            ++votes[static_cast<std::size_t>(k)];
          }
        }
      }
      const Eigen::VectorXd* centre = nullptr;
      if (2 * fg > stride * stride) {
        const auto best = std::max_element(votes.begin(), votes.end()) - votes.begin();
        centre = &centres.fg[static_cast<std::size_t>(best)];
      } else {
        const Eigen::Index band = std::min(bands - 1, ((2 * c + 1) * stride * bands) / (2 * n));
        centre = &centres.bg[static_cast<std::size_t>(img.bands[static_cast<std::size_t>(band)])];
      }
      auto row = f.features.row(r * cells + c);
      for (Eigen::Index d = 0; d < dim; ++d) row(d) = (*centre)(d) + noise(rng);
    }
  }
  return f;
}

}  // namespace

void SyntheticEpisodeSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::DegenerateSpec, what); };
  if (image_size < 1) fail("image_size must be >= 1");
  if (level_strides.empty()) fail("no levels");
  if (level_dims.size() != level_strides.size()) fail("level_dims and level_strides differ in length");
  for (std::size_t a = 0; a < level_strides.size(); ++a) {
    if (level_strides[a] < 1 || image_size % level_strides[a] != 0) {
      fail("image_size " + std::to_string(image_size) + " not divisible by stride " +
           std::to_string(level_strides[a]));
    }
    if (level_dims[a] < 1) fail("feature dim must be >= 1");
  }
  if (fg_clusters < 1) fail("need at least one foreground cluster");
  if (bg_clusters < 1) fail("need at least one background cluster");
  if (bg_per_image < 1 || bg_per_image > bg_clusters) fail("bg_per_image must be in [1, bg_clusters]");
  if (!(cluster_radius > 0.0) || !(spread >= 0.0)) fail("cluster_radius > 0 and spread >= 0 required");
  if (blobs_per_image < 1) fail("blobs_per_image must be >= 1");
  if (blob_min < 1 || blob_min > blob_max) fail("need 1 <= blob_min <= blob_max");
  if (blob_max > image_size) {
    fail("blob extent " + std::to_string(blob_max) + " exceeds image " + std::to_string(image_size));
  }
  if (shots < 1) fail("shots must be >= 1");
  if (layout == ClusterLayout::Antipodal) {
    if (fg_clusters % 2 != 0 || bg_clusters % 2 != 0) fail("antipodal layout needs even cluster counts");
    const Eigen::Index pairs = (fg_clusters + bg_clusters) / 2;
    for (auto d : level_dims) {
      if (d < pairs) fail("antipodal layout needs feature dim >= " + std::to_string(pairs));
    }
  }
}

SyntheticEpisodeSpec standard_spec() {
  SyntheticEpisodeSpec s;
  s.level_dims = {8, 16};
  s.fg_clusters = 3;
  s.bg_clusters = 4;
  s.bg_per_image = 2;
  s.blobs_per_image = 1;
  s.blob_min = 64;
  s.blob_max = 160;
  return s;
}

SyntheticEpisodeSpec xor_spec() {
  SyntheticEpisodeSpec s;
  s.level_dims = {8, 16};
  s.layout = ClusterLayout::Antipodal;
  s.fg_clusters = 2;
  s.bg_clusters = 2;
  s.bg_per_image = 2;
  s.blobs_per_image = 2;
  s.blob_min = 64;
  s.blob_max = 128;
  return s;
}

std::uint64_t episode_seed(std::uint64_t seed, std::size_t index) {
  // splitmix64 of (seed, index)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Episode generate_episode(const SyntheticEpisodeSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t levels = spec.level_strides.size();

  std::vector<Centres> centres;
  for (std::size_t a = 0; a < levels; ++a) centres.push_back(make_centres(spec, spec.level_dims[a], rng));

  auto make_image = [&](Mask& mask, std::vector<FeatureMap>& features) {
    const ImageLayout img = make_layout(spec, rng);
    for (std::size_t a = 0; a < levels; ++a) {
      features.push_back(make_features(spec, img, centres[a], spec.level_strides[a], rng));
    }
    mask = img.mask;
  };

  Episode ep;
  ep.class_id = spec.class_id;
  ep.level_strides = spec.level_strides;
  make_image(ep.query_mask, ep.query);
  for (Eigen::Index k = 0; k < spec.shots; ++k) {
    SupportSample s;
    make_image(s.mask, s.levels);
    ep.support.push_back(std::move(s));
  }
  return ep;
}

}  // namespace dgp

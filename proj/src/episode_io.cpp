#include <string>

#include "dgp/episode.hpp"
#include "dgp/error.hpp"
#include "dgp/tensor_io.hpp"

namespace dgp {
namespace fs = std::filesystem;
namespace {

fs::path support_features(const fs::path& dir, std::size_t k, std::size_t a) {
  return dir / ("feat_s" + std::to_string(k) + "_l" + std::to_string(a) + ".dgpt");
}
fs::path support_mask(const fs::path& dir, std::size_t k) {
  return dir / ("mask_s" + std::to_string(k) + ".dgpt");
}
fs::path query_features(const fs::path& dir, std::size_t a) {
  return dir / ("feat_q_l" + std::to_string(a) + ".dgpt");
}
fs::path query_mask(const fs::path& dir) { return dir / "mask_q.dgpt"; }

DenseTensor load_required(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::Io, "missing " + path.string());
  return load_tensor(path);
}

Mask load_mask(const fs::path& path) {
  try {
    return to_mask(load_required(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidMask) throw e.with_context(path.string());
    throw;
  }
}

FeatureMap load_features(const fs::path& path) {
  try {
    return feature_map_from_tensor(load_required(path));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ShapeMismatch) throw e.with_context(path.string());
    throw;
  }
}

}  // namespace

FeatureMap feature_map_from_tensor(const DenseTensor& t) {
  if (t.rank() != 3) {
    throw Error(ErrorKind::ShapeMismatch, "feature tensor must be [H, W, D], got rank " +
                                              std::to_string(t.rank()));
  }
  FeatureMap f;
  f.height = static_cast<Eigen::Index>(t.shape()[0]);
  f.width = static_cast<Eigen::Index>(t.shape()[1]);
  const auto d = static_cast<Eigen::Index>(t.shape()[2]);
  const auto values = t.to_doubles();
  f.features = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), f.height * f.width, d);
  return f;
}

DenseTensor feature_map_to_tensor(const FeatureMap& f) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = f.features;
  return DenseTensor({static_cast<std::uint64_t>(f.height), static_cast<std::uint64_t>(f.width),
                      static_cast<std::uint64_t>(f.dim())},
                     std::vector<double>(rm.data(), rm.data() + rm.size()));
}

DenseTensor spatial_map_to_tensor(const SpatialMap& m) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m.data;
  return DenseTensor({static_cast<std::uint64_t>(m.height), static_cast<std::uint64_t>(m.width),
                      static_cast<std::uint64_t>(m.channels())},
                     std::vector<double>(rm.data(), rm.data() + rm.size()));
}

Episode load_episode_dir(const fs::path& dir, const std::vector<Eigen::Index>& level_strides) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "not a directory: " + dir.string());
  Episode ep;
  ep.level_strides = level_strides;
  const std::size_t levels = level_strides.size();

  for (std::size_t k = 0; fs::exists(support_mask(dir, k)); ++k) {
    SupportSample s;
    s.mask = load_mask(support_mask(dir, k));
    for (std::size_t a = 0; a < levels; ++a) s.levels.push_back(load_features(support_features(dir, k, a)));
    ep.support.push_back(std::move(s));
  }
  if (ep.support.empty()) throw Error(ErrorKind::Io, "missing " + support_mask(dir, 0).string());

  for (std::size_t a = 0; a < levels; ++a) ep.query.push_back(load_features(query_features(dir, a)));
  if (fs::exists(query_mask(dir))) ep.query_mask = load_mask(query_mask(dir));

  ep.validate();
  return ep;
}

void save_episode_dir(const Episode& ep, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < ep.support.size(); ++k) {
    save_tensor(from_mask(ep.support[k].mask), support_mask(dir, k));
    for (std::size_t a = 0; a < ep.support[k].levels.size(); ++a) {
      save_tensor(feature_map_to_tensor(ep.support[k].levels[a]), support_features(dir, k, a));
    }
  }
  for (std::size_t a = 0; a < ep.query.size(); ++a) {
    save_tensor(feature_map_to_tensor(ep.query[a]), query_features(dir, a));
  }
  if (ep.query_mask.size() != 0) save_tensor(from_mask(ep.query_mask), query_mask(dir));
}

}  // namespace dgp

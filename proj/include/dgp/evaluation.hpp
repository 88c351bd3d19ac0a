#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dgp/episode.hpp"

namespace dgp {

// ---------------------------------------------------------------------------
// Metrics

struct IouCounts {
  std::int64_t intersection = 0;
  std::int64_t union_ = 0;

  IouCounts& operator+=(const IouCounts& o) {
    intersection += o.intersection;
    union_ += o.union_;
    return *this;
  }
};

IouCounts iou_counts(const Mask& pred, const Mask& gt);

/// |pred & gt| / |pred | gt|; `empty_value` when both masks are empty.
double iou(const Mask& pred, const Mask& gt, double empty_value = 1.0);

/// Per-class intersection and union summed over a fold's episodes. The class
/// IoU is the ratio of the sums, and mIoU averages it over classes with a
/// non-zero union (1.0 if there are none).
class FoldResult {
 public:
  void add(int class_id, const Mask& pred, const Mask& gt);
  void add(int class_id, const IouCounts& counts);
  void merge(const FoldResult& other);

  double miou() const;
  std::map<int, double> per_class_iou() const;
  const std::map<int, IouCounts>& counts() const noexcept { return counts_; }
  std::size_t episodes() const noexcept { return episodes_; }

 private:
  std::map<int, IouCounts> counts_;
  std::size_t episodes_ = 0;
};

struct FoldItem {
  int class_id = 0;
  Mask pred;
  Mask gt;
};

FoldResult aggregate_fold(std::span<const FoldItem> items);

// ---------------------------------------------------------------------------
// Synthetic episodes

enum class ClusterLayout {
  /// Cluster centres at independent random directions.
  Random,
  /// Foreground and background clusters come in antipodal pairs +u / -u along
  /// mutually orthogonal directions, so no hyperplane through the origin
  /// separates foreground from background.
  Antipodal,
};

struct SyntheticEpisodeSpec {
  std::uint64_t seed = 0;
  Eigen::Index image_size = 256;  // H0 = W0
  std::vector<Eigen::Index> level_strides{16, 32};
  std::vector<Eigen::Index> level_dims{16, 16};

  int fg_clusters = 3;   // C, appearance modes of the class
  int bg_clusters = 4;
  int bg_per_image = 2;  // background clusters visible per image, as vertical bands
  double cluster_radius = 4.0;
  double spread = 0.3;   // per-coordinate std of features around their centre
  ClusterLayout layout = ClusterLayout::Random;

  int blobs_per_image = 1;
  Eigen::Index blob_min = 64;  // ellipse axis extents in pixels
  Eigen::Index blob_max = 128;

  Eigen::Index shots = 1;
  int class_id = 0;

  /// Throws degenerate-spec.
  void validate() const;
};

/// Multimodal few-shot task: 3 foreground modes, 4 background modes.
SyntheticEpisodeSpec standard_spec();
/// Two antipodal foreground modes, two antipodal background modes, both
/// foreground modes present in every image.
SyntheticEpisodeSpec xor_spec();

/// Deterministic per seed. Support k depends only on the seed and k, so the
/// supports of a K-shot episode are a prefix of those of any larger K.
Episode generate_episode(const SyntheticEpisodeSpec& spec);

/// Seed of episode `index` in a sweep rooted at `seed`.
std::uint64_t episode_seed(std::uint64_t seed, std::size_t index);

/// Runs `episodes` seeded episodes (class ids cycling over `num_classes`) and
/// aggregates them into one fold.
FoldResult evaluate_synthetic(const SyntheticEpisodeSpec& spec, const PipelineConfig& cfg,
                              std::size_t episodes, unsigned workers = 1, int num_classes = 5);

// ---------------------------------------------------------------------------
// K-shot sweep

struct SweepRow {
  Eigen::Index shots = 0;
  double mean_miou = 0.0;
  double std_miou = 0.0;
};

struct SweepOptions {
  std::size_t episodes = 200;
  /// Episodes are split round-robin into this many folds; the row reports the
  /// mean and sample std of the fold mIoUs.
  std::size_t runs = 5;
  unsigned workers = 1;
  int num_classes = 5;
};

/// Throws invalid-argument on an empty shot list.
std::vector<SweepRow> kshot_sweep(const SyntheticEpisodeSpec& spec, const PipelineConfig& cfg,
                                  std::span<const Eigen::Index> shots, const SweepOptions& opts);

/// Header "K,mean_miou,std", values with 6 decimals.
void write_kshot_csv(std::ostream& out, std::span<const SweepRow> rows);

// ---------------------------------------------------------------------------
// Runtime benchmark

struct BenchRow {
  std::string phase;  // mask_encode | fit | predict | window | readout
  Eigen::Index support_size = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  /// Least-squares slope of log(fit time) against log(S); needs two sizes.
  std::optional<double> fit_exponent;
};

/// Times each pipeline phase per level for every K in `shots`, averaged over
/// `runs` repetitions. Empty `shots` gives an empty report.
BenchReport bench_runtimes(const SyntheticEpisodeSpec& spec, const PipelineConfig& cfg,
                           std::span<const Eigen::Index> shots, std::size_t runs = 100);

double loglog_slope(std::span<const double> x, std::span<const double> y);

/// Header "phase,S,mean_ms,std_ms".
void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows);

}  // namespace dgp

#include "dgp/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include "dgp/error.hpp"
#include "dgp/parallel.hpp"

namespace dgp {

IouCounts iou_counts(const Mask& pred, const Mask& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "prediction " + std::to_string(pred.rows()) + "x" +
                                              std::to_string(pred.cols()) + " vs ground truth " +
                                              std::to_string(gt.rows()) + "x" +
                                              std::to_string(gt.cols()));
  }
  return {(pred && gt).count(), (pred || gt).count()};
}

double iou(const Mask& pred, const Mask& gt, double empty_value) {
  const auto c = iou_counts(pred, gt);
  if (c.union_ == 0) return empty_value;
  return static_cast<double>(c.intersection) / static_cast<double>(c.union_);
}

void FoldResult::add(int class_id, const Mask& pred, const Mask& gt) {
  add(class_id, iou_counts(pred, gt));
}

void FoldResult::add(int class_id, const IouCounts& counts) {
  counts_[class_id] += counts;
  ++episodes_;
}

void FoldResult::merge(const FoldResult& other) {
  for (const auto& [cls, c] : other.counts_) counts_[cls] += c;
  episodes_ += other.episodes_;
}

std::map<int, double> FoldResult::per_class_iou() const {
  std::map<int, double> out;
  for (const auto& [cls, c] : counts_) {
    if (c.union_ > 0) out[cls] = static_cast<double>(c.intersection) / static_cast<double>(c.union_);
  }
  return out;
}

double FoldResult::miou() const {
  const auto per_class = per_class_iou();
  if (per_class.empty()) return 1.0;
  double sum = 0.0;
  for (const auto& [cls, v] : per_class) sum += v;
  return sum / static_cast<double>(per_class.size());
}

FoldResult aggregate_fold(std::span<const FoldItem> items) {
  FoldResult fold;
  for (const auto& item : items) fold.add(item.class_id, item.pred, item.gt);
  return fold;
}

namespace {

// Per-episode counts, in episode order.
std::vector<IouCounts> run_synthetic(const SyntheticEpisodeSpec& spec, const PipelineConfig& cfg,
                                     std::size_t episodes, unsigned workers) {
  PipelineConfig mean_cfg = cfg;
  mean_cfg.mean_only = true;  // the readout only consumes the mean
  return parallel_map(episodes, workers, [&](std::size_t e) {
    SyntheticEpisodeSpec s = spec;
    s.seed = episode_seed(spec.seed, e);
    const Episode ep = generate_episode(s);
    const EpisodeResult r = run_episode(ep, mean_cfg);
    return iou_counts(r.prediction, ep.query_mask);
  });
}

}  // namespace

FoldResult evaluate_synthetic(const SyntheticEpisodeSpec& spec, const PipelineConfig& cfg,
                              std::size_t episodes, unsigned workers, int num_classes) {
  const auto counts = run_synthetic(spec, cfg, episodes, workers);
  FoldResult fold;
  for (std::size_t e = 0; e < counts.size(); ++e) {
    fold.add(static_cast<int>(e % static_cast<std::size_t>(num_classes)), counts[e]);
  }
  return fold;
}

std::vector<SweepRow> kshot_sweep(const SyntheticEpisodeSpec& spec, const PipelineConfig& cfg,
                                  std::span<const Eigen::Index> shots, const SweepOptions& opts) {
  if (shots.empty()) throw Error(ErrorKind::InvalidArgument, "empty shot list");
  if (opts.episodes == 0) throw Error(ErrorKind::InvalidArgument, "episodes must be >= 1");
  if (opts.num_classes < 1) throw Error(ErrorKind::InvalidArgument, "num_classes must be >= 1");
  for (auto k : shots) {
    if (k < 1) throw Error(ErrorKind::InvalidArgument, "shot count must be >= 1");
  }
  const std::size_t runs = std::max<std::size_t>(1, std::min(opts.runs, opts.episodes));

  std::vector<SweepRow> rows;
  for (auto k : shots) {
    SyntheticEpisodeSpec s = spec;
    s.shots = k;
    const auto counts = run_synthetic(s, cfg, opts.episodes, opts.workers);

    std::vector<FoldResult> folds(runs);
    for (std::size_t e = 0; e < counts.size(); ++e) {
      folds[e % runs].add(static_cast<int>(e % static_cast<std::size_t>(opts.num_classes)), counts[e]);
    }
    double mean = 0.0;
    for (const auto& f : folds) mean += f.miou();
    mean /= static_cast<double>(runs);
    double var = 0.0;
    for (const auto& f : folds) var += (f.miou() - mean) * (f.miou() - mean);
    const double sd = runs > 1 ? std::sqrt(var / static_cast<double>(runs - 1)) : 0.0;
    rows.push_back({k, mean, sd});
  }
  return rows;
}

void write_kshot_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "K,mean_miou,std\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%ld,%.6f,%.6f\n", static_cast<long>(r.shots), r.mean_miou,
                  r.std_miou);
    out << buf;
  }
}

}  // namespace dgp

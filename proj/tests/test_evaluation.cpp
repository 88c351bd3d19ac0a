#include <algorithm>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "dgp/error.hpp"
#include "dgp/evaluation.hpp"

using namespace dgp;

namespace {

bool same_mask(const Mask& a, const Mask& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a == b).all();
}

// 1 x n mask set on [from, to).
Mask strip(Eigen::Index n, Eigen::Index from, Eigen::Index to) {
  Mask m = Mask::Constant(1, n, false);
  m.block(0, from, 1, to - from).setConstant(true);
  return m;
}

TEST(Iou, Basics) {
  const Mask a = strip(8, 2, 6);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(strip(8, 0, 8), strip(8, 0, 4)), 0.5);
  EXPECT_EQ(iou(strip(8, 0, 4), strip(8, 4, 8)), 0.0);
  const Mask empty = Mask::Constant(1, 8, false);
  EXPECT_EQ(iou(empty, empty), 1.0);
  EXPECT_EQ(iou(empty, empty, 0.0), 0.0);
  EXPECT_THROW(iou(a, Mask::Constant(2, 4, false)), Error);
}

TEST(Iou, Counts) {
  const IouCounts c = iou_counts(strip(10, 0, 6), strip(10, 3, 9));
  EXPECT_EQ(c.intersection, 3);
  EXPECT_EQ(c.union_, 9);
}

TEST(AggregateFold, AccumulatesPerClassBeforeDividing) {
  // (I=1, U=2) and (I=3, U=4) for the same class.
  const std::vector<FoldItem> items{{0, strip(4, 0, 2), strip(4, 0, 1)}, {0, strip(4, 0, 4), strip(4, 0, 3)}};
  ASSERT_EQ(iou_counts(items[0].pred, items[0].gt).union_, 2);
  ASSERT_EQ(iou_counts(items[1].pred, items[1].gt).intersection, 3);
  const FoldResult fold = aggregate_fold(items);
  EXPECT_EQ(fold.miou(), 2.0 / 3.0);
  EXPECT_NE(fold.miou(), 0.625);
  EXPECT_EQ(fold.episodes(), 2u);
  EXPECT_EQ(fold.per_class_iou().at(0), 4.0 / 6.0);
}

TEST(AggregateFold, SimpleCases) {
  const std::vector<FoldItem> perfect{{3, strip(5, 1, 4), strip(5, 1, 4)}};
  EXPECT_EQ(aggregate_fold(perfect).miou(), 1.0);

  FoldResult two;
  two.add(0, IouCounts{1, 5});
  two.add(1, IouCounts{4, 5});
  EXPECT_DOUBLE_EQ(two.miou(), 0.5);

  // A class that never has any pixels does not contribute.
  two.add(2, IouCounts{0, 0});
  EXPECT_DOUBLE_EQ(two.miou(), 0.5);
  EXPECT_EQ(FoldResult{}.miou(), 1.0);
}

TEST(AggregateFold, OrderIndependent) {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.4);
  std::vector<FoldItem> items;
  for (int e = 0; e < 30; ++e) {
    FoldItem it{e % 4, Mask(6, 7), Mask(6, 7)};
    for (Eigen::Index i = 0; i < it.pred.size(); ++i) {
      it.pred.data()[i] = coin(rng);
      it.gt.data()[i] = coin(rng);
    }
    items.push_back(it);
  }
  const double ref = aggregate_fold(items).miou();
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(items.begin(), items.end(), rng);
    EXPECT_EQ(aggregate_fold(items).miou(), ref);
  }

  FoldResult a = aggregate_fold(std::span(items).first(10));
  a.merge(aggregate_fold(std::span(items).subspan(10)));
  EXPECT_EQ(a.miou(), ref);
  EXPECT_EQ(a.episodes(), 30u);
}

TEST(Synthetic, DeterministicPerSeed) {
  SyntheticEpisodeSpec spec = standard_spec();
  spec.seed = 21;
  spec.shots = 3;
  const Episode a = generate_episode(spec);
  const Episode b = generate_episode(spec);
  ASSERT_EQ(a.shots(), 3);
  EXPECT_TRUE(same_mask(a.query_mask, b.query_mask));
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_TRUE(same_mask(a.support[k].mask, b.support[k].mask));
    EXPECT_EQ(a.support[k].levels[0].features, b.support[k].levels[0].features);
  }
  spec.seed = 22;
  EXPECT_NE(generate_episode(spec).query[0].features, a.query[0].features);
}

TEST(Synthetic, ShapesFollowSpec) {
  const SyntheticEpisodeSpec spec = standard_spec();
  const Episode ep = generate_episode(spec);
  EXPECT_NO_THROW(ep.validate());
  EXPECT_EQ(ep.image_height(), spec.image_size);
  for (std::size_t a = 0; a < spec.level_strides.size(); ++a) {
    EXPECT_EQ(ep.query[a].height, spec.image_size / spec.level_strides[a]);
    EXPECT_EQ(ep.query[a].dim(), spec.level_dims[a]);
  }
  EXPECT_TRUE(ep.query_mask.any());
  EXPECT_FALSE(ep.query_mask.all());
}

TEST(Synthetic, SingleTightClusterIsEasy) {
  SyntheticEpisodeSpec spec = standard_spec();
  spec.fg_clusters = 1;
  spec.spread = 1e-3;
  // Every background cluster appears in every image, so the query holds no
  // appearance the support has not seen.
  spec.bg_clusters = 2;
  PipelineConfig cfg;
  cfg.noise_sq = 1e-4;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    spec.seed = seed;
    const Episode ep = generate_episode(spec);
    const EpisodeResult res = run_episode(ep, cfg);
    // Level 1 has stride 32, so no support subsampling happens there.
    const Mask pred = threshold_map(res.levels[1].mean_map.channel(0), 0.0);
    const Mask gt = threshold_map(downsample_mask(ep.query_mask, 32), 0.5);
    EXPECT_GE(iou(pred, gt), 0.9) << "seed " << seed;
  }
}

TEST(Synthetic, DegenerateSpecs) {
  auto expect_degenerate = [](const SyntheticEpisodeSpec& s) {
    try {
      s.validate();
      ADD_FAILURE() << "accepted";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::DegenerateSpec);
    }
  };
  SyntheticEpisodeSpec s = standard_spec();
  s.blob_max = s.image_size + 1;
  expect_degenerate(s);
  s = standard_spec();
  s.fg_clusters = 0;
  expect_degenerate(s);
  s = standard_spec();
  s.image_size = 100;
  expect_degenerate(s);
  s = standard_spec();
  s.level_dims = {8};
  expect_degenerate(s);
  s = standard_spec();
  s.shots = 0;
  expect_degenerate(s);
  EXPECT_THROW(generate_episode(s), Error);
}

TEST(Synthetic, EpisodeSeedsAreDistinct) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < 1000; ++i) seeds.push_back(episode_seed(7, i));
  std::sort(seeds.begin(), seeds.end());
  EXPECT_EQ(std::unique(seeds.begin(), seeds.end()), seeds.end());
  EXPECT_EQ(episode_seed(7, 3), episode_seed(7, 3));
  EXPECT_NE(episode_seed(7, 3), episode_seed(8, 3));
}

TEST(Sweep, SingleEpisodeRowIsThatEpisode) {
  SyntheticEpisodeSpec spec = standard_spec();
  spec.seed = 5;
  const std::vector<Eigen::Index> shots{1};
  SweepOptions opts;
  opts.episodes = 1;
  opts.runs = 1;
  const auto rows = kshot_sweep(spec, PipelineConfig{}, shots, opts);
  ASSERT_EQ(rows.size(), 1u);

  PipelineConfig cfg;
  cfg.mean_only = true;
  const double direct = evaluate_synthetic(spec, cfg, 1).miou();
  EXPECT_EQ(rows[0].shots, 1);
  EXPECT_DOUBLE_EQ(rows[0].mean_miou, direct);
  EXPECT_EQ(rows[0].std_miou, 0.0);
}

TEST(Sweep, DeterministicAndParallelSafe) {
  const SyntheticEpisodeSpec spec = standard_spec();
  const std::vector<Eigen::Index> shots{1, 2};
  SweepOptions opts;
  opts.episodes = 10;
  const auto a = kshot_sweep(spec, PipelineConfig{}, shots, opts);
  opts.workers = 3;
  const auto b = kshot_sweep(spec, PipelineConfig{}, shots, opts);
  std::ostringstream ca, cb;
  write_kshot_csv(ca, a);
  write_kshot_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
}

TEST(Sweep, EmptyShotsRejected) {
  try {
    kshot_sweep(standard_spec(), PipelineConfig{}, std::span<const Eigen::Index>{}, SweepOptions{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
}

TEST(Sweep, SeparableSpecImprovesWithShots) {
  SyntheticEpisodeSpec spec = standard_spec();
  spec.fg_clusters = 1;
  const std::vector<Eigen::Index> shots{1, 3};
  SweepOptions opts;
  opts.episodes = 20;
  const auto rows = kshot_sweep(spec, PipelineConfig{}, shots, opts);
  EXPECT_GE(rows[1].mean_miou, rows[0].mean_miou - 2.0 * std::max(rows[0].std_miou, rows[1].std_miou));
}

TEST(Csv, KshotGolden) {
  const std::vector<SweepRow> rows{{1, 0.5, 0.125}, {5, 2.0 / 3.0, 0.0}};
  std::ostringstream out;
  write_kshot_csv(out, rows);
  EXPECT_EQ(out.str(), "K,mean_miou,std\n1,0.500000,0.125000\n5,0.666667,0.000000\n");
}

TEST(Csv, BenchGolden) {
  const std::vector<BenchRow> rows{{"fit", 256, 1.5, 0.25}};
  std::ostringstream out;
  write_bench_csv(out, rows);
  EXPECT_EQ(out.str(), "phase,S,mean_ms,std_ms\nfit,256,1.500000,0.250000\n");
}

TEST(Bench, EmptyShotsGiveEmptyReport) {
  const auto report = bench_runtimes(standard_spec(), PipelineConfig{}, std::span<const Eigen::Index>{}, 3);
  EXPECT_TRUE(report.rows.empty());
  EXPECT_FALSE(report.fit_exponent.has_value());
}

TEST(Bench, DoublingSupportScalesFitTime) {
  SyntheticEpisodeSpec spec = standard_spec();
  spec.image_size = 512;
  spec.level_strides = {32};
  spec.level_dims = {16};
  const std::vector<Eigen::Index> shots{4, 8};
  const auto report = bench_runtimes(spec, PipelineConfig{}, shots, 3);
  std::vector<double> fit, predict;
  for (const auto& r : report.rows) {
    if (r.phase == "fit") fit.push_back(r.mean_ms);
    if (r.phase == "predict") predict.push_back(r.mean_ms);
  }
  ASSERT_EQ(fit.size(), 2u);
  const double ratio = fit[1] / fit[0];
  EXPECT_GE(ratio, 2.0);
  EXPECT_LE(ratio, 10.0);
  EXPECT_GE(fit[1], predict[1]);
  ASSERT_TRUE(report.fit_exponent.has_value());
}

TEST(Bench, LogLogSlope) {
  const std::vector<double> x{1, 2, 4, 8};
  const std::vector<double> y{3, 24, 192, 1536};
  EXPECT_NEAR(loglog_slope(x, y), 3.0, 1e-12);
}

}  // namespace

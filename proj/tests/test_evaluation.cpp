// Copyright 2026 The HVSARN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "hvsarn/evaluation.hpp"
#include "test_support.hpp"

namespace hvsarn {
namespace {

using testing::TempDir;

SegmentPrediction prediction_of(const std::vector<std::pair<double, double>>& segments, std::string id = "q") {
  SegmentPrediction p;
  p.query_id = std::move(id);
  double score = 1.0;
  for (const auto& [s, e] : segments) {
    p.top_segments.push_back({s, e, score, 0, 0});
    score *= 0.5;
  }
  return p;
}

// Independent brute force: overlap length computed case by case.
double brute_iou(double a0, double a1, double b0, double b1) {
  double inter = 0.0;
  if (b0 <= a0 && a0 < b1) inter = std::min(a1, b1) - a0;
  if (a0 <= b0 && b0 < a1) inter = std::min(a1, b1) - b0;
  const double uni = (a1 - a0) + (b1 - b0) - inter;
  return inter / uni;
}

double brute_recall(const std::vector<SegmentPrediction>& preds, const std::vector<GroundTruthSegment>& truths, int n,
                    double m) {
  int hits = 0;
  for (std::size_t q = 0; q < preds.size(); ++q) {
    bool hit = false;
    int seen = 0;
    for (const auto& s : preds[q].top_segments) {
      if (seen++ >= n) break;
      hit = hit || brute_iou(s.start, s.end, truths[q].start, truths[q].end) >= m;
    }
    hits += hit ? 1 : 0;
  }
  return preds.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(preds.size());
}

std::pair<double, double> random_interval(Rng& rng) {
  const double a = std::round(rng.uniform() * 20.0) / 20.0;
  double b = std::round(rng.uniform() * 20.0) / 20.0;
  if (a == b) b = a < 1.0 ? a + 0.05 : a - 0.05;
  return {std::min(a, b), std::max(a, b)};
}

TEST(TemporalIou, Examples) {
  EXPECT_EQ(temporal_iou({0.0, 1.0}, {0.0, 1.0}), 1.0);
  EXPECT_EQ(temporal_iou({0.0, 0.5}, {0.5, 1.0}), 0.0);
  EXPECT_NEAR(temporal_iou({0.2, 0.6}, {0.4, 0.8}), 0.2 / 0.6, 1e-12);
  EXPECT_EQ(temporal_iou({0.0, 0.1}, {0.5, 0.9}), 0.0);
}

TEST(TemporalIou, DegenerateIntervalThrows) {
  EXPECT_THROW(temporal_iou({0.3, 0.3}, {0.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(temporal_iou({0.0, 1.0}, {0.6, 0.2}), std::invalid_argument);
}

TEST(TemporalIou, GridPropertiesHoldExhaustively) {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i * 0.05);
  for (std::size_t a0 = 0; a0 < grid.size(); ++a0) {
    for (std::size_t a1 = a0 + 1; a1 < grid.size(); ++a1) {
      for (std::size_t b0 = 0; b0 < grid.size(); ++b0) {
        for (std::size_t b1 = b0 + 1; b1 < grid.size(); ++b1) {
          const Interval a{grid[a0], grid[a1]}, b{grid[b0], grid[b1]};
          const double ab = temporal_iou(a, b);
          ASSERT_EQ(ab, temporal_iou(b, a));
          ASSERT_GE(ab, 0.0);
          ASSERT_LE(ab, 1.0);
          ASSERT_EQ(ab == 1.0, a0 == b0 && a1 == b1);
          ASSERT_NEAR(ab, brute_iou(a.start, a.end, b.start, b.end), 1e-12);
        }
      }
    }
  }
}

TEST(Recall, PerfectPredictionsScoreOne) {
  std::vector<SegmentPrediction> preds;
  std::vector<GroundTruthSegment> truths;
  Rng rng(1);
  for (int q = 0; q < 20; ++q) {
    const auto [s, e] = random_interval(rng);
    preds.push_back(prediction_of({{s, e}, {0.0, 0.05}}));
    truths.push_back({s, e});
  }
  for (double m : {0.1, 0.5, 0.7, 1.0}) EXPECT_EQ(recall_at(preds, truths, 1, m), 1.0);
}

TEST(Recall, LargeNUsesAllSegments) {
  const std::vector<SegmentPrediction> preds = {prediction_of({{0.0, 0.1}, {0.4, 0.6}})};
  const std::vector<GroundTruthSegment> truths = {{0.4, 0.6}};
  EXPECT_EQ(recall_at(preds, truths, 1, 0.5), 0.0);
  EXPECT_EQ(recall_at(preds, truths, 100, 0.5), 1.0);
}

TEST(Recall, LengthMismatchThrows) {
  EXPECT_THROW(recall_at({prediction_of({{0.0, 1.0}})}, {}, 1, 0.5), std::invalid_argument);
}

TEST(Recall, MatchesBruteForceAndIsMonotone) {
  Rng rng(2);
  for (int set = 0; set < 200; ++set) {
    std::vector<SegmentPrediction> preds;
    std::vector<GroundTruthSegment> truths;
    const int queries = 1 + static_cast<int>(rng.below(15));
    for (int q = 0; q < queries; ++q) {
      std::vector<std::pair<double, double>> segs;
      const int count = static_cast<int>(rng.below(8));
      for (int i = 0; i < count; ++i) segs.push_back(random_interval(rng));
      preds.push_back(prediction_of(segs));
      const auto [s, e] = random_interval(rng);
      truths.push_back({s, e});
    }
    for (int n : {1, 2, 5, 10}) {
      for (double m : {0.12, 0.31, 0.52, 0.73, 0.91}) {
        ASSERT_EQ(recall_at(preds, truths, n, m), brute_recall(preds, truths, n, m));
        ASSERT_LE(recall_at(preds, truths, n, m), recall_at(preds, truths, n + 1, m));
        ASSERT_GE(recall_at(preds, truths, n, m), recall_at(preds, truths, n, m + 0.05));
      }
    }
  }
}

TEST(Recall, InfinitesimalThresholdCountsOverlaps) {
  Rng rng(3);
  std::vector<SegmentPrediction> preds;
  std::vector<GroundTruthSegment> truths;
  int overlapping = 0;
  for (int q = 0; q < 100; ++q) {
    const auto seg = random_interval(rng);
    const auto [s, e] = random_interval(rng);
    preds.push_back(prediction_of({seg}));
    truths.push_back({s, e});
    overlapping += std::min(seg.second, e) > std::max(seg.first, s) ? 1 : 0;
  }
  EXPECT_DOUBLE_EQ(recall_at(preds, truths, 1, 1e-12), overlapping / 100.0);
  EXPECT_EQ(recall_at(preds, truths, 1, 0.0), 1.0);
}

TEST(MetricGrid, DefaultAndParse) {
  const auto grid = default_metric_grid();
  ASSERT_EQ(grid.size(), 6u);
  EXPECT_EQ(metric_name(grid[1]), "R@1,IoU=0.5");
  const auto parsed = parse_metric_grid("1:0.5,5:0.7");
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[1].n, 5);
  EXPECT_DOUBLE_EQ(parsed[1].m, 0.7);
  EXPECT_THROW(parse_metric_grid("1-0.5"), std::invalid_argument);
  EXPECT_THROW(parse_metric_grid("0:0.5"), std::invalid_argument);
  EXPECT_THROW(parse_metric_grid("1:1.5"), std::invalid_argument);
  EXPECT_THROW(parse_metric_grid(""), std::invalid_argument);
}

TEST(Report, RecallIsHitsOverCount) {
  Rng rng(4);
  std::vector<SegmentPrediction> preds;
  std::vector<GroundTruthSegment> truths;
  for (int q = 0; q < 30; ++q) {
    preds.push_back(prediction_of({random_interval(rng), random_interval(rng)}, "q" + std::to_string(q)));
    const auto [s, e] = random_interval(rng);
    truths.push_back({s, e});
  }
  const auto report = evaluate(preds, truths, default_metric_grid());
  EXPECT_EQ(report.count(), 30u);
  for (std::size_t g = 0; g < report.grid.size(); ++g) {
    int hits = 0;
    for (const auto& row : report.hits) hits += row[g] ? 1 : 0;
    EXPECT_DOUBLE_EQ(report.recall[g], hits / 30.0);
    EXPECT_DOUBLE_EQ(report.recall[g], recall_at(preds, truths, report.grid[g].n, report.grid[g].m));
  }
  const auto tsv = format_report_tsv({{"model", report}});
  EXPECT_EQ(tsv.substr(0, tsv.find('\n')),
            "setting\tR@1,IoU=0.3\tR@1,IoU=0.5\tR@1,IoU=0.7\tR@5,IoU=0.3\tR@5,IoU=0.5\tR@5,IoU=0.7");
}

TEST(PredictionFile, RoundTripAndAlign) {
  TempDir dir;
  std::vector<SegmentPrediction> preds = {prediction_of({{0.1, 0.3}, {0.2, 0.9}}, "b"),
                                          prediction_of({{0.0, 0.5}}, "a")};
  write_predictions(dir / "p.jsonl", preds, 5);
  const auto loaded = read_predictions(dir / "p.jsonl");
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].query_id, "b");
  ASSERT_EQ(loaded[0].top_segments.size(), 2u);
  EXPECT_EQ(loaded[0].top_segments[1].end, 0.9);
  EXPECT_EQ(loaded[0].top_segments[1].score, 0.5);

  std::vector<Sample> samples(2);
  samples[0].query.query_id = "a";
  samples[1].query.query_id = "b";
  const auto aligned = align_predictions(loaded, samples);
  EXPECT_EQ(aligned[0].query_id, "a");
  EXPECT_EQ(aligned[1].query_id, "b");
  samples[1].query.query_id = "c";
  EXPECT_THROW(align_predictions(loaded, samples), std::invalid_argument);
}

TEST(PredictionFile, TruncatesToMaxSegments) {
  TempDir dir;
  write_predictions(dir / "p.jsonl", {prediction_of({{0.1, 0.3}, {0.2, 0.9}, {0.0, 1.0}})}, 2);
  EXPECT_EQ(read_predictions(dir / "p.jsonl")[0].top_segments.size(), 2u);
}

TEST(PredictionFile, MalformedLineNamesTheLine) {
  TempDir dir;
  io::write_text_atomic(dir / "p.jsonl", "{\"query_id\": \"a\", \"segments\": []}\n{\"query_id\": 3}\n");
  try {
    read_predictions(dir / "p.jsonl");
    FAIL() << "expected a format error";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.field(), "p.jsonl:2");
  }
}

TEST(Ablation, EmptyConfigListGivesEmptyTable) {
  const std::vector<Sample> data = {synth_sample(1, 4, 2, Difficulty::separable)};
  const auto rows = ablation_report<float>({}, data, data, TrainConfig{}, default_metric_grid());
  EXPECT_TRUE(rows.empty());
  EXPECT_EQ(format_ablation_tsv(rows).find('\n'), format_ablation_tsv(rows).size() - 1);
}

TEST(Ablation, SingleFullConfigGivesOneRowInRange) {
  std::vector<Sample> data;
  for (int i = 0; i < 4; ++i) data.push_back(synth_sample(i, 6, 2, Difficulty::separable));
  ModelConfig c;
  c.hidden = 8;
  c.steps = 1;
  TrainConfig hp;
  hp.steps = 5;
  hp.batch = 2;
  const auto rows = ablation_report<float>({{"full", c}}, data, data, hp, default_metric_grid());
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].label, "Full model");
  for (double r : rows[0].report.recall) {
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
  }
  EXPECT_NE(format_ablation_tsv(rows).find("Full model"), std::string::npos);
}

TEST(Ablation, SettingsMapToConfigs) {
  ModelConfig base;
  EXPECT_FALSE(ablate(base, "object_only").use_frame_level);
  EXPECT_FALSE(ablate(base, "frame_only").use_object_level);
  EXPECT_EQ(ablate(base, "two_stream").fusion, FusionMode::two_stream);
  EXPECT_FALSE(ablate(base, "wo_visual").use_visual_graph);
  EXPECT_FALSE(ablate(base, "wo_semantic").use_semantic_graph);
  const auto none = ablate(base, "wo_visual_semantic");
  EXPECT_FALSE(none.use_semantic_graph);
  EXPECT_EQ(none.steps, 0);
  EXPECT_EQ(ablate(base, "gcn_fusion").reasoner, ReasonerKind::gcn_fusion);
  EXPECT_THROW(ablate(base, "bogus"), std::invalid_argument);
  EXPECT_EQ(ablation_label("wo_visual_semantic"), "w/o visual+semantic");
}

}  // namespace
}  // namespace hvsarn

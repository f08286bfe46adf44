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

#pragma once

// Temporal IoU, "R@n, IoU=m" recall, prediction dumps and the ablation
// harness.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hvsarn/config.hpp"
#include "hvsarn/data_model.hpp"
#include "hvsarn/io.hpp"
#include "hvsarn/localization.hpp"
#include "hvsarn/model.hpp"
#include "hvsarn/training.hpp"

namespace hvsarn {

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

// |a ∩ b| / |a ∪ b|; touching or disjoint intervals give 0.
inline double temporal_iou(Interval a, Interval b) {
  if (!(a.start < a.end) || !(b.start < b.end)) throw std::invalid_argument("temporal_iou: degenerate interval");
  const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  if (inter <= 0.0) return 0.0;
  const double uni = std::max(a.end, b.end) - std::min(a.start, b.start);
  return inter / uni;
}

inline bool hit_at(const SegmentPrediction& p, const GroundTruthSegment& truth, int n, double m) {
  const auto limit = std::min<std::size_t>(static_cast<std::size_t>(std::max(n, 0)), p.top_segments.size());
  for (std::size_t i = 0; i < limit; ++i) {
    const auto& s = p.top_segments[i];
    if (temporal_iou({s.start, s.end}, {truth.start, truth.end}) >= m) return true;
  }
  return false;
}

// Fraction of queries with any of the top-n segments at IoU >= m. When fewer
// than n segments exist, all of them are used.
inline double recall_at(const std::vector<SegmentPrediction>& predictions, const std::vector<GroundTruthSegment>& truths,
                        int n, double m) {
  if (predictions.size() != truths.size()) throw std::invalid_argument("recall_at: prediction/truth count mismatch");
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < predictions.size(); ++q) hits += hit_at(predictions[q], truths[q], n, m) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

struct MetricPoint {
  int n = 1;
  double m = 0.5;
};

inline std::vector<MetricPoint> default_metric_grid() {
  return {{1, 0.3}, {1, 0.5}, {1, 0.7}, {5, 0.3}, {5, 0.5}, {5, 0.7}};
}

// "n:m[,n:m...]"
inline std::vector<MetricPoint> parse_metric_grid(const std::string& text) {
  std::vector<MetricPoint> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("metrics: expected n:m, got '" + item + "'");
    MetricPoint p;
    try {
      std::size_t used = 0;
      p.n = std::stoi(item.substr(0, colon), &used);
      p.m = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("metrics: cannot parse '" + item + "'");
    }
    if (p.n < 1 || p.m < 0.0 || p.m > 1.0) throw std::invalid_argument("metrics: out of range '" + item + "'");
    grid.push_back(p);
  }
  if (grid.empty()) throw std::invalid_argument("metrics: empty grid");
  return grid;
}

inline std::string metric_name(const MetricPoint& p) {
  std::ostringstream os;
  os << "R@" << p.n << ",IoU=" << p.m;
  return os.str();
}

struct MetricReport {
  std::vector<MetricPoint> grid;
  std::vector<double> recall;             // per grid point
  std::vector<std::string> query_ids;
  std::vector<std::vector<bool>> hits;    // [query][grid point]
  std::size_t count() const { return query_ids.size(); }
};

inline MetricReport evaluate(const std::vector<SegmentPrediction>& predictions,
                             const std::vector<GroundTruthSegment>& truths, const std::vector<MetricPoint>& grid) {
  if (predictions.size() != truths.size()) throw std::invalid_argument("evaluate: prediction/truth count mismatch");
  MetricReport r;
  r.grid = grid;
  for (std::size_t q = 0; q < predictions.size(); ++q) {
    r.query_ids.push_back(predictions[q].query_id);
    std::vector<bool> row;
    for (const auto& p : grid) row.push_back(hit_at(predictions[q], truths[q], p.n, p.m));
    r.hits.push_back(std::move(row));
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::size_t h = 0;
    for (const auto& row : r.hits) h += row[g] ? 1 : 0;
    r.recall.push_back(predictions.empty() ? 0.0 : static_cast<double>(h) / static_cast<double>(predictions.size()));
  }
  return r;
}

// Tab-separated, one header row of metric names and one row of percentages.
inline std::string format_report_tsv(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::ostringstream os;
  os << "setting";
  if (!rows.empty()) {
    for (const auto& p : rows.front().second.grid) os << '\t' << metric_name(p);
  }
  os << '\n';
  for (const auto& [name, report] : rows) {
    os << name;
    for (double r : report.recall) os << '\t' << std::fixed << std::setprecision(2) << 100.0 * r;
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Prediction dumps: one JSON object per line,
//   {"query_id": ..., "segments": [[start, end, score], ...]}

inline std::string prediction_to_jsonl(const SegmentPrediction& p, std::size_t max_segments) {
  nlohmann::json j;
  j["query_id"] = p.query_id;
  j["segments"] = nlohmann::json::array();
  for (std::size_t i = 0; i < std::min(max_segments, p.top_segments.size()); ++i) {
    const auto& s = p.top_segments[i];
    j["segments"].push_back({s.start, s.end, s.score});
  }
  return j.dump();
}

inline void write_predictions(const fs::path& path, const std::vector<SegmentPrediction>& predictions,
                              std::size_t max_segments) {
  std::ostringstream os;
  for (const auto& p : predictions) os << prediction_to_jsonl(p, max_segments) << '\n';
  io::write_text_atomic(path, os.str());
}

inline std::vector<SegmentPrediction> read_predictions(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::vector<SegmentPrediction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      SegmentPrediction p;
      p.query_id = j.at("query_id").get<std::string>();
      for (const auto& s : j.at("segments")) {
        ScoredSegment seg;
        seg.start = s.at(0).get<double>();
        seg.end = s.at(1).get<double>();
        seg.score = s.at(2).get<double>();
        if (!(seg.start < seg.end)) throw std::invalid_argument("segment start must precede end");
        p.top_segments.push_back(seg);
      }
      out.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw FormatError(path.filename().string() + ":" + std::to_string(lineno), e.what());
    }
  }
  return out;
}

// Orders predictions to match `samples` by query id.
inline std::vector<SegmentPrediction> align_predictions(const std::vector<SegmentPrediction>& predictions,
                                                        const std::vector<Sample>& samples) {
  std::map<std::string, const SegmentPrediction*> by_id;
  for (const auto& p : predictions) by_id[p.query_id] = &p;
  std::vector<SegmentPrediction> out;
  for (const auto& s : samples) {
    auto it = by_id.find(s.query.query_id);
    if (it == by_id.end()) throw std::invalid_argument("no prediction for query " + s.query.query_id);
    out.push_back(*it->second);
  }
  return out;
}

inline std::vector<GroundTruthSegment> annotations_of(const std::vector<Sample>& samples) {
  std::vector<GroundTruthSegment> out;
  for (const auto& s : samples) {
    if (!s.video.annotation) throw std::invalid_argument("sample " + s.query.query_id + " has no annotation");
    out.push_back(*s.video.annotation);
  }
  return out;
}

template <class S>
std::vector<SegmentPrediction> infer_all(const ParamStore<S>& params, const ModelConfig& config,
                                         const std::vector<Sample>& samples) {
  std::vector<SegmentPrediction> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(infer(params, config, s));
  return out;
}

// ---------------------------------------------------------------------------
// Ablation harness.

struct AblationRow {
  std::string name;
  std::string label;
  ModelConfig config;
  MetricReport report;
  double final_loss = 0.0;
};

// Trains every configuration on `train_set` and evaluates it on `eval_set`.
template <class S = float>
std::vector<AblationRow> ablation_report(const std::vector<std::pair<std::string, ModelConfig>>& configs,
                                         const std::vector<Sample>& train_set, const std::vector<Sample>& eval_set,
                                         const TrainConfig& hp, const std::vector<MetricPoint>& grid) {
  std::vector<AblationRow> rows;
  const auto truths = eval_set.empty() ? std::vector<GroundTruthSegment>{} : annotations_of(eval_set);
  for (const auto& [name, config] : configs) {
    config.validate();
    auto state = make_train_state<S>(config);
    const auto curve = train(state, train_set, hp);
    AblationRow row;
    row.name = name;
    row.label = name;
    for (const auto& s : ablation_settings()) {
      if (s.name == name) row.label = s.label;
    }
    row.config = config;
    row.report = evaluate(infer_all(state.params, config, eval_set), truths, grid);
    row.final_loss = curve.empty() ? 0.0 : curve.back();
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string format_ablation_tsv(const std::vector<AblationRow>& rows) {
  std::vector<std::pair<std::string, MetricReport>> table;
  for (const auto& r : rows) table.emplace_back(r.label, r.report);
  return format_report_tsv(table);
}

}  // namespace hvsarn

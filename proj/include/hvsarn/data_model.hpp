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

// Sample value types, the sample directory format and the synthetic sample
// generator.
//
// A sample directory holds `manifest.json` plus one little-endian float32
// blob per tensor (row-major). Tensors of shape [T, K, d] are held in memory
// as (T*K) x d matrices.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hvsarn/autodiff.hpp"
#include "hvsarn/io.hpp"
#include "hvsarn/rng.hpp"

namespace hvsarn {

// Normalized [0, 1] timestamps.
struct GroundTruthSegment {
  double start = 0.0;
  double end = 1.0;
  bool operator==(const GroundTruthSegment&) const = default;
};

struct VideoSample {
  std::string video_id;
  int num_frames = 0;   // T
  int num_objects = 0;  // K
  Matrix<float> object_features;      // [T*K, D_in]
  Matrix<float> boxes;                // [T*K, 4], x1 y1 x2 y2 in [0, 1]
  Matrix<float> semantic_embeddings;  // [T*K, D_sem]
  std::optional<GroundTruthSegment> annotation;

  int feature_dim() const { return static_cast<int>(object_features.cols()); }
  int semantic_dim() const { return static_cast<int>(semantic_embeddings.cols()); }
};

struct QuerySample {
  std::string query_id;
  Matrix<float> token_embeddings;  // [N, D_w]

  int num_tokens() const { return static_cast<int>(token_embeddings.rows()); }
  int word_dim() const { return static_cast<int>(token_embeddings.cols()); }
};

struct Sample {
  VideoSample video;
  QuerySample query;
};

// First frame index covered by the segment.
inline int start_frame(const GroundTruthSegment& seg, int num_frames) {
  return static_cast<int>(std::floor(seg.start * num_frames + 1e-9));
}

// Last frame index covered by the segment, clamped to T-1.
inline int end_frame(const GroundTruthSegment& seg, int num_frames) {
  const int e = static_cast<int>(std::ceil(seg.end * num_frames - 1e-9)) - 1;
  return std::min(e, num_frames - 1);
}

namespace detail {

inline void require_finite(const Matrix<float>& m, const std::string& field) {
  if (!m.allFinite()) throw InvariantError(field, "contains NaN or Inf");
}

inline void require_rows_cols(const Matrix<float>& m, Eigen::Index rows, const std::string& field) {
  if (m.rows() != rows) {
    throw ShapeError(field, "expected " + std::to_string(rows) + " rows, got " + std::to_string(m.rows()));
  }
  if (m.cols() <= 0) throw ShapeError(field, "feature dimension must be positive");
}

}  // namespace detail

inline void validate(const GroundTruthSegment& seg) {
  if (!std::isfinite(seg.start) || !std::isfinite(seg.end) || seg.start < 0.0 || seg.end > 1.0 ||
      !(seg.start < seg.end)) {
    throw InvariantError("annotation", "requires 0 <= start < end <= 1");
  }
}

inline void validate(const VideoSample& v) {
  if (v.num_frames <= 0) throw InvariantError("T", "must be positive");
  if (v.num_objects <= 0) throw InvariantError("K", "must be positive");
  const Eigen::Index rows = static_cast<Eigen::Index>(v.num_frames) * v.num_objects;
  detail::require_rows_cols(v.object_features, rows, "object_features");
  detail::require_rows_cols(v.boxes, rows, "boxes");
  detail::require_rows_cols(v.semantic_embeddings, rows, "semantic_embeddings");
  if (v.boxes.cols() != 4) throw ShapeError("boxes", "last dimension must be 4");
  detail::require_finite(v.object_features, "object_features");
  detail::require_finite(v.boxes, "boxes");
  detail::require_finite(v.semantic_embeddings, "semantic_embeddings");
  for (Eigen::Index r = 0; r < rows; ++r) {
    const float x1 = v.boxes(r, 0), y1 = v.boxes(r, 1), x2 = v.boxes(r, 2), y2 = v.boxes(r, 3);
    if (!(0.f <= x1 && x1 <= x2 && x2 <= 1.f && 0.f <= y1 && y1 <= y2 && y2 <= 1.f)) {
      throw InvariantError("boxes", "row " + std::to_string(r) + " violates 0<=x1<=x2<=1, 0<=y1<=y2<=1");
    }
  }
  if (v.annotation) validate(*v.annotation);
}

inline void validate(const QuerySample& q) {
  if (q.token_embeddings.rows() < 1) throw InvariantError("N", "query needs at least one token");
  if (q.token_embeddings.cols() < 1) throw ShapeError("token_embeddings", "word dimension must be positive");
  detail::require_finite(q.token_embeddings, "token_embeddings");
}

inline void validate(const Sample& s) {
  validate(s.video);
  validate(s.query);
}

// ---------------------------------------------------------------------------
// Sample directory format.

namespace detail {

struct TensorSlot {
  const char* name;
  std::vector<int> shape;
  Matrix<float>* matrix;
};

inline std::size_t product(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

inline int manifest_int(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(key, "missing from manifest");
  if (!j.at(key).is_number_integer()) throw FormatError(key, "must be an integer");
  const int v = j.at(key).get<int>();
  if (v <= 0) throw InvariantError(key, "must be positive");
  return v;
}

}  // namespace detail

inline void save_sample(const Sample& sample, const fs::path& dir) {
  validate(sample);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create sample directory " + dir.string());

  const auto& v = sample.video;
  const auto& q = sample.query;
  const int T = v.num_frames, K = v.num_objects, N = q.num_tokens();
  nlohmann::json m;
  m["video_id"] = v.video_id;
  m["query_id"] = q.query_id;
  m["T"] = T;
  m["K"] = K;
  m["N"] = N;
  m["D_in"] = v.feature_dim();
  m["D_sem"] = v.semantic_dim();
  m["D_w"] = q.word_dim();
  if (v.annotation) {
    m["annotation"] = {{"start", v.annotation->start}, {"end", v.annotation->end}};
  } else {
    m["annotation"] = nullptr;
  }
  struct Out {
    const char* name;
    std::vector<int> shape;
    const Matrix<float>* data;
  };
  const std::vector<Out> tensors = {
      {"object_features", {T, K, v.feature_dim()}, &v.object_features},
      {"boxes", {T, K, 4}, &v.boxes},
      {"semantic_embeddings", {T, K, v.semantic_dim()}, &v.semantic_embeddings},
      {"token_embeddings", {N, q.word_dim()}, &q.token_embeddings},
  };
  m["tensors"] = nlohmann::json::array();
  for (const auto& t : tensors) {
    const std::string file = std::string(t.name) + ".f32";
    m["tensors"].push_back({{"name", t.name}, {"shape", t.shape}, {"file", file}});
    io::write_blob(dir / file, t.data->data(), static_cast<std::size_t>(t.data->size()));
  }
  io::write_text_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

inline Sample load_sample(const fs::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(io::read_text(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest.json", e.what());
  }
  Sample s;
  auto& v = s.video;
  auto& q = s.query;
  if (!m.contains("video_id") || !m["video_id"].is_string()) throw FormatError("video_id", "missing or not a string");
  if (!m.contains("query_id") || !m["query_id"].is_string()) throw FormatError("query_id", "missing or not a string");
  v.video_id = m["video_id"].get<std::string>();
  q.query_id = m["query_id"].get<std::string>();
  v.num_frames = detail::manifest_int(m, "T");
  v.num_objects = detail::manifest_int(m, "K");
  const int N = detail::manifest_int(m, "N");
  const int d_in = detail::manifest_int(m, "D_in");
  const int d_sem = detail::manifest_int(m, "D_sem");
  const int d_w = detail::manifest_int(m, "D_w");
  if (m.contains("annotation") && !m["annotation"].is_null()) {
    const auto& a = m["annotation"];
    if (!a.contains("start") || !a.contains("end")) throw FormatError("annotation", "needs start and end");
    v.annotation = GroundTruthSegment{a["start"].get<double>(), a["end"].get<double>()};
  }
  const int T = v.num_frames, K = v.num_objects;
  std::vector<detail::TensorSlot> slots = {
      {"object_features", {T, K, d_in}, &v.object_features},
      {"boxes", {T, K, 4}, &v.boxes},
      {"semantic_embeddings", {T, K, d_sem}, &v.semantic_embeddings},
      {"token_embeddings", {N, d_w}, &q.token_embeddings},
  };
  if (!m.contains("tensors") || !m["tensors"].is_array()) throw FormatError("tensors", "missing tensor list");
  for (auto& slot : slots) {
    const nlohmann::json* entry = nullptr;
    for (const auto& t : m["tensors"]) {
      if (t.value("name", "") == slot.name) entry = &t;
    }
    if (entry == nullptr) throw FormatError(slot.name, "not listed in manifest");
    const auto shape = entry->at("shape").get<std::vector<int>>();
    if (shape != slot.shape) throw ShapeError(slot.name, "shape header disagrees with manifest dimensions");
    const auto data = io::read_blob<float>(dir / entry->at("file").get<std::string>(), detail::product(shape), slot.name);
    const Eigen::Index cols = shape.back();
    const Eigen::Index rows = static_cast<Eigen::Index>(data.size()) / cols;
    *slot.matrix = Eigen::Map<const Matrix<float>>(data.data(), rows, cols);
  }
  validate(s);
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic samples.

enum class Difficulty { separable, noisy };

inline const char* to_string(Difficulty d) { return d == Difficulty::separable ? "separable" : "noisy"; }

inline Difficulty parse_difficulty(const std::string& s) {
  if (s == "separable") return Difficulty::separable;
  if (s == "noisy") return Difficulty::noisy;
  throw std::invalid_argument("unknown difficulty: " + s);
}

// Fixed vocabulary shared by every synthetic sample: query concepts with a
// visual signature, a class word vector and a query word; background object
// classes; attribute vectors; filler words. Concepts come in twin pairs
// (2c, 2c+1) that share one visual signature and differ only in their class
// vector.
struct SynthWorld {
  static constexpr int kFeatureDim = 16;
  static constexpr int kSemanticDim = 8;
  static constexpr int kWordDim = 12;
  static constexpr int kTokens = 5;
  static constexpr int kConcepts = 4;
  static constexpr int kBackground = 6;
  static constexpr int kAttributes = 4;
  static constexpr int kFillers = 8;
  static constexpr std::uint64_t kSeed = 0x5eed5eedULL;

  Matrix<float> concept_visual;    // [C, D_in]
  Matrix<float> concept_semantic;  // [C, D_sem]
  Matrix<float> concept_word;      // [C, D_w]
  Matrix<float> background_visual;
  Matrix<float> background_semantic;
  Matrix<float> attribute;
  Matrix<float> filler_word;

  static const SynthWorld& get() {
    static const SynthWorld world = make();
    return world;
  }

 private:
  static Matrix<float> draw(Rng& rng, int rows, int cols, double sd) {
    Matrix<float> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(sd * rng.normal());
    return m;
  }
  static SynthWorld make() {
    Rng rng(kSeed);
    SynthWorld w;
    const Matrix<float> signatures = draw(rng, kConcepts / 2, kFeatureDim, 1.0);
    w.concept_visual.resize(kConcepts, kFeatureDim);
    for (int c = 0; c < kConcepts; ++c) w.concept_visual.row(c) = signatures.row(c / 2);
    w.concept_semantic = draw(rng, kConcepts, kSemanticDim, 1.0);
    w.concept_word = draw(rng, kConcepts, kWordDim, 1.0);
    w.background_visual = draw(rng, kBackground, kFeatureDim, 0.3);
    w.background_semantic = draw(rng, kBackground, kSemanticDim, 0.3);
    w.attribute = draw(rng, kAttributes, kSemanticDim, 0.3);
    w.filler_word = draw(rng, kFillers, kWordDim, 1.0);
    return w;
  }
};

// Query concept planted by synth_sample for `seed`.
inline int synth_concept(std::uint64_t seed) {
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 1);
  return static_cast<int>(rng.below(SynthWorld::kConcepts));
}

inline int twin_concept(int concept_id) { return concept_id ^ 1; }

// Inside the ground-truth segment every frame carries one object of the
// query concept; outside it, half of the frames carry its visual twin, which
// only the semantic embedding tells apart.
inline Sample synth_sample(std::uint64_t seed, int num_frames, int num_objects, Difficulty difficulty) {
  if (num_frames < 2) throw std::invalid_argument("synth_sample: T must be >= 2");
  if (num_objects < 1) throw std::invalid_argument("synth_sample: K must be >= 1");
  const auto& w = SynthWorld::get();
  Rng rng(seed * 0x9E3779B97F4A7C15ULL + 1);
  const int concept_id = static_cast<int>(rng.below(SynthWorld::kConcepts));
  const double noise = difficulty == Difficulty::separable ? 0.05 : 0.5;
  const int T = num_frames, K = num_objects;

  const int max_len = std::max(2, T / 2);
  const int len = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_len - 1)));
  const int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(T - len + 1)));

  Sample s;
  auto& v = s.video;
  v.video_id = "synth-v" + std::to_string(seed);
  v.num_frames = T;
  v.num_objects = K;
  v.object_features.resize(T * K, SynthWorld::kFeatureDim);
  v.boxes.resize(T * K, 4);
  v.semantic_embeddings.resize(T * K, SynthWorld::kSemanticDim);
  v.annotation = GroundTruthSegment{static_cast<double>(first) / T, static_cast<double>(first + len) / T};

  auto jitter = [&](auto row, double sd) {
    for (Eigen::Index c = 0; c < row.cols(); ++c) row(0, c) += static_cast<float>(sd * rng.normal());
  };
  for (int t = 0; t < T; ++t) {
    const bool inside = t >= first && t < first + len;
    int planted = -1;
    int planted_slot = -1;
    if (inside) {
      planted = concept_id;
      planted_slot = static_cast<int>(rng.below(K));
    } else if (rng.uniform() < 0.5) {
      planted = twin_concept(concept_id);
      planted_slot = static_cast<int>(rng.below(K));
    }
    for (int k = 0; k < K; ++k) {
      const int r = t * K + k;
      const int attr = static_cast<int>(rng.below(SynthWorld::kAttributes));
      if (k == planted_slot) {
        v.object_features.row(r) = w.concept_visual.row(planted);
        v.semantic_embeddings.row(r) = w.concept_semantic.row(planted) + w.attribute.row(attr);
      } else {
        const int bg = static_cast<int>(rng.below(SynthWorld::kBackground));
        v.object_features.row(r) = w.background_visual.row(bg);
        v.semantic_embeddings.row(r) = w.background_semantic.row(bg) + w.attribute.row(attr);
      }
      jitter(v.object_features.row(r), noise);
      jitter(v.semantic_embeddings.row(r), noise);
      const double x1 = rng.uniform(0.0, 0.7), y1 = rng.uniform(0.0, 0.7);
      const double x2 = x1 + rng.uniform(0.05, 1.0 - x1), y2 = y1 + rng.uniform(0.05, 1.0 - y1);
      v.boxes.row(r) << static_cast<float>(x1), static_cast<float>(y1), static_cast<float>(std::min(x2, 1.0)),
          static_cast<float>(std::min(y2, 1.0));
    }
  }

  auto& q = s.query;
  q.query_id = "synth-q" + std::to_string(seed);
  q.token_embeddings.resize(SynthWorld::kTokens, SynthWorld::kWordDim);
  const int concept_pos = static_cast<int>(rng.below(SynthWorld::kTokens));
  for (int n = 0; n < SynthWorld::kTokens; ++n) {
    if (n == concept_pos) {
      q.token_embeddings.row(n) = w.concept_word.row(concept_id);
    } else {
      q.token_embeddings.row(n) = w.filler_word.row(static_cast<int>(rng.below(SynthWorld::kFillers)));
    }
    if (difficulty == Difficulty::noisy) jitter(q.token_embeddings.row(n), 0.1);
  }
  return s;
}

// Unstructured random sample of arbitrary dimensions, annotated with a
// random frame-aligned segment. Used for gradient and property checks.
inline Sample random_sample(std::uint64_t seed, int num_frames, int num_objects, int num_tokens, int feature_dim,
                            int semantic_dim, int word_dim) {
  if (num_frames < 2 || num_objects < 1 || num_tokens < 1) throw std::invalid_argument("random_sample: bad sizes");
  Rng rng(seed ^ 0xA5A5A5A5DEADBEEFULL);
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix<float> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal());
    return m;
  };
  const int rows = num_frames * num_objects;
  Sample s;
  s.video.video_id = "rand-v" + std::to_string(seed);
  s.video.num_frames = num_frames;
  s.video.num_objects = num_objects;
  s.video.object_features = draw(rows, feature_dim);
  s.video.semantic_embeddings = draw(rows, semantic_dim);
  s.video.boxes.resize(rows, 4);
  for (int r = 0; r < rows; ++r) {
    const double x1 = rng.uniform(0.0, 0.5), y1 = rng.uniform(0.0, 0.5);
    s.video.boxes.row(r) << static_cast<float>(x1), static_cast<float>(y1),
        static_cast<float>(x1 + rng.uniform(0.0, 0.5)), static_cast<float>(y1 + rng.uniform(0.0, 0.5));
  }
  const int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_frames - 1)));
  const int last = first + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(num_frames - first - 1)));
  s.video.annotation =
      GroundTruthSegment{static_cast<double>(first) / num_frames, static_cast<double>(last + 1) / num_frames};
  s.query.query_id = "rand-q" + std::to_string(seed);
  s.query.token_embeddings = draw(num_tokens, word_dim);
  return s;
}

// ---------------------------------------------------------------------------
// Dataset directories: `dataset.json` listing sample subdirectories.

inline std::string sample_dir_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%04zu", index);
  return buf;
}

inline std::vector<Sample> load_dataset(const fs::path& dir) {
  const auto index = nlohmann::json::parse(io::read_text(dir / "dataset.json"));
  std::vector<Sample> out;
  for (const auto& name : index.at("samples")) out.push_back(load_sample(dir / name.get<std::string>()));
  return out;
}

inline void save_dataset(const std::vector<Sample>& samples, const fs::path& dir, nlohmann::json meta = {}) {
  fs::create_directories(dir);
  nlohmann::json index = std::move(meta);
  if (index.is_null()) index = nlohmann::json::object();
  index["count"] = samples.size();
  index["samples"] = nlohmann::json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto name = sample_dir_name(i);
    save_sample(samples[i], dir / name);
    index["samples"].push_back(name);
  }
  io::write_text_atomic(dir / "dataset.json", index.dump(2) + "\n");
}

}  // namespace hvsarn

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

#include <cstring>
#include <fstream>

#include "hvsarn/data_model.hpp"
#include "test_support.hpp"

namespace hvsarn {
namespace {

using testing::TempDir;

bool bit_equal(const Matrix<float>& a, const Matrix<float>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0;
}

bool bit_equal(const Sample& a, const Sample& b) {
  return a.video.video_id == b.video.video_id && a.query.query_id == b.query.query_id &&
         a.video.num_frames == b.video.num_frames && a.video.num_objects == b.video.num_objects &&
         a.video.annotation == b.video.annotation && bit_equal(a.video.object_features, b.video.object_features) &&
         bit_equal(a.video.boxes, b.video.boxes) &&
         bit_equal(a.video.semantic_embeddings, b.video.semantic_embeddings) &&
         bit_equal(a.query.token_embeddings, b.query.token_embeddings);
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Sample minimal_sample() {
  Sample s;
  s.video.video_id = "v";
  s.video.num_frames = 1;
  s.video.num_objects = 1;
  s.video.object_features = Matrix<float>::Constant(1, 3, 0.25f);
  s.video.boxes.resize(1, 4);
  s.video.boxes << 0.1f, 0.2f, 0.3f, 0.4f;
  s.video.semantic_embeddings = Matrix<float>::Constant(1, 2, -1.5f);
  s.query.query_id = "q";
  s.query.token_embeddings = Matrix<float>::Constant(1, 5, 2.0f);
  return s;
}

TEST(SampleFormat, RoundTripHasRequestedShapes) {
  TempDir dir;
  const auto s = random_sample(1, 4, 3, 5, 8, 6, 7);
  save_sample(s, dir.path());
  const auto loaded = load_sample(dir.path());
  EXPECT_EQ(loaded.video.object_features.rows(), 12);
  EXPECT_EQ(loaded.video.object_features.cols(), 8);
  EXPECT_EQ(loaded.video.semantic_embeddings.cols(), 6);
  EXPECT_EQ(loaded.query.num_tokens(), 5);
  EXPECT_TRUE(bit_equal(s, loaded));
}

TEST(SampleFormat, MinimalSampleRoundTrips) {
  TempDir dir;
  const auto s = minimal_sample();
  save_sample(s, dir.path());
  const auto loaded = load_sample(dir.path());
  EXPECT_TRUE(bit_equal(s, loaded));
  EXPECT_FALSE(loaded.video.annotation.has_value());
}

TEST(SampleFormat, SyntheticSamplesRoundTripBitExactly) {
  TempDir dir;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto s = synth_sample(seed, 2 + static_cast<int>(seed % 7), 1 + static_cast<int>(seed % 4),
                                seed % 2 ? Difficulty::noisy : Difficulty::separable);
    const auto path = dir / sample_dir_name(seed);
    save_sample(s, path);
    EXPECT_TRUE(bit_equal(s, load_sample(path))) << seed;
  }
}

TEST(SampleFormat, InvertedBoxIsRejectedNamingBoxes) {
  TempDir dir;
  auto s = random_sample(2, 3, 2, 2, 4, 4, 4);
  save_sample(s, dir.path());
  s.video.boxes(1, 0) = 0.9f;
  s.video.boxes(1, 2) = 0.1f;
  io::write_blob(dir / "boxes.f32", s.video.boxes.data(), static_cast<std::size_t>(s.video.boxes.size()));
  try {
    load_sample(dir.path());
    FAIL() << "expected an invariant error";
  } catch (const InvariantError& e) {
    EXPECT_EQ(e.field(), "boxes");
  }
}

TEST(SampleFormat, MissingManifestIsMissingFileError) {
  TempDir dir;
  EXPECT_THROW(load_sample(dir.path()), MissingFileError);
}

TEST(SampleFormat, MissingBlobIsMissingFileError) {
  TempDir dir;
  save_sample(random_sample(3, 2, 2, 2, 3, 3, 3), dir.path());
  fs::remove(dir / "semantic_embeddings.f32");
  EXPECT_THROW(load_sample(dir.path()), MissingFileError);
}

TEST(SampleFormat, ShapeHeaderMismatchNamesTensor) {
  TempDir dir;
  save_sample(random_sample(4, 3, 2, 2, 3, 3, 3), dir.path());
  auto m = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  m["D_in"] = 5;
  io::write_text_atomic(dir / "manifest.json", m.dump());
  try {
    load_sample(dir.path());
    FAIL() << "expected a shape error";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.field(), "object_features");
  }
}

TEST(SampleFormat, TruncatedBlobIsShapeError) {
  TempDir dir;
  save_sample(random_sample(5, 3, 2, 2, 3, 3, 3), dir.path());
  const float one = 1.0f;
  io::write_blob(dir / "token_embeddings.f32", &one, 1);
  try {
    load_sample(dir.path());
    FAIL() << "expected a shape error";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.field(), "token_embeddings");
  }
}

TEST(SampleFormat, BadAnnotationIsRejected) {
  TempDir dir;
  save_sample(random_sample(6, 3, 2, 2, 3, 3, 3), dir.path());
  auto m = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  m["annotation"] = {{"start", 0.7}, {"end", 0.2}};
  io::write_text_atomic(dir / "manifest.json", m.dump());
  try {
    load_sample(dir.path());
    FAIL() << "expected an invariant error";
  } catch (const InvariantError& e) {
    EXPECT_EQ(e.field(), "annotation");
  }
}

TEST(SampleFormat, NonFiniteFeatureIsRejected) {
  TempDir dir;
  auto s = random_sample(7, 2, 2, 2, 3, 3, 3);
  save_sample(s, dir.path());
  s.video.object_features(0, 0) = std::numeric_limits<float>::quiet_NaN();
  io::write_blob(dir / "object_features.f32", s.video.object_features.data(),
                 static_cast<std::size_t>(s.video.object_features.size()));
  EXPECT_THROW(load_sample(dir.path()), InvariantError);
}

TEST(SampleFormat, SaveRejectsInvalidSample) {
  TempDir dir;
  auto s = minimal_sample();
  s.video.boxes(0, 2) = 1.5f;
  EXPECT_THROW(save_sample(s, dir.path()), InvariantError);
}

TEST(FrameConversion, FloorAndCeilWithClamp) {
  EXPECT_EQ(start_frame({0.25, 0.5}, 8), 2);
  EXPECT_EQ(end_frame({0.25, 0.5}, 8), 3);
  EXPECT_EQ(start_frame({0.3, 1.0}, 10), 3);
  EXPECT_EQ(end_frame({0.3, 1.0}, 10), 9);
  EXPECT_EQ(start_frame({0.26, 0.51}, 8), 2);
  EXPECT_EQ(end_frame({0.26, 0.51}, 8), 4);
}

TEST(Synth, SameSeedIsByteIdentical) {
  TempDir a, b;
  save_sample(synth_sample(7, 8, 4, Difficulty::separable), a.path());
  save_sample(synth_sample(7, 8, 4, Difficulty::separable), b.path());
  for (const auto& f : {"manifest.json", "object_features.f32", "boxes.f32", "semantic_embeddings.f32",
                        "token_embeddings.f32"}) {
    EXPECT_EQ(file_bytes(a / f), file_bytes(b / f)) << f;
  }
}

TEST(Synth, DifferentSeedsDiffer) {
  const auto a = synth_sample(7, 8, 4, Difficulty::separable);
  const auto b = synth_sample(8, 8, 4, Difficulty::separable);
  EXPECT_FALSE(bit_equal(a.video.object_features, b.video.object_features));
}

TEST(Synth, AnnotationIsValidAndFrameAligned) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const int T = 2 + static_cast<int>(seed % 20);
    const auto s = synth_sample(seed, T, 3, Difficulty::noisy);
    ASSERT_NO_THROW(validate(s));
    const auto& a = *s.video.annotation;
    EXPECT_NEAR(a.start * T, std::round(a.start * T), 1e-9);
    EXPECT_NEAR(a.end * T, std::round(a.end * T), 1e-9);
    EXPECT_GE(end_frame(a, T) - start_frame(a, T), 1);
  }
}

TEST(Synth, RejectsInvalidSizes) {
  EXPECT_THROW(synth_sample(1, 1, 2, Difficulty::separable), std::invalid_argument);
  EXPECT_THROW(synth_sample(1, 4, 0, Difficulty::separable), std::invalid_argument);
}

// Nearest-centroid frame classifier: per query concept, centroids of the
// per-frame mean (visual, semantic) features inside and outside the segment.
TEST(Synth, SeparablePlantIsLearnableByNearestCentroid) {
  const int T = 16, K = 4, count = 50;
  std::vector<Sample> samples;
  for (int i = 0; i < count; ++i) samples.push_back(synth_sample(100 + i, T, K, Difficulty::separable));
  auto frame_feature = [&](const Sample& s, int t) {
    Eigen::VectorXd f(SynthWorld::kFeatureDim + SynthWorld::kSemanticDim);
    f.head(SynthWorld::kFeatureDim) =
        s.video.object_features.middleRows(t * K, K).cast<double>().colwise().mean().transpose();
    f.tail(SynthWorld::kSemanticDim) =
        s.video.semantic_embeddings.middleRows(t * K, K).cast<double>().colwise().mean().transpose();
    return f;
  };
  auto inside = [&](const Sample& s, int t) {
    return t >= start_frame(*s.video.annotation, T) && t <= end_frame(*s.video.annotation, T);
  };
  const int C = SynthWorld::kConcepts;
  std::vector<Eigen::VectorXd> sum(2 * C, Eigen::VectorXd::Zero(SynthWorld::kFeatureDim + SynthWorld::kSemanticDim));
  std::vector<int> n(2 * C, 0);
  for (int i = 0; i < count; ++i) {
    const int c = synth_concept(100 + i);
    for (int t = 0; t < T; ++t) {
      const int slot = 2 * c + (inside(samples[i], t) ? 1 : 0);
      sum[slot] += frame_feature(samples[i], t);
      ++n[slot];
    }
  }
  int correct = 0, total = 0;
  for (int i = 0; i < count; ++i) {
    const int c = synth_concept(100 + i);
    ASSERT_GT(n[2 * c], 0);
    ASSERT_GT(n[2 * c + 1], 0);
    const Eigen::VectorXd out_c = sum[2 * c] / n[2 * c], in_c = sum[2 * c + 1] / n[2 * c + 1];
    for (int t = 0; t < T; ++t) {
      const auto f = frame_feature(samples[i], t);
      const bool predicted = (f - in_c).squaredNorm() < (f - out_c).squaredNorm();
      correct += predicted == inside(samples[i], t) ? 1 : 0;
      ++total;
    }
  }
  EXPECT_GE(static_cast<double>(correct) / total, 0.95);
}

TEST(Synth, TwinDistractorSharesVisualSignature) {
  const auto& w = SynthWorld::get();
  for (int c = 0; c < SynthWorld::kConcepts; ++c) {
    EXPECT_TRUE(w.concept_visual.row(c) == w.concept_visual.row(twin_concept(c)));
    EXPECT_FALSE(w.concept_semantic.row(c) == w.concept_semantic.row(twin_concept(c)));
  }
}

TEST(Dataset, RoundTripAndEmptyDataset) {
  TempDir dir;
  std::vector<Sample> samples;
  for (int i = 0; i < 3; ++i) samples.push_back(synth_sample(i, 6, 2, Difficulty::separable));
  save_dataset(samples, dir / "d", {{"generator", "test"}});
  const auto loaded = load_dataset(dir / "d");
  ASSERT_EQ(loaded.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(bit_equal(samples[i], loaded[i]));
  save_dataset({}, dir / "empty");
  EXPECT_TRUE(load_dataset(dir / "empty").empty());
  EXPECT_THROW(load_dataset(dir / "nothing"), MissingFileError);
}

}  // namespace
}  // namespace hvsarn

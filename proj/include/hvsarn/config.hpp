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

// Model and training configuration, its JSON form and the named ablation
// settings.

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hvsarn {

enum class ReasonerKind { graph_memory, gcn, gcn_fusion, self_attention, memory_network };
enum class FusionMode { hierarchical, two_stream };

inline const char* to_string(ReasonerKind k) {
  switch (k) {
    case ReasonerKind::graph_memory: return "graph_memory";
    case ReasonerKind::gcn: return "gcn";
    case ReasonerKind::gcn_fusion: return "gcn_fusion";
    case ReasonerKind::self_attention: return "self_attention";
    case ReasonerKind::memory_network: return "memory_network";
  }
  return "?";
}

inline ReasonerKind parse_reasoner(const std::string& s) {
  for (auto k : {ReasonerKind::graph_memory, ReasonerKind::gcn, ReasonerKind::gcn_fusion, ReasonerKind::self_attention,
                 ReasonerKind::memory_network}) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("reasoner_kind: unknown value '" + s + "'");
}

inline const char* to_string(FusionMode m) { return m == FusionMode::hierarchical ? "hierarchical" : "two_stream"; }

inline FusionMode parse_fusion(const std::string& s) {
  if (s == "hierarchical") return FusionMode::hierarchical;
  if (s == "two_stream") return FusionMode::two_stream;
  throw std::invalid_argument("fusion_mode: unknown value '" + s + "'");
}

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::invalid_argument("config field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ModelConfig {
  int hidden = 32;  // D
  int steps = 2;    // L, reasoning steps per graph
  int max_objects = 64;
  int max_frames = 512;
  int heads = 4;
  int feature_dim = 16;   // D_in
  int semantic_dim = 8;   // D_sem
  int word_dim = 12;      // D_w
  bool use_object_level = true;
  bool use_frame_level = true;
  bool use_visual_graph = true;
  bool use_semantic_graph = true;
  bool cross_space_at_frame_level = true;
  ReasonerKind reasoner = ReasonerKind::graph_memory;
  FusionMode fusion = FusionMode::hierarchical;
  int top_n = 5;  // segments written per prediction
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden < 2 || hidden % 2 != 0) throw ConfigError("D", "must be an even integer >= 2");
    if (steps < 0) throw ConfigError("L", "must be >= 0");
    if (heads < 1) throw ConfigError("heads", "must be >= 1");
    if (max_objects < 1) throw ConfigError("K_max", "must be >= 1");
    if (max_frames < 1) throw ConfigError("T_max", "must be >= 1");
    if (feature_dim < 1) throw ConfigError("D_in", "must be >= 1");
    if (semantic_dim < 1) throw ConfigError("D_sem", "must be >= 1");
    if (word_dim < 1) throw ConfigError("D_w", "must be >= 1");
    if (top_n < 1) throw ConfigError("top_n", "must be >= 1");
    if (!use_object_level && !use_frame_level) {
      throw ConfigError("use_object_level", "at least one of use_object_level/use_frame_level must be true");
    }
    if (!use_visual_graph && !use_semantic_graph) {
      throw ConfigError("use_visual_graph", "at least one of use_visual_graph/use_semantic_graph must be true");
    }
    if (fusion == FusionMode::two_stream && !(use_object_level && use_frame_level)) {
      throw ConfigError("fusion_mode", "two_stream needs both levels enabled");
    }
  }
};

struct TrainConfig {
  double lr = 1e-3;
  int steps = 500;
  int batch = 8;
  int checkpoint_every = 0;  // 0: only the final checkpoint
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(lr >= 0.0)) throw ConfigError("train.lr", "must be >= 0");
    if (steps < 0) throw ConfigError("train.steps", "must be >= 0");
    if (batch < 1) throw ConfigError("train.batch", "must be >= 1");
    if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every", "must be >= 0");
  }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"D", c.hidden},
      {"L", c.steps},
      {"K_max", c.max_objects},
      {"T_max", c.max_frames},
      {"heads", c.heads},
      {"D_in", c.feature_dim},
      {"D_sem", c.semantic_dim},
      {"D_w", c.word_dim},
      {"use_object_level", c.use_object_level},
      {"use_frame_level", c.use_frame_level},
      {"use_visual_graph", c.use_visual_graph},
      {"use_semantic_graph", c.use_semantic_graph},
      {"cross_space_at_frame_level", c.cross_space_at_frame_level},
      {"reasoner_kind", to_string(c.reasoner)},
      {"fusion_mode", to_string(c.fusion)},
      {"top_n", c.top_n},
      {"seed", c.seed},
  };
}

inline nlohmann::json to_json(const TrainConfig& t) {
  return {{"lr", t.lr},       {"steps", t.steps}, {"batch", t.batch}, {"checkpoint_every", t.checkpoint_every},
          {"beta1", t.beta1}, {"beta2", t.beta2}, {"eps", t.eps}};
}

namespace detail {

template <class T>
void read_field(const nlohmann::json& j, const std::string& key, T& out, const std::string& prefix = "") {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  const std::string field = prefix + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(field, "expected a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(field, "expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.get<long long>() < 0 && !v.is_number_unsigned()) throw ConfigError(field, "expected a non-negative integer");
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(field, "expected a number");
  }
  out = v.get<T>();
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& prefix) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (known.count(it.key()) == 0) throw ConfigError(prefix + it.key(), "unknown field");
  }
}

}  // namespace detail

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
  detail::reject_unknown(j,
                         {"D", "L", "K_max", "T_max", "heads", "D_in", "D_sem", "D_w", "use_object_level",
                          "use_frame_level", "use_visual_graph", "use_semantic_graph", "cross_space_at_frame_level",
                          "reasoner_kind", "fusion_mode", "top_n", "seed", "train"},
                         "");
  ModelConfig c;
  detail::read_field(j, "D", c.hidden);
  detail::read_field(j, "L", c.steps);
  detail::read_field(j, "K_max", c.max_objects);
  detail::read_field(j, "T_max", c.max_frames);
  detail::read_field(j, "heads", c.heads);
  detail::read_field(j, "D_in", c.feature_dim);
  detail::read_field(j, "D_sem", c.semantic_dim);
  detail::read_field(j, "D_w", c.word_dim);
  detail::read_field(j, "use_object_level", c.use_object_level);
  detail::read_field(j, "use_frame_level", c.use_frame_level);
  detail::read_field(j, "use_visual_graph", c.use_visual_graph);
  detail::read_field(j, "use_semantic_graph", c.use_semantic_graph);
  detail::read_field(j, "cross_space_at_frame_level", c.cross_space_at_frame_level);
  detail::read_field(j, "top_n", c.top_n);
  detail::read_field(j, "seed", c.seed);
  if (j.contains("reasoner_kind")) {
    if (!j["reasoner_kind"].is_string()) throw ConfigError("reasoner_kind", "expected a string");
    try {
      c.reasoner = parse_reasoner(j["reasoner_kind"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("reasoner_kind", e.what());
    }
  }
  if (j.contains("fusion_mode")) {
    if (!j["fusion_mode"].is_string()) throw ConfigError("fusion_mode", "expected a string");
    try {
      c.fusion = parse_fusion(j["fusion_mode"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("fusion_mode", e.what());
    }
  }
  c.validate();
  return c;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig t;
  if (!j.contains("train")) return t;
  const auto& tj = j.at("train");
  if (!tj.is_object()) throw ConfigError("train", "expected an object");
  detail::reject_unknown(tj, {"lr", "steps", "batch", "checkpoint_every", "beta1", "beta2", "eps"}, "train.");
  detail::read_field(tj, "lr", t.lr, "train.");
  detail::read_field(tj, "steps", t.steps, "train.");
  detail::read_field(tj, "batch", t.batch, "train.");
  detail::read_field(tj, "checkpoint_every", t.checkpoint_every, "train.");
  detail::read_field(tj, "beta1", t.beta1, "train.");
  detail::read_field(tj, "beta2", t.beta2, "train.");
  detail::read_field(tj, "eps", t.eps, "train.");
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------
// Ablation settings. Each maps a base configuration to the variant that
// removes one component.

struct AblationSetting {
  std::string name;
  std::string label;
};

inline const std::vector<AblationSetting>& ablation_settings() {
  static const std::vector<AblationSetting> settings = {
      {"object_only", "Object-level only"},
      {"frame_only", "Frame-level only"},
      {"two_stream", "Two stream"},
      {"wo_visual", "w/o visual"},
      {"wo_semantic", "w/o semantic"},
      {"wo_visual_semantic", "w/o visual+semantic"},
      {"gcn", "GCN"},
      {"gcn_fusion", "GCN (fusion)"},
      {"self_attention", "Self-attention"},
      {"memory_network", "Memory network"},
      {"full", "Full model"},
  };
  return settings;
}

inline std::string ablation_label(const std::string& name) {
  for (const auto& s : ablation_settings()) {
    if (s.name == name) return s.label;
  }
  throw std::invalid_argument("unknown ablation: " + name);
}

inline ModelConfig ablate(ModelConfig c, const std::string& name) {
  if (name == "full") {
  } else if (name == "object_only") {
    c.use_frame_level = false;
  } else if (name == "frame_only") {
    c.use_object_level = false;
  } else if (name == "two_stream") {
    c.fusion = FusionMode::two_stream;
  } else if (name == "wo_visual") {
    c.use_visual_graph = false;
  } else if (name == "wo_semantic") {
    c.use_semantic_graph = false;
  } else if (name == "wo_visual_semantic") {
    // No graph reasoning at all: zero steps and no semantic branch. The
    // visual features still reach the head through fusion.
    c.use_semantic_graph = false;
    c.steps = 0;
  } else if (name == "gcn") {
    c.reasoner = ReasonerKind::gcn;
  } else if (name == "gcn_fusion") {
    c.reasoner = ReasonerKind::gcn_fusion;
  } else if (name == "self_attention") {
    c.reasoner = ReasonerKind::self_attention;
  } else if (name == "memory_network") {
    c.reasoner = ReasonerKind::memory_network;
  } else {
    throw std::invalid_argument("unknown ablation: " + name);
  }
  c.validate();
  return c;
}

}  // namespace hvsarn

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "kinoplan/completion/completion.hpp"
#include "kinoplan/ik/solver.hpp"
#include "kinoplan/protocol/client.hpp"
#include "kinoplan/rl/ppo.hpp"
#include "kinoplan/search/mcts.hpp"

namespace kinoplan::pipeline {

using Json = nlohmann::json;

/// "stub" selects the in-process backend, anything else is a base URL.
/// Empty means unset (judge: not configured).
struct BackendSelection {
  std::string proposer;
  std::string scorer;
  std::string judge;
  std::string prior = "builtin";  // "builtin", a prior file path, or a /decode URL
};

// Pipeline defaults: sigma 0.5 per coordinate of a 4140-scalar motion
// drowns the reward signal at this learning rate, so the refine stage
// explores with 0.1.
struct RefineSettings {
  int iterations = 100;
  int denoise_steps = 1;
  double sigma_max = 0.1;
  double sigma_min = 0.05;
  rl::PpoConfig ppo;
};

struct EvalSettings {
  int judge_repeats = 10;
  int frame_stride = 1;  // every n-th frame goes to the judge
  protocol::JudgeWeights weights;
};

struct PipelineConfig {
  std::string prompt;
  std::uint64_t seed = 0;
  std::size_t keyframes = 8;  // K
  int segment_length = 2;     // K_s
  std::size_t length = 60;    // L
  double fps = 20.0;

  int search_iterations = 30;
  double alpha = 0.05;
  int max_children = 3;
  double proposer_noise = 0.01;  // stub proposer jitter, meters
  protocol::ProposeOptions propose;

  ik::IkSettings ik = default_ik_settings();
  completion::CompletionConfig completion;
  RefineSettings refine;
  EvalSettings eval;
  BackendSelection backends;
  std::string prompt_template;  // file path; empty uses the bundled template

  /// IK settings used by the pipeline: a weak ridge and a 3 cm tolerance, so
  /// proposals that are merely close to reachable still render.
  static ik::IkSettings default_ik_settings();

  /// ValidationError naming the first inconsistent field.
  void validate() const;

  search::SearchConfig search_config() const;
  completion::CompletionConfig completion_config() const;

  Json to_json() const;
  /// Missing fields keep their defaults; unknown fields are rejected.
  static PipelineConfig from_json(const Json& doc);
  static PipelineConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// FNV-1a over the canonical JSON, as 16 hex digits.
  std::string hash() const;
};

/// Env vars fill backend fields that no flag or config value set; anything
/// still unset becomes "stub" (the judge stays unconfigured).
void resolve_backends(BackendSelection& backends);

/// Directory holding the bundled data files.
std::filesystem::path data_dir();

}  // namespace kinoplan::pipeline

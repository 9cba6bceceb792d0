#pragma once

// plan -> solve -> complete -> refine -> eval, with file-based stage
// boundaries. Every stage is also callable on its own.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kinoplan/completion/completion.hpp"
#include "kinoplan/core/render.hpp"
#include "kinoplan/ik/prior.hpp"
#include "kinoplan/ik/solver.hpp"
#include "kinoplan/physics/physics.hpp"
#include "kinoplan/pipeline/config.hpp"
#include "kinoplan/protocol/client.hpp"
#include "kinoplan/search/mcts.hpp"

namespace kinoplan::pipeline {

/// Stage-tagged lines on stderr: "[stage] message". Level 0 is quiet,
/// 1 prints stage summaries, 2 adds per-step detail.
class Logger {
 public:
  explicit Logger(int verbosity = 1) : verbosity_(verbosity) {}
  void info(const std::string& stage, const std::string& message) const { emit(1, stage, message); }
  void debug(const std::string& stage, const std::string& message) const { emit(2, stage, message); }
  void warn(const std::string& stage, const std::string& message) const;
  int verbosity() const { return verbosity_; }

 private:
  void emit(int level, const std::string& stage, const std::string& message) const;
  int verbosity_;
};

struct Backends {
  std::unique_ptr<protocol::ProposerBackend> proposer;
  std::unique_ptr<protocol::ScorerBackend> scorer;
  std::unique_ptr<protocol::JudgeBackend> judge;  // null when not configured
  std::unique_ptr<ik::PosePrior> prior;
};

/// Reference prior: PCA on 2000 synthetic poses (seed 7), 32 latents.
ik::AffinePrior builtin_prior(const Skeleton& skeleton);
std::unique_ptr<ik::PosePrior> make_prior(const std::string& selection, const Skeleton& skeleton);

/// Expects resolved selections (see resolve_backends).
Backends make_backends(const PipelineConfig& config, const Skeleton& skeleton);

/// Template file contents; the bundled data/prompt_template.txt when unset.
std::string load_prompt_template(const PipelineConfig& config);

struct Metrics {
  std::optional<double> clip_s;
  std::optional<protocol::JudgeResult> vlm;
  double float_mm = 0.0;
  double pene_mm = 0.0;
  physics::RewardBreakdown rewards;
  std::vector<std::string> warnings;

  Json to_json() const;
};

/// CLIP_S over every rendered frame, VLM_S over every frame_stride-th frame;
/// backend failures leave those fields empty and add a warning.
Metrics evaluate_motion(const Skeleton& skeleton, const Motion& motion, const std::string& prompt,
                        protocol::ScorerBackend* scorer, protocol::JudgeBackend* judge,
                        const physics::SurfaceProxy& proxy, const EvalSettings& settings = {},
                        const OrthoCamera& camera = {});

search::SearchResult run_plan_stage(const PipelineConfig& config, const Skeleton& skeleton, Backends& backends,
                                    const std::string& prompt_template, const Logger& log);

std::vector<ik::IkSolution> run_solve_stage(const KeyframePlan& plan, const Skeleton& skeleton,
                                            const ik::PosePrior& prior, const ik::IkSettings& settings,
                                            const Logger& log);

struct RefineOutcome {
  Motion motion;                       // best snapshot's noise-free sample
  std::vector<double> reward_curve;    // mean sampled reward per iteration
  std::vector<double> snapshot_curve;  // noise-free reward after each iteration
  std::vector<double> kl_curve;
  double initial_reward = 0.0;
  double best_reward = 0.0;
  int best_iteration = -1;             // -1: the input motion was kept
};

/// PPO on the flattened motion with the combined physics reward. The policy
/// starts as the constant map onto the input motion, so its noise-free
/// sample is the input; the best noise-free sample over all iterations wins.
RefineOutcome refine_motion(const Skeleton& skeleton, const Motion& motion, const RefineSettings& settings,
                            std::uint64_t seed, const physics::SurfaceProxy& proxy, const Logger& log);

void write_reward_curve(const std::filesystem::path& path, const RefineOutcome& outcome);

/// Motion rows flattened frame by frame.
Eigen::VectorXd flatten_motion(const Motion& motion);
Motion unflatten_motion(const Eigen::VectorXd& flat, std::size_t frames, double fps);

/// Renders every frame to dir/frame_NNN.png; returns the file names.
std::vector<std::string> render_frames(const Skeleton& skeleton, const Motion& motion,
                                       const std::filesystem::path& dir, const OrthoCamera& camera = {});

/// Full run into out_dir. Writes config.json, plan.json, tree.json,
/// keyposes.motion, completed.motion, refined.motion, reward_curve.csv,
/// frames/, report.json, and timings.json. Returns the report.
Json run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir, const Logger& log);

}  // namespace kinoplan::pipeline

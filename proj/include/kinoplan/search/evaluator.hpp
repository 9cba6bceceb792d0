#pragma once

#include "kinoplan/core/render.hpp"
#include "kinoplan/ik/solver.hpp"
#include "kinoplan/search/mcts.hpp"

namespace kinoplan::search {

/// Rollout scoring through the full model stack: IK per keyframe (warm
/// started from the previous frame), stick-figure render, one /score request
/// per frame, mean over frames. Frames whose IK does not reach tolerance are
/// scored 0 without a request and counted as failed.
class RenderEvaluator {
 public:
  RenderEvaluator(Skeleton skeleton, const ik::PosePrior& prior, ik::IkSettings ik_settings,
                  protocol::ScorerBackend& scorer, std::string prompt, OrthoCamera camera = {});

  Evaluation operator()(const KeyframePlan& plan) const;

  /// IK for every frame of an absolute plan; non-converged frames are kept.
  std::vector<ik::IkSolution> solve(const KeyframePlan& plan) const;

 private:
  Skeleton skeleton_;
  const ik::PosePrior* prior_;
  ik::IkSettings ik_settings_;
  protocol::ScorerBackend* scorer_;
  std::string prompt_;
  OrthoCamera camera_;
};

}  // namespace kinoplan::search

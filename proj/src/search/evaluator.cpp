#include "kinoplan/search/evaluator.hpp"

#include "kinoplan/core/error.hpp"

namespace kinoplan::search {

RenderEvaluator::RenderEvaluator(Skeleton skeleton, const ik::PosePrior& prior, ik::IkSettings ik_settings,
                                 protocol::ScorerBackend& scorer, std::string prompt, OrthoCamera camera)
    : skeleton_(std::move(skeleton)), prior_(&prior), ik_settings_(ik_settings), scorer_(&scorer),
      prompt_(std::move(prompt)), camera_(camera) {}

std::vector<ik::IkSolution> RenderEvaluator::solve(const KeyframePlan& plan) const {
  return ik::solve_sequence(plan, *prior_, skeleton_, ik_settings_);
}

Evaluation RenderEvaluator::operator()(const KeyframePlan& plan) const {
  if (plan.length() == 0) throw ValidationError("cannot evaluate an empty plan");
  const auto k = static_cast<int>(plan.length());
  std::vector<ik::IkSolution> solutions;
  try {
    solutions = solve(plan);
  } catch (const NumericalError&) {
    return {0.0, k};
  }
  Evaluation eval;
  std::vector<std::vector<std::uint8_t>> pngs;
  for (const auto& s : solutions) {
    if (!s.converged) {
      eval.failed_frames += 1;
      continue;
    }
    pngs.push_back(encode_png(render_frame(skeleton_, s.pose, camera_)));
  }
  double sum = 0.0;
  if (!pngs.empty())
    for (double s : protocol::score_each(*scorer_, prompt_, pngs)) sum += s;
  eval.score = sum / k;
  return eval;
}

}  // namespace kinoplan::search

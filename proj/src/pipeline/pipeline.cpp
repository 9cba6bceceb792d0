#include "kinoplan/pipeline/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "kinoplan/core/error.hpp"
#include "kinoplan/core/io.hpp"
#include "kinoplan/core/kinematics.hpp"
#include "kinoplan/protocol/http.hpp"
#include "kinoplan/protocol/stubs.hpp"
#include "kinoplan/search/evaluator.hpp"

namespace kinoplan::pipeline {

namespace {

std::string fmt(double v) { return io::format_double(v); }

template <typename Fn>
auto run_stage(const std::string& stage, const std::string& config_hash, Fn&& fn) -> decltype(fn()) {
  const std::string tag = "stage " + stage + " [config " + config_hash + "]: ";
  try {
    return fn();
  } catch (const search::SearchFailed& e) {
    throw search::SearchFailed(tag + e.what(), e.stats());
  } catch (const SchemaError& e) {
    throw SchemaError(tag + e.what());
  } catch (const BackendError& e) {
    throw BackendError(tag + e.what());
  } catch (const FormatError& e) {
    throw FormatError(tag + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(tag + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(tag + e.what());
  }
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

void Logger::emit(int level, const std::string& stage, const std::string& message) const {
  if (verbosity_ < level) return;
  std::cerr << "[" << stage << "] " << message << "\n";
}

void Logger::warn(const std::string& stage, const std::string& message) const {
  if (verbosity_ < 0) return;
  std::cerr << "[" << stage << "] warning: " << message << "\n";
}

ik::AffinePrior builtin_prior(const Skeleton& skeleton) {
  const auto samples = ik::synthetic_pose_samples(skeleton, 2000, 7);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(skeleton.pose_dimension()));
  for (std::size_t i = 0; i < samples.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = samples[i].to_vector().transpose();
  return ik::AffinePrior::fit(rows, 32);
}

std::unique_ptr<ik::PosePrior> make_prior(const std::string& selection, const Skeleton& skeleton) {
  if (selection.empty() || selection == "builtin") return std::make_unique<ik::AffinePrior>(builtin_prior(skeleton));
  if (selection.rfind("http://", 0) == 0)
    return std::make_unique<protocol::HttpPrior>(selection, 32, skeleton.pose_dimension());
  auto prior = std::make_unique<ik::AffinePrior>(ik::AffinePrior::load(selection));
  if (prior->pose_dim() != skeleton.pose_dimension()) throw ValidationError("prior does not match the skeleton");
  return prior;
}

Backends make_backends(const PipelineConfig& config, const Skeleton& skeleton) {
  Backends b;
  const auto& sel = config.backends;
  if (sel.proposer == "stub" || sel.proposer.empty())
    b.proposer = std::make_unique<protocol::PlaybookProposer>(skeleton, config.seed, config.proposer_noise);
  else
    b.proposer = std::make_unique<protocol::HttpProposer>(sel.proposer);
  if (sel.scorer == "stub" || sel.scorer.empty())
    b.scorer = std::make_unique<protocol::TemplateScorer>(skeleton);
  else
    b.scorer = std::make_unique<protocol::HttpScorer>(sel.scorer);
  if (sel.judge == "stub")
    b.judge = std::make_unique<protocol::FixedJudge>(3.0, 3.0);
  else if (!sel.judge.empty())
    b.judge = std::make_unique<protocol::HttpJudge>(sel.judge);
  b.prior = make_prior(sel.prior, skeleton);
  return b;
}

std::string load_prompt_template(const PipelineConfig& config) {
  const std::filesystem::path path =
      config.prompt_template.empty() ? data_dir() / "prompt_template.txt" : std::filesystem::path(config.prompt_template);
  if (!std::filesystem::exists(path)) throw ValidationError("prompt template not found: " + path.string());
  return io::read_text(path);
}

Json Metrics::to_json() const {
  Json vlm_json = nullptr;
  if (vlm) vlm_json = {{"semantic", vlm->semantic}, {"naturalness", vlm->naturalness}, {"weighted", vlm->weighted}};
  return {{"clip_s", optional_number(clip_s)},
          {"vlm_s", vlm ? Json(vlm->weighted) : Json(nullptr)},
          {"vlm", vlm_json},
          {"float_mm", float_mm},
          {"pene_mm", pene_mm},
          {"rewards",
           {{"sliding", rewards.sliding},
            {"floating", rewards.floating},
            {"penetration", rewards.penetration},
            {"combined", rewards.combined}}},
          {"warnings", warnings}};
}

Metrics evaluate_motion(const Skeleton& skeleton, const Motion& motion, const std::string& prompt,
                        protocol::ScorerBackend* scorer, protocol::JudgeBackend* judge,
                        const physics::SurfaceProxy& proxy, const EvalSettings& settings, const OrthoCamera& camera) {
  check_motion(skeleton, motion);
  Metrics m;
  m.float_mm = physics::metric_float(skeleton, motion, proxy);
  m.pene_mm = physics::metric_pene(skeleton, motion, proxy);
  m.rewards = physics::combined_reward(skeleton, motion, proxy);
  if (scorer == nullptr && judge == nullptr) return m;

  std::vector<std::vector<std::uint8_t>> pngs;
  pngs.reserve(motion.length());
  for (const auto& pose : motion.frames) pngs.push_back(encode_png(render_frame(skeleton, pose, camera)));

  if (scorer != nullptr) {
    try {
      m.clip_s = protocol::score_frames(*scorer, prompt, pngs);
    } catch (const BackendError& e) {
      m.warnings.push_back(std::string("scorer: ") + e.what());
    }
  }
  if (judge != nullptr) {
    std::vector<std::vector<std::uint8_t>> strided;
    for (std::size_t i = 0; i < pngs.size(); i += static_cast<std::size_t>(settings.frame_stride))
      strided.push_back(pngs[i]);
    try {
      m.vlm = protocol::judge_motion(*judge, prompt, strided, settings.weights, settings.judge_repeats);
    } catch (const BackendError& e) {
      m.warnings.push_back(std::string("judge: ") + e.what());
    }
  }
  return m;
}

search::SearchResult run_plan_stage(const PipelineConfig& config, const Skeleton& skeleton, Backends& backends,
                                    const std::string& prompt_template, const Logger& log) {
  search::RenderEvaluator evaluator(skeleton, *backends.prior, config.ik, *backends.scorer, config.prompt);
  search::SearchBackends sb;
  sb.proposer = backends.proposer.get();
  sb.evaluate = [&evaluator](const KeyframePlan& plan) { return evaluator(plan); };
  sb.initial = standing_keyframe(skeleton);
  sb.prompt_template = prompt_template;
  sb.propose_options = config.propose;
  search::KeyframeSearch search(config.prompt, config.search_config(), sb);
  auto result = search.run();
  result.best_plan.prompt = config.prompt;
  result.best_plan.segment_length = config.segment_length;
  log.info("plan", "best score " + fmt(result.best_score) + " after " + std::to_string(result.stats.iterations) +
                       " iterations, " + std::to_string(result.stats.nodes_expanded) + " nodes, " +
                       std::to_string(result.stats.simulations_run) + " simulations");
  if (result.stats.ik_flagged_rollouts > 0)
    log.warn("plan", std::to_string(result.stats.ik_failed_frames) + " keyframe(s) over " +
                         std::to_string(result.stats.ik_flagged_rollouts) + " rollout(s) missed the IK tolerance");
  return result;
}

std::vector<ik::IkSolution> run_solve_stage(const KeyframePlan& plan, const Skeleton& skeleton,
                                            const ik::PosePrior& prior, const ik::IkSettings& settings,
                                            const Logger& log) {
  const auto absolute = plan_to_absolute(plan, standing_keyframe(skeleton));
  auto solutions = ik::solve_sequence(absolute, prior, skeleton, settings);
  double worst = 0.0;
  int missed = 0;
  for (const auto& s : solutions) {
    worst = std::max(worst, s.residual);
    if (!s.converged) ++missed;
  }
  log.info("solve", std::to_string(solutions.size()) + " keyframes, max residual " + fmt(worst) + " m");
  if (missed > 0) log.warn("solve", std::to_string(missed) + " keyframe(s) above tolerance " + fmt(settings.tolerance));
  return solutions;
}

Eigen::VectorXd flatten_motion(const Motion& motion) {
  if (motion.frames.empty()) return {};
  const auto dim = static_cast<Eigen::Index>(motion.frames.front().dimension());
  Eigen::VectorXd flat(dim * static_cast<Eigen::Index>(motion.length()));
  for (std::size_t t = 0; t < motion.length(); ++t) flat.segment(static_cast<Eigen::Index>(t) * dim, dim) = motion.frames[t].to_vector();
  return flat;
}

Motion unflatten_motion(const Eigen::VectorXd& flat, std::size_t frames, double fps) {
  if (frames == 0 || flat.size() % static_cast<Eigen::Index>(frames) != 0)
    throw ValidationError("flat motion size is not a multiple of the frame count");
  const Eigen::Index dim = flat.size() / static_cast<Eigen::Index>(frames);
  Motion m;
  m.fps = fps;
  m.frames.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) m.frames.push_back(Pose::from_vector(flat.segment(static_cast<Eigen::Index>(t) * dim, dim)));
  return m;
}

RefineOutcome refine_motion(const Skeleton& skeleton, const Motion& motion, const RefineSettings& settings,
                            std::uint64_t seed, const physics::SurfaceProxy& proxy, const Logger& log) {
  check_motion(skeleton, motion);
  const std::size_t frames = motion.length();
  const double fps = motion.fps;
  const Eigen::VectorXd start = flatten_motion(motion);

  rl::DenoisingMdp mdp;
  mdp.steps = settings.denoise_steps;
  mdp.dim = static_cast<std::size_t>(start.size());
  mdp.sigma_max = settings.sigma_max;
  mdp.sigma_min = settings.sigma_min;

  const rl::RewardFn reward = [&](const Eigen::VectorXd& flat) {
    return physics::combined_reward(skeleton, unflatten_motion(flat, frames, fps), proxy).combined;
  };

  const rl::AffinePolicy initial = rl::AffinePolicy::constant(start, mdp.steps);
  RefineOutcome out;
  out.motion = motion;
  out.initial_reward = reward(rl::deterministic_sample(mdp, initial));
  out.best_reward = out.initial_reward;
  Eigen::VectorXd best = start;

  rl::PpoConfig ppo = settings.ppo;
  ppo.seed = seed;
  const auto trained = rl::post_train(mdp, initial, reward, ppo, settings.iterations,
                                      [&](int it, const rl::AffinePolicy& policy) {
                                        const Eigen::VectorXd sample = rl::deterministic_sample(mdp, policy);
                                        const double r = reward(sample);
                                        out.snapshot_curve.push_back(r);
                                        if (r > out.best_reward) {
                                          out.best_reward = r;
                                          out.best_iteration = it;
                                          best = sample;
                                        }
                                        log.debug("refine", "iteration " + std::to_string(it) + " reward " + fmt(r));
                                      });
  out.reward_curve = trained.reward_curve;
  out.kl_curve = trained.kl_curve;
  out.motion = unflatten_motion(best, frames, fps);
  log.info("refine", "combined reward " + fmt(out.initial_reward) + " -> " + fmt(out.best_reward) +
                         (out.best_iteration < 0 ? " (input kept)" : " (iteration " + std::to_string(out.best_iteration) + ")"));
  return out;
}

void write_reward_curve(const std::filesystem::path& path, const RefineOutcome& outcome) {
  std::string csv = "iteration,mean_reward,snapshot_reward,kl\n";
  for (std::size_t i = 0; i < outcome.reward_curve.size(); ++i) {
    csv += std::to_string(i) + "," + fmt(outcome.reward_curve[i]) + ",";
    csv += (i < outcome.snapshot_curve.size() ? fmt(outcome.snapshot_curve[i]) : "") + ",";
    csv += (i < outcome.kl_curve.size() ? fmt(outcome.kl_curve[i]) : "") + "\n";
  }
  io::write_text(path, csv);
}

std::vector<std::string> render_frames(const Skeleton& skeleton, const Motion& motion,
                                       const std::filesystem::path& dir, const OrthoCamera& camera) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> names;
  for (std::size_t t = 0; t < motion.length(); ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03zu.png", t);
    write_png(dir / name, render_frame(skeleton, motion.frames[t], camera));
    names.emplace_back(name);
  }
  return names;
}

Json run_pipeline(const PipelineConfig& input, const std::filesystem::path& out_dir, const Logger& log) {
  PipelineConfig config = input;
  resolve_backends(config.backends);
  config.validate();
  const std::string hash = config.hash();
  const Skeleton skeleton = Skeleton::standard();
  const auto proxy = physics::SurfaceProxy::standard(skeleton);

  std::filesystem::create_directories(out_dir);
  config.save(out_dir / "config.json");
  log.info("pipeline", "config " + hash + ", seed " + std::to_string(config.seed) + ", output " + out_dir.string());

  Json timings = Json::object();
  Backends backends = run_stage("setup", hash, [&] { return make_backends(config, skeleton); });
  const std::string prompt_template = run_stage("setup", hash, [&] { return load_prompt_template(config); });

  Stopwatch sw_plan;
  auto search = run_stage("plan", hash, [&] { return run_plan_stage(config, skeleton, backends, prompt_template, log); });
  io::save_plan(out_dir / "plan.json", search.best_plan);
  io::write_text(out_dir / "tree.json", search::tree_to_json(*search.root, config.search_config(), search.stats).dump(2) + "\n");
  timings["plan"] = sw_plan.seconds();

  Stopwatch sw_solve;
  const auto solutions = run_stage("solve", hash, [&] {
    return run_solve_stage(io::load_plan(out_dir / "plan.json"), skeleton, *backends.prior, config.ik, log);
  });
  Motion keyposes;
  keyposes.fps = config.fps;
  Json residuals = Json::array();
  Json converged = Json::array();
  double worst = 0.0;
  for (const auto& s : solutions) {
    keyposes.frames.push_back(s.pose);
    residuals.push_back(s.residual);
    converged.push_back(s.converged);
    worst = std::max(worst, s.residual);
  }
  io::save_motion(out_dir / "keyposes.motion", keyposes);
  timings["solve"] = sw_solve.seconds();

  Stopwatch sw_complete;
  const auto completed = run_stage("complete", hash, [&] {
    const Motion keys = io::load_motion(out_dir / "keyposes.motion");
    auto r = completion::complete(keys.frames, config.completion_config());
    log.info("complete", std::to_string(r.motion.length()) + " frames, loss " + fmt(r.final_loss));
    return r;
  });
  io::save_motion(out_dir / "completed.motion", completed.motion);
  timings["complete"] = sw_complete.seconds();

  Stopwatch sw_refine;
  const auto refined = run_stage("refine", hash, [&] {
    return refine_motion(skeleton, io::load_motion(out_dir / "completed.motion"), config.refine, config.seed, proxy, log);
  });
  io::save_motion(out_dir / "refined.motion", refined.motion);
  write_reward_curve(out_dir / "reward_curve.csv", refined);
  timings["refine"] = sw_refine.seconds();

  Stopwatch sw_eval;
  const Motion completed_motion = io::load_motion(out_dir / "completed.motion");
  const Motion refined_motion = io::load_motion(out_dir / "refined.motion");
  const auto metrics_completed = run_stage("eval", hash, [&] {
    return evaluate_motion(skeleton, completed_motion, config.prompt, backends.scorer.get(), backends.judge.get(), proxy,
                           config.eval);
  });
  const auto metrics_refined = run_stage("eval", hash, [&] {
    return evaluate_motion(skeleton, refined_motion, config.prompt, backends.scorer.get(), backends.judge.get(), proxy,
                           config.eval);
  });
  for (const auto& w : metrics_refined.warnings) log.warn("eval", w);
  const auto frame_names = render_frames(skeleton, refined_motion, out_dir / "frames");
  timings["eval"] = sw_eval.seconds();
  log.info("eval", "Pene " + fmt(metrics_completed.pene_mm) + " -> " + fmt(metrics_refined.pene_mm) + " mm, Float " +
                       fmt(metrics_completed.float_mm) + " -> " + fmt(metrics_refined.float_mm) + " mm");

  Json align_json = Json::array();
  for (auto t : completed.alignment.tau) align_json.push_back(t);
  Json report = {
      {"format", "kinoplan-report"},
      {"version", 1},
      {"config_hash", hash},
      {"seed", config.seed},
      {"prompt", config.prompt},
      {"backends",
       {{"proposer", config.backends.proposer},
        {"scorer", config.backends.scorer},
        {"judge", config.backends.judge.empty() ? Json(nullptr) : Json(config.backends.judge)},
        {"prior", config.backends.prior}}},
      {"search", {{"best_score", search.best_score}, {"stats", search.stats.to_json()}}},
      {"ik", {{"residuals", residuals}, {"converged", converged}, {"max_residual", worst}}},
      {"completion",
       {{"final_loss", completed.final_loss}, {"best_step", completed.best_step}, {"alignment", align_json}}},
      {"refine",
       {{"initial_reward", refined.initial_reward},
        {"best_reward", refined.best_reward},
        {"best_iteration", refined.best_iteration},
        {"reward_curve", refined.reward_curve}}},
      {"metrics", {{"completed", metrics_completed.to_json()}, {"refined", metrics_refined.to_json()}}},
      {"artifacts",
       {{"config", "config.json"},
        {"plan", "plan.json"},
        {"tree", "tree.json"},
        {"keyposes", "keyposes.motion"},
        {"completed", "completed.motion"},
        {"refined", "refined.motion"},
        {"reward_curve", "reward_curve.csv"},
        {"frames", "frames"},
        {"frame_count", frame_names.size()},
        {"report", "report.json"}}},
  };
  io::write_text(out_dir / "report.json", report.dump(2) + "\n");
  io::write_text(out_dir / "timings.json", timings.dump(2) + "\n");

  for (const char* f : {"config.json", "plan.json", "tree.json", "keyposes.motion", "completed.motion", "refined.motion",
                        "reward_curve.csv", "report.json"})
    if (!std::filesystem::exists(out_dir / f)) throw Error(std::string("artifact missing after run: ") + f);
  return report;
}

}  // namespace kinoplan::pipeline

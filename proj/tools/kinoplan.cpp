// kinoplan command line: one subcommand per pipeline stage plus the full run.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "kinoplan/core/error.hpp"
#include "kinoplan/core/io.hpp"
#include "kinoplan/core/kinematics.hpp"
#include "kinoplan/ik/prior.hpp"
#include "kinoplan/pipeline/pipeline.hpp"
#include "kinoplan/protocol/http.hpp"

namespace kp = kinoplan;
namespace pl = kinoplan::pipeline;
using kp::io::Json;

namespace {

enum ExitCode { kOk = 0, kInternal = 1, kValidation = 2, kBackend = 3, kNumerical = 4 };

struct Common {
  std::string config_path;
  std::string proposer_url;
  std::string scorer_url;
  std::string judge_url;
  std::string prior;
  int verbose = 0;
  bool quiet = false;
  std::optional<std::uint64_t> seed;

  pl::PipelineConfig base() const {
    pl::PipelineConfig c = config_path.empty() ? pl::PipelineConfig{} : pl::PipelineConfig::load(config_path);
    if (!proposer_url.empty()) c.backends.proposer = proposer_url;
    if (!scorer_url.empty()) c.backends.scorer = scorer_url;
    if (!judge_url.empty()) c.backends.judge = judge_url;
    if (!prior.empty()) c.backends.prior = prior;
    if (seed) c.seed = *seed;
    return c;
  }
  pl::Logger logger() const { return pl::Logger(quiet ? -1 : 1 + verbose); }
};

void add_common(CLI::App* cmd, Common& c, bool backends) {
  cmd->add_option("--config", c.config_path, "Pipeline config JSON; flags override its fields")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_flag("-v,--verbose", c.verbose, "More log output (repeatable)");
  cmd->add_flag("-q,--quiet", c.quiet, "Only errors");
  if (!backends) return;
  cmd->add_option("--proposer-url", c.proposer_url, "Proposer base URL or 'stub' (env PROPOSER_URL)");
  cmd->add_option("--scorer-url", c.scorer_url, "Scorer base URL or 'stub' (env SCORER_URL)");
  cmd->add_option("--judge-url", c.judge_url, "Judge base URL or 'stub' (env JUDGE_URL)");
  cmd->add_option("--prior", c.prior, "'builtin', a prior file, or a /decode base URL");
}

std::vector<kp::Pose> keys_from_file(const std::string& path, const pl::PipelineConfig& config,
                                     const kp::Skeleton& skeleton, const pl::Logger& log) {
  if (std::filesystem::path(path).extension() == ".json") {
    const auto prior = pl::make_prior(config.backends.prior, skeleton);
    const auto solutions = pl::run_solve_stage(kp::io::load_plan(path), skeleton, *prior, config.ik, log);
    std::vector<kp::Pose> keys;
    for (const auto& s : solutions) keys.push_back(s.pose);
    return keys;
  }
  return kp::io::load_motion(path).frames;
}

std::set<std::string> split_metrics(const std::string& list) {
  static const std::set<std::string> known = {"float", "pene", "rewards", "clip", "vlm"};
  std::set<std::string> out;
  std::stringstream ss(list);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    if (!known.count(item)) throw kp::ValidationError("unknown metric '" + item + "'");
    out.insert(item);
  }
  return out;
}

void print_or_write(const Json& doc, const std::string& out) {
  if (out.empty()) std::cout << doc.dump(2) << "\n";
  else kp::io::write_text(out, doc.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kinoplan: keyframe planning, pose IK, motion completion and physics refinement"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "kinoplan 0.1.0");
  Common common;
  std::function<int()> action;
  const kp::Skeleton skeleton = kp::Skeleton::standard();

  // plan
  auto* plan = app.add_subcommand("plan", "Search a keyframe plan with MCTS");
  add_common(plan, common, true);
  std::string prompt, out, tree_out, template_path;
  std::optional<std::size_t> frames;
  std::optional<int> iters, segment, max_children;
  std::optional<double> alpha;
  plan->add_option("--prompt", prompt, "Motion description")->required();
  plan->add_option("--frames", frames, "Keyframe count K");
  plan->add_option("--iters", iters, "MCTS iterations");
  plan->add_option("--alpha", alpha, "UCT exploration weight");
  plan->add_option("--segment", segment, "Segment length K_s");
  plan->add_option("--max-children", max_children, "Children per node");
  plan->add_option("--template", template_path, "Prompt template file");
  plan->add_option("-o,--out", out, "Plan JSON output")->required();
  plan->add_option("--tree", tree_out, "Also write the search tree JSON");
  plan->callback([&] {
    action = [&] {
      auto c = common.base();
      c.prompt = prompt;
      if (frames) c.keyframes = *frames;
      if (iters) c.search_iterations = *iters;
      if (alpha) c.alpha = *alpha;
      if (segment) c.segment_length = *segment;
      if (max_children) c.max_children = *max_children;
      if (!template_path.empty()) c.prompt_template = template_path;
      if (c.length <= c.keyframes) c.length = c.keyframes + 1;
      pl::resolve_backends(c.backends);
      c.validate();
      const auto log = common.logger();
      auto backends = pl::make_backends(c, skeleton);
      auto result = pl::run_plan_stage(c, skeleton, backends, pl::load_prompt_template(c), log);
      kp::io::save_plan(out, result.best_plan);
      if (!tree_out.empty())
        kp::io::write_text(tree_out, kp::search::tree_to_json(*result.root, c.search_config(), result.stats).dump(2) + "\n");
      return kOk;
    };
  });

  // solve
  auto* solve = app.add_subcommand("solve", "Full-body IK for every keyframe of a plan");
  add_common(solve, common, false);
  std::string plan_path, residuals_out;
  solve->add_option("--prior", common.prior, "'builtin', a prior file, or a /decode base URL");
  solve->add_option("--plan", plan_path, "Plan JSON")->required()->check(CLI::ExistingFile);
  solve->add_option("-o,--out", out, "Key pose motion output")->required();
  solve->add_option("--report", residuals_out, "Write per-frame residuals as JSON");
  solve->callback([&] {
    action = [&] {
      auto c = common.base();
      c.validate();
      const auto prior = pl::make_prior(c.backends.prior, skeleton);
      const auto solutions = pl::run_solve_stage(kp::io::load_plan(plan_path), skeleton, *prior, c.ik, common.logger());
      kp::Motion keys;
      keys.fps = c.fps;
      Json report = Json::array();
      for (const auto& s : solutions) {
        keys.frames.push_back(s.pose);
        report.push_back({{"residual", s.residual}, {"converged", s.converged}, {"iterations", s.iterations_used}});
      }
      kp::io::save_motion(out, keys);
      if (!residuals_out.empty()) kp::io::write_text(residuals_out, report.dump(2) + "\n");
      return kOk;
    };
  });

  // complete
  auto* complete = app.add_subcommand("complete", "Dense motion from key poses");
  add_common(complete, common, false);
  std::string keys_path;
  std::optional<std::size_t> length;
  std::optional<double> lambda, gamma, smoothness;
  std::optional<int> steps;
  complete->add_option("--prior", common.prior, "Prior used when --keys is a plan");
  complete->add_option("--keys", keys_path, "Key poses: a motion file, or a plan JSON (solved first)")
      ->required()
      ->check(CLI::ExistingFile);
  complete->add_option("--length", length, "Output length L");
  complete->add_option("--lambda", lambda, "Temporal weight");
  complete->add_option("--gamma", gamma, "Soft-DTW smoothing");
  complete->add_option("--smoothness", smoothness, "Second-difference weight");
  complete->add_option("--steps", steps, "Optimizer steps");
  complete->add_option("-o,--out", out, "Completed motion output")->required();
  complete->callback([&] {
    action = [&] {
      auto c = common.base();
      if (length) c.length = *length;
      if (lambda) c.completion.lambda = *lambda;
      if (gamma) c.completion.gamma = *gamma;
      if (smoothness) c.completion.smoothness = *smoothness;
      if (steps) c.completion.max_steps = *steps;
      const auto log = common.logger();
      const auto keys = keys_from_file(keys_path, c, skeleton, log);
      c.keyframes = keys.size();
      c.validate();
      const auto result = kp::completion::complete(keys, c.completion_config());
      log.info("complete", std::to_string(result.motion.length()) + " frames, loss " +
                               kp::io::format_double(result.final_loss));
      kp::io::save_motion(out, result.motion);
      return kOk;
    };
  });

  // refine
  auto* refine = app.add_subcommand("refine", "PPO refinement against the physics reward");
  add_common(refine, common, false);
  std::string motion_path, curve_out;
  std::optional<double> clip, kl, sigma, lr;
  std::optional<int> epochs;
  refine->add_option("--motion-init", motion_path, "Motion to refine")->required()->check(CLI::ExistingFile);
  refine->add_option("--iters", iters, "PPO iterations");
  refine->add_option("--clip", clip, "Clip threshold");
  refine->add_option("--kl", kl, "KL weight");
  refine->add_option("--lr", lr, "Learning rate");
  refine->add_option("--sigma", sigma, "Policy standard deviation at the first denoising step");
  refine->add_option("--epochs", epochs, "Passes over the buffer per iteration");
  refine->add_option("-o,--out", out, "Refined motion output")->required();
  refine->add_option("--curve", curve_out, "Reward curve CSV output");
  refine->callback([&] {
    action = [&] {
      auto c = common.base();
      if (iters) c.refine.iterations = *iters;
      if (clip) c.refine.ppo.clip = *clip;
      if (kl) c.refine.ppo.kl_weight = *kl;
      if (lr) c.refine.ppo.learning_rate = *lr;
      if (sigma) c.refine.sigma_max = *sigma;
      if (epochs) c.refine.ppo.epochs = *epochs;
      c.validate();
      const auto proxy = kp::physics::SurfaceProxy::standard(skeleton);
      const auto outcome =
          pl::refine_motion(skeleton, kp::io::load_motion(motion_path), c.refine, c.seed, proxy, common.logger());
      kp::io::save_motion(out, outcome.motion);
      if (!curve_out.empty()) pl::write_reward_curve(curve_out, outcome);
      return kOk;
    };
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Physics metrics, plus CLIP_S / VLM_S through the scorer protocol");
  add_common(eval, common, true);
  std::string metrics = "float,pene,rewards";
  bool as_json = false;
  std::optional<int> repeats, stride;
  eval->add_option("--motion", motion_path, "Motion file")->required()->check(CLI::ExistingFile);
  eval->add_option("--metrics", metrics, "Comma list of float,pene,rewards,clip,vlm");
  eval->add_option("--prompt", prompt, "Description for clip/vlm");
  eval->add_option("--judge-repeats", repeats, "Judge calls averaged");
  eval->add_option("--frame-stride", stride, "Every n-th frame goes to the judge");
  eval->add_flag("--json", as_json, "JSON output");
  eval->add_option("-o,--out", out, "Write the report here instead of stdout");
  eval->callback([&] {
    action = [&] {
      auto c = common.base();
      if (repeats) c.eval.judge_repeats = *repeats;
      if (stride) c.eval.frame_stride = *stride;
      if (!prompt.empty()) c.prompt = prompt;
      const auto wanted = split_metrics(metrics);
      pl::resolve_backends(c.backends);
      c.validate();
      if ((wanted.count("clip") || wanted.count("vlm")) && c.prompt.empty())
        throw kp::ValidationError("--prompt is required for clip and vlm");
      const auto log = common.logger();
      std::unique_ptr<kp::protocol::ScorerBackend> scorer;
      std::unique_ptr<kp::protocol::JudgeBackend> judge;
      if (wanted.count("clip") || wanted.count("vlm")) {
        c.backends.prior = "builtin";
        auto b = pl::make_backends(c, skeleton);
        if (wanted.count("clip")) scorer = std::move(b.scorer);
        if (wanted.count("vlm")) judge = std::move(b.judge);
      }
      const auto proxy = kp::physics::SurfaceProxy::standard(skeleton);
      const auto m = pl::evaluate_motion(skeleton, kp::io::load_motion(motion_path), c.prompt, scorer.get(),
                                         judge.get(), proxy, c.eval);
      Json full = m.to_json();
      for (const auto& w : m.warnings) log.warn("eval", w);
      Json report = Json::object();
      if (wanted.count("float")) report["float_mm"] = full["float_mm"];
      if (wanted.count("pene")) report["pene_mm"] = full["pene_mm"];
      if (wanted.count("rewards")) report["rewards"] = full["rewards"];
      if (wanted.count("clip")) report["clip_s"] = full["clip_s"];
      if (wanted.count("vlm")) {
        report["vlm_s"] = full["vlm_s"];
        report["vlm"] = full["vlm"];
        if (!judge) log.warn("eval", "no judge configured; vlm is null");
      }
      report["warnings"] = full["warnings"];
      if (as_json || !out.empty()) {
        print_or_write(report, out);
      } else {
        for (const auto& [k, v] : report.items()) {
          if (k == "warnings") continue;
          if (v.is_object())
            for (const auto& [k2, v2] : v.items()) std::cout << k << "." << k2 << " " << v2.dump() << "\n";
          else
            std::cout << k << " " << v.dump() << "\n";
        }
      }
      return kOk;
    };
  });

  // render
  auto* render = app.add_subcommand("render", "Stick-figure PNGs for a motion");
  add_common(render, common, false);
  std::optional<std::size_t> frame;
  render->add_option("--motion", motion_path, "Motion file")->required()->check(CLI::ExistingFile);
  render->add_option("--frame", frame, "Only this frame (0-based), written to --out as a PNG file");
  render->add_option("-o,--out", out, "Output directory (or PNG path with --frame)")->required();
  render->callback([&] {
    action = [&] {
      const auto motion = kp::io::load_motion(motion_path);
      kp::check_motion(skeleton, motion);
      if (frame) {
        if (*frame >= motion.length()) throw kp::ValidationError("frame index out of range");
        kp::write_png(out, kp::render_frame(skeleton, motion.frames[*frame]));
      } else {
        const auto names = pl::render_frames(skeleton, motion, out);
        common.logger().info("render", std::to_string(names.size()) + " frames written to " + out);
      }
      return kOk;
    };
  });

  // pipeline
  auto* run = app.add_subcommand("pipeline", "plan -> solve -> complete -> refine -> eval");
  add_common(run, common, true);
  std::string out_dir;
  std::optional<int> refine_iters;
  run->add_option("--prompt", prompt, "Motion description (overrides the config)");
  run->add_option("--frames", frames, "Keyframe count K");
  run->add_option("--length", length, "Motion length L");
  run->add_option("--iters", iters, "MCTS iterations");
  run->add_option("--refine-iters", refine_iters, "PPO iterations");
  run->add_option("--template", template_path, "Prompt template file");
  run->add_option("-o,--out", out_dir, "Output directory")->required();
  run->callback([&] {
    action = [&] {
      auto c = common.base();
      if (!prompt.empty()) c.prompt = prompt;
      if (frames) c.keyframes = *frames;
      if (length) c.length = *length;
      if (iters) c.search_iterations = *iters;
      if (refine_iters) c.refine.iterations = *refine_iters;
      if (!template_path.empty()) c.prompt_template = template_path;
      if (c.prompt.empty()) throw kp::ValidationError("a prompt is required (--prompt or config)");
      const auto report = pl::run_pipeline(c, out_dir, common.logger());
      if (!common.quiet) std::cout << (std::filesystem::path(out_dir) / "report.json").string() << "\n";
      (void)report;
      return kOk;
    };
  });

  // init-data
  auto* init = app.add_subcommand("init-data", "Write the bundled skeleton, sample poses and reference prior");
  std::size_t sample_count = 2000;
  std::uint64_t sample_seed = 7;
  std::size_t latent_dim = 32;
  init->add_option("-o,--out", out_dir, "Target directory")->required();
  init->add_option("--samples", sample_count, "Sample pose count");
  init->add_option("--sample-seed", sample_seed, "Sample pose seed");
  init->add_option("--latent-dim", latent_dim, "Prior latent dimension");
  init->callback([&] {
    action = [&] {
      std::filesystem::create_directories(out_dir);
      const std::filesystem::path dir(out_dir);
      kp::io::save_skeleton(dir / "skeleton.json", skeleton);
      kp::io::save_skeleton(dir / "planar_chain.json", kp::Skeleton::planar_chain());
      kp::Motion samples;
      samples.frames = kp::ik::synthetic_pose_samples(skeleton, sample_count, sample_seed);
      kp::io::save_motion(dir / "sample_poses.motion", samples);
      Eigen::MatrixXd rows(static_cast<Eigen::Index>(samples.length()),
                           static_cast<Eigen::Index>(skeleton.pose_dimension()));
      for (std::size_t i = 0; i < samples.length(); ++i)
        rows.row(static_cast<Eigen::Index>(i)) = samples.frames[i].to_vector().transpose();
      kp::ik::AffinePrior::fit(rows, latent_dim).save(dir / "prior.txt");
      return kOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    return action ? action() : kOk;
  } catch (const kp::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const kp::BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kBackend;
  } catch (const kp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const kp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

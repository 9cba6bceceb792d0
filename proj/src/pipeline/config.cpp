#include "kinoplan/pipeline/config.hpp"

#include <cstdlib>
#include <set>

#include "kinoplan/core/error.hpp"
#include "kinoplan/core/hash.hpp"
#include "kinoplan/core/io.hpp"
#include "kinoplan/protocol/http.hpp"

#ifndef KINOPLAN_DATA_DIR
#define KINOPLAN_DATA_DIR "data"
#endif

namespace kinoplan::pipeline {

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class Fields {
 public:
  Fields(const Json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
    if (!doc_.is_object()) throw ValidationError(where_ + " must be an object");
  }
  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : doc_.items())
      if (!seen_.count(key)) throw ValidationError("unknown config field '" + prefix() + key + "'");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      out = doc_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw ValidationError("config field '" + prefix() + key + "' has the wrong type");
    }
  }

  const Json* object(const char* key) {
    seen_.insert(key);
    if (!doc_.contains(key)) return nullptr;
    return &doc_.at(key);
  }

  std::string prefix() const { return where_.empty() ? "" : where_ + "."; }

 private:
  const Json& doc_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

ik::IkSettings PipelineConfig::default_ik_settings() {
  ik::IkSettings s;
  s.regularizer_weight = 1e-3;
  s.tolerance = 0.03;
  s.max_iterations = 300;
  return s;
}

void PipelineConfig::validate() const {
  if (keyframes < 1) throw ValidationError("keyframes K must be >= 1");
  if (segment_length < 1) throw ValidationError("segment_length must be >= 1");
  if (length <= keyframes)
    throw ValidationError("length L must exceed keyframes K (L=" + std::to_string(length) +
                          ", K=" + std::to_string(keyframes) + ")");
  if (!(fps > 0.0)) throw ValidationError("fps must be > 0");
  search_config().validate();
  completion_config().validate(keyframes);
  if (!(proposer_noise >= 0.0)) throw ValidationError("proposer noise must be >= 0");
  if (propose.max_attempts < 1) throw ValidationError("propose max_attempts must be >= 1");
  if (!(propose.workspace_bound > 0.0)) throw ValidationError("workspace bound must be > 0");
  if (ik.max_iterations < 1 || !(ik.step_size > 0.0) || !(ik.tolerance > 0.0) || !(ik.regularizer_weight >= 0.0))
    throw ValidationError("invalid IK settings");
  if (refine.iterations < 0) throw ValidationError("refine iterations must be >= 0");
  if (refine.denoise_steps < 1) throw ValidationError("refine denoise_steps must be >= 1");
  if (!(refine.sigma_max > 0.0) || !(refine.sigma_min > 0.0)) throw ValidationError("refine sigmas must be > 0");
  refine.ppo.validate();
  if (eval.judge_repeats < 1) throw ValidationError("judge repeats must be >= 1");
  if (eval.frame_stride < 1) throw ValidationError("frame stride must be >= 1");
}

search::SearchConfig PipelineConfig::search_config() const {
  search::SearchConfig s;
  s.iterations = search_iterations;
  s.alpha = alpha;
  s.segment_length = segment_length;
  s.target_length = keyframes;
  s.max_children = max_children;
  return s;
}

completion::CompletionConfig PipelineConfig::completion_config() const {
  completion::CompletionConfig c = completion;
  c.target_length = length;
  c.fps = fps;
  c.seed = seed;
  return c;
}

Json PipelineConfig::to_json() const {
  const auto& p = refine.ppo;
  return {
      {"prompt", prompt},
      {"seed", seed},
      {"keyframes", keyframes},
      {"segment_length", segment_length},
      {"length", length},
      {"fps", fps},
      {"search", {{"iterations", search_iterations}, {"alpha", alpha}, {"max_children", max_children}}},
      {"proposer",
       {{"noise", proposer_noise}, {"max_attempts", propose.max_attempts}, {"workspace_bound", propose.workspace_bound}}},
      {"ik",
       {{"regularizer_weight", ik.regularizer_weight},
        {"max_iterations", ik.max_iterations},
        {"step_size", ik.step_size},
        {"tolerance", ik.tolerance},
        {"workspace_bound", ik.workspace_bound},
        {"gradient_tolerance", ik.gradient_tolerance},
        {"plateau_patience", ik.plateau_patience}}},
      {"completion",
       {{"lambda", completion.lambda},
        {"gamma", completion.gamma},
        {"smoothness", completion.smoothness},
        {"max_steps", completion.max_steps},
        {"step_size", completion.step_size},
        {"tau_refresh", completion.tau_refresh}}},
      {"refine",
       {{"iterations", refine.iterations},
        {"denoise_steps", refine.denoise_steps},
        {"sigma_max", refine.sigma_max},
        {"sigma_min", refine.sigma_min},
        {"clip", p.clip},
        {"kl_weight", p.kl_weight},
        {"buffer_size", p.buffer_size},
        {"samples_per_iteration", p.samples_per_iteration},
        {"batch_size", p.batch_size},
        {"learning_rate", p.learning_rate},
        {"batch_mean_baseline", p.batch_mean_baseline},
        {"epochs", p.epochs}}},
      {"eval",
       {{"judge_repeats", eval.judge_repeats},
        {"frame_stride", eval.frame_stride},
        {"semantic_weight", eval.weights.semantic},
        {"naturalness_weight", eval.weights.naturalness}}},
      {"backends",
       {{"proposer", backends.proposer},
        {"scorer", backends.scorer},
        {"judge", backends.judge},
        {"prior", backends.prior}}},
      {"prompt_template", prompt_template},
  };
}

PipelineConfig PipelineConfig::from_json(const Json& doc) {
  PipelineConfig c;
  {
    Fields f(doc, "");
    f.get("prompt", c.prompt);
    f.get("seed", c.seed);
    f.get("keyframes", c.keyframes);
    f.get("segment_length", c.segment_length);
    f.get("length", c.length);
    f.get("fps", c.fps);
    f.get("prompt_template", c.prompt_template);
    if (const Json* s = f.object("search")) {
      Fields g(*s, "search");
      g.get("iterations", c.search_iterations);
      g.get("alpha", c.alpha);
      g.get("max_children", c.max_children);
    }
    if (const Json* s = f.object("proposer")) {
      Fields g(*s, "proposer");
      g.get("noise", c.proposer_noise);
      g.get("max_attempts", c.propose.max_attempts);
      g.get("workspace_bound", c.propose.workspace_bound);
    }
    if (const Json* s = f.object("ik")) {
      Fields g(*s, "ik");
      g.get("regularizer_weight", c.ik.regularizer_weight);
      g.get("max_iterations", c.ik.max_iterations);
      g.get("step_size", c.ik.step_size);
      g.get("tolerance", c.ik.tolerance);
      g.get("workspace_bound", c.ik.workspace_bound);
      g.get("gradient_tolerance", c.ik.gradient_tolerance);
      g.get("plateau_patience", c.ik.plateau_patience);
    }
    if (const Json* s = f.object("completion")) {
      Fields g(*s, "completion");
      g.get("lambda", c.completion.lambda);
      g.get("gamma", c.completion.gamma);
      g.get("smoothness", c.completion.smoothness);
      g.get("max_steps", c.completion.max_steps);
      g.get("step_size", c.completion.step_size);
      g.get("tau_refresh", c.completion.tau_refresh);
    }
    if (const Json* s = f.object("refine")) {
      Fields g(*s, "refine");
      auto& p = c.refine.ppo;
      g.get("iterations", c.refine.iterations);
      g.get("denoise_steps", c.refine.denoise_steps);
      g.get("sigma_max", c.refine.sigma_max);
      g.get("sigma_min", c.refine.sigma_min);
      g.get("clip", p.clip);
      g.get("kl_weight", p.kl_weight);
      g.get("buffer_size", p.buffer_size);
      g.get("samples_per_iteration", p.samples_per_iteration);
      g.get("batch_size", p.batch_size);
      g.get("learning_rate", p.learning_rate);
      g.get("batch_mean_baseline", p.batch_mean_baseline);
      g.get("epochs", p.epochs);
    }
    if (const Json* s = f.object("eval")) {
      Fields g(*s, "eval");
      g.get("judge_repeats", c.eval.judge_repeats);
      g.get("frame_stride", c.eval.frame_stride);
      g.get("semantic_weight", c.eval.weights.semantic);
      g.get("naturalness_weight", c.eval.weights.naturalness);
    }
    if (const Json* s = f.object("backends")) {
      Fields g(*s, "backends");
      g.get("proposer", c.backends.proposer);
      g.get("scorer", c.backends.scorer);
      g.get("judge", c.backends.judge);
      g.get("prior", c.backends.prior);
    }
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  Json doc;
  try {
    doc = Json::parse(io::read_text(path));
  } catch (const Json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return from_json(doc);
}

void PipelineConfig::save(const std::filesystem::path& path) const { io::write_text(path, to_json().dump(2) + "\n"); }

std::string PipelineConfig::hash() const { return hex64(fnv1a(to_json().dump())); }

void resolve_backends(BackendSelection& backends) {
  auto fill = [](std::string& field, const char* env, const char* fallback) {
    if (!field.empty()) return;
    if (auto v = protocol::env_url(env)) field = *v;
    else field = fallback;
  };
  fill(backends.proposer, protocol::kProposerUrlEnv, "stub");
  fill(backends.scorer, protocol::kScorerUrlEnv, "stub");
  fill(backends.judge, protocol::kJudgeUrlEnv, "");
}

std::filesystem::path data_dir() {
  if (const char* v = std::getenv("KINOPLAN_DATA_DIR"); v && *v) return v;
  return KINOPLAN_DATA_DIR;
}

}  // namespace kinoplan::pipeline

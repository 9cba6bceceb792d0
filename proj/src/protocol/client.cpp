#include "kinoplan/protocol/client.hpp"

#include <cmath>

#include "kinoplan/core/error.hpp"
#include "kinoplan/core/io.hpp"
#include "kinoplan/protocol/base64.hpp"

namespace kinoplan::protocol {

namespace {

double finite_number(const Json& doc, const char* key, const char* what) {
  if (!doc.is_object() || !doc.contains(key) || !doc.at(key).is_number())
    throw SchemaError(std::string(what) + " response needs a numeric '" + key + "'");
  const double v = doc.at(key).get<double>();
  if (!std::isfinite(v)) throw SchemaError(std::string(what) + " '" + key + "' is not finite");
  return v;
}

Json frames_json(const std::vector<Keyframe>& frames) {
  Json out = Json::array();
  for (const auto& f : frames) out.push_back(io::keyframe_to_json(f));
  return out;
}

}  // namespace

Json proposal_request_json(const ProposalRequest& req, int attempt, const std::optional<std::string>& feedback) {
  return {{"prompt", req.prompt},
          {"template", req.prompt_template},
          {"prefix", {{"mode", "absolute"}, {"frames", frames_json(req.prefix.frames)}}},
          {"initial", io::keyframe_to_json(req.initial)},
          {"target_length", req.target_length},
          {"segment_length", req.segment_length},
          {"attempt", attempt},
          {"feedback", feedback ? Json(*feedback) : Json(nullptr)}};
}

ProposalResponse parse_proposal_response(const Json& response, const ProposalRequest& req,
                                         const ProposeOptions& options) {
  if (!response.is_object() || !response.contains("completion"))
    throw SchemaError("proposal response needs a 'completion' object");
  const Json& completion = response.at("completion");
  if (!completion.is_object() || !completion.contains("mode") || !completion.at("mode").is_string() ||
      !completion.contains("frames") || !completion.at("frames").is_array())
    throw SchemaError("completion needs 'mode' and 'frames'");
  const auto mode_name = completion.at("mode").get<std::string>();
  if (mode_name != "delta" && mode_name != "absolute")
    throw SchemaError("completion mode must be 'delta' or 'absolute'");
  const KeyframeMode mode = mode_name == "delta" ? KeyframeMode::delta : KeyframeMode::absolute;

  const std::size_t expected = req.target_length - req.prefix.length();
  const Json& frames = completion.at("frames");
  if (frames.size() != expected)
    throw SchemaError("completion has " + std::to_string(frames.size()) + " frames, expected " +
                      std::to_string(expected));

  ProposalResponse out;
  Keyframe previous = req.prefix.frames.empty() ? req.initial : req.prefix.frames.back();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    Keyframe key;
    try {
      key = io::keyframe_from_json(frames[i], mode);
    } catch (const FormatError& e) {
      throw SchemaError("completion frame " + std::to_string(i) + ": " + e.what());
    }
    if (mode == KeyframeMode::delta)
      for (std::size_t k = 0; k < kKeyJointCount; ++k) key.positions[k] += previous.positions[k];
    key.mode = KeyframeMode::absolute;
    if (!key.all_finite() || key.max_abs_coordinate() > options.workspace_bound)
      throw SchemaError("completion frame " + std::to_string(i) + " leaves the workspace");
    out.completion.push_back(key);
    previous = key;
  }
  if (response.contains("rationale")) {
    if (!response.at("rationale").is_string()) throw SchemaError("rationale must be a string");
    out.rationale = response.at("rationale").get<std::string>();
  }
  return out;
}

ProposalResponse propose(ProposerBackend& backend, const ProposalRequest& req, const ProposeOptions& options) {
  if (req.target_length < 1) throw ValidationError("target length must be positive");
  if (req.prefix.length() > req.target_length) throw ValidationError("prefix longer than target length");
  if (options.max_attempts < 1) throw ValidationError("proposer needs at least one attempt");
  for (const auto& f : req.prefix.frames)
    if (f.mode != KeyframeMode::absolute) throw ValidationError("proposal prefix must be absolute");

  std::optional<std::string> feedback;
  for (int attempt = 1;; ++attempt) {
    try {
      return parse_proposal_response(backend.propose(proposal_request_json(req, attempt, feedback)), req, options);
    } catch (const SchemaError& e) {
      if (attempt >= options.max_attempts)
        throw SchemaError("proposer output invalid after " + std::to_string(attempt) + " attempt(s): " + e.what());
      feedback = e.what();
    }
  }
}

Json score_request_json(const std::string& prompt, const std::vector<std::uint8_t>& png) {
  return {{"prompt", prompt}, {"images", Json::array({base64_encode(png)})}};
}

double parse_score_response(const Json& response) {
  if (!response.is_object() || !response.contains("scores") || !response.at("scores").is_array() ||
      response.at("scores").size() != 1)
    throw SchemaError("score response needs 'scores' with exactly one entry");
  const Json wrapped = {{"score", response.at("scores")[0]}};
  const double s = finite_number(wrapped, "score", "score");
  if (s < kScoreMin || s > kScoreMax) throw SchemaError("score " + std::to_string(s) + " outside [-100, 100]");
  return s;
}

std::vector<double> score_each(ScorerBackend& backend, const std::string& prompt,
                               const std::vector<std::vector<std::uint8_t>>& pngs) {
  if (pngs.empty()) throw ValidationError("scoring needs at least one image");
  std::vector<double> out;
  out.reserve(pngs.size());
  for (const auto& png : pngs) out.push_back(parse_score_response(backend.score(score_request_json(prompt, png))));
  return out;
}

double score_frames(ScorerBackend& backend, const std::string& prompt,
                    const std::vector<std::vector<std::uint8_t>>& pngs) {
  const auto scores = score_each(backend, prompt, pngs);
  double total = 0.0;
  for (double s : scores) total += s;
  return total / static_cast<double>(scores.size());
}

Json judge_request_json(const std::string& prompt, const std::vector<std::vector<std::uint8_t>>& pngs,
                        const JudgeWeights& weights) {
  Json frames = Json::array();
  for (const auto& png : pngs) frames.push_back(base64_encode(png));
  return {{"prompt", prompt},
          {"frames", frames},
          {"weights", {{"semantic", weights.semantic}, {"naturalness", weights.naturalness}}}};
}

JudgeResult parse_judge_response(const Json& response, const JudgeWeights& weights) {
  JudgeResult r;
  r.semantic = finite_number(response, "semantic", "judge");
  r.naturalness = finite_number(response, "naturalness", "judge");
  r.weighted = finite_number(response, "weighted", "judge");
  for (double v : {r.semantic, r.naturalness})
    if (v < kJudgeMin || v > kJudgeMax) throw SchemaError("judge score outside [0, 5]");
  const double expected = weights.semantic * r.semantic + weights.naturalness * r.naturalness;
  if (std::abs(r.weighted - expected) > 1e-9) throw SchemaError("judge weighted score does not match its weights");
  return r;
}

JudgeResult judge_motion(JudgeBackend& backend, const std::string& prompt,
                         const std::vector<std::vector<std::uint8_t>>& pngs, const JudgeWeights& weights,
                         int repeats) {
  if (repeats < 1) throw ValidationError("judge repeats must be >= 1");
  if (pngs.empty()) throw ValidationError("judging needs at least one frame");
  if (!(weights.semantic >= 0.0) || !(weights.naturalness >= 0.0))
    throw ValidationError("judge weights must be non-negative");
  const Json request = judge_request_json(prompt, pngs, weights);
  JudgeResult mean;
  for (int r = 0; r < repeats; ++r) {
    const JudgeResult one = parse_judge_response(backend.judge(request), weights);
    mean.semantic += one.semantic;
    mean.naturalness += one.naturalness;
    mean.weighted += one.weighted;
  }
  mean.semantic /= repeats;
  mean.naturalness /= repeats;
  mean.weighted /= repeats;
  return mean;
}

}  // namespace kinoplan::protocol

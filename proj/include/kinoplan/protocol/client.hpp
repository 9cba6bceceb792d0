#pragma once

// Client side of the model-service protocol. Backends exchange JSON
// documents (docs/schemas/*.json); the functions here build requests,
// validate responses and turn them into domain values. The same backend
// interfaces are implemented by the HTTP transport and by the in-process
// stubs, so both go through identical validation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinoplan/core/pose.hpp"

namespace kinoplan::protocol {

using Json = nlohmann::json;

class ProposerBackend {
 public:
  virtual ~ProposerBackend() = default;
  /// POST /propose
  virtual Json propose(const Json& request) = 0;
};

class ScorerBackend {
 public:
  virtual ~ScorerBackend() = default;
  /// POST /score
  virtual Json score(const Json& request) = 0;
};

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  /// POST /judge
  virtual Json judge(const Json& request) = 0;
};

struct ProposalRequest {
  std::string prompt;
  KeyframePlan prefix;         // absolute, possibly empty
  std::size_t target_length = 0;
  int segment_length = 2;
  Keyframe initial;            // absolute start pose deltas are taken from
  std::string prompt_template; // embedded verbatim in the request
};

struct ProposalResponse {
  std::vector<Keyframe> completion;  // absolute, length target_length - |prefix|
  std::string rationale;
};

struct ProposeOptions {
  int max_attempts = 3;
  double workspace_bound = 5.0;  // meters, per coordinate
};

Json proposal_request_json(const ProposalRequest& req, int attempt, const std::optional<std::string>& feedback);

/// Parses and validates one /propose response. Throws SchemaError.
ProposalResponse parse_proposal_response(const Json& response, const ProposalRequest& req,
                                         const ProposeOptions& options = {});

/// Retries schema violations up to max_attempts, sending the previous
/// error back as feedback. BackendError from the transport is not retried.
ProposalResponse propose(ProposerBackend& backend, const ProposalRequest& req, const ProposeOptions& options = {});

constexpr double kScoreMin = -100.0;
constexpr double kScoreMax = 100.0;

Json score_request_json(const std::string& prompt, const std::vector<std::uint8_t>& png);
double parse_score_response(const Json& response);

/// Mean of per-image scores; one request per image.
double score_frames(ScorerBackend& backend, const std::string& prompt,
                    const std::vector<std::vector<std::uint8_t>>& pngs);
/// Per-image scores in request order.
std::vector<double> score_each(ScorerBackend& backend, const std::string& prompt,
                               const std::vector<std::vector<std::uint8_t>>& pngs);

constexpr double kJudgeMin = 0.0;
constexpr double kJudgeMax = 5.0;

struct JudgeWeights {
  double semantic = 0.6;
  double naturalness = 0.4;
};

struct JudgeResult {
  double semantic = 0.0;
  double naturalness = 0.0;
  double weighted = 0.0;
};

Json judge_request_json(const std::string& prompt, const std::vector<std::vector<std::uint8_t>>& pngs,
                        const JudgeWeights& weights);
/// Checks ranges and weighted = w_s * semantic + w_n * naturalness (1e-9).
JudgeResult parse_judge_response(const Json& response, const JudgeWeights& weights);

/// Mean over `repeats` judge calls.
JudgeResult judge_motion(JudgeBackend& backend, const std::string& prompt,
                         const std::vector<std::vector<std::uint8_t>>& pngs, const JudgeWeights& weights = {},
                         int repeats = 10);

}  // namespace kinoplan::protocol

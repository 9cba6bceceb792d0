#pragma once

// Keyframe tree search. Nodes hold segments of K_s keyframes; a root-to-node
// path is a plan prefix. One child is proposed per visit of a node that is not
// yet fully expanded, its full completion is scored, and rewards normalized to
// [0, 1] are backed up along the path.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "kinoplan/core/error.hpp"
#include "kinoplan/core/pose.hpp"
#include "kinoplan/protocol/client.hpp"

namespace kinoplan::search {

using Json = nlohmann::json;

struct SearchConfig {
  int iterations = 30;
  double alpha = 0.05;
  int segment_length = 2;
  std::size_t target_length = 8;
  int max_children = 3;
  double duplicate_tolerance = 1e-6;  // meters, max abs coordinate difference

  void validate() const;
  /// ceil(K / K_s)
  int max_depth() const;
};

struct SearchNode {
  std::vector<Keyframe> segment;  // empty at the root
  int visits = 0;
  double total_reward = 0.0;
  int depth = 0;
  bool terminal = false;
  /// Proposals made at this node, merged duplicates included. The node counts
  /// as fully expanded once this reaches max_children.
  int expansion_attempts = 0;
  /// Absolute plan (length K) whose first segment created this node.
  KeyframePlan completion;
  std::vector<std::unique_ptr<SearchNode>> children;

  /// W / N; nullopt while unvisited.
  std::optional<double> q() const;
  bool fully_expanded(int max_children) const;
};

/// Q(child) + alpha * sqrt(2 ln N(parent) / N(child)); +inf when N(child) = 0.
double uct_value(const SearchNode& parent, const SearchNode& child, double alpha);

/// Index of the child with the largest UCT value, lowest index on ties.
std::size_t best_uct_child(const SearchNode& node, double alpha);

/// Walks from the root by UCT, stopping at a terminal node, a node without
/// children, or (when max_children > 0) a node that still accepts children.
std::vector<SearchNode*> select_leaf(SearchNode& root, double alpha, int max_children = 0);

/// N += 1 on every node of the path; W += reward too unless the last node
/// is terminal.
void backpropagate(const std::vector<SearchNode*>& path, double reward);

/// Search scores live in [-100, 100]; rewards in [0, 1].
inline double normalize_score(double score) { return (score / 100.0 + 1.0) / 2.0; }

struct Evaluation {
  double score = 0.0;
  int failed_frames = 0;  // frames scored at the floor because IK did not converge
};

/// Scores a complete absolute plan of length K.
using PlanEvaluator = std::function<Evaluation(const KeyframePlan&)>;

struct SearchBackends {
  protocol::ProposerBackend* proposer = nullptr;
  PlanEvaluator evaluate;
  Keyframe initial;             // absolute pose the first delta is taken from
  std::string prompt_template;  // forwarded verbatim to the proposer
  protocol::ProposeOptions propose_options;
};

struct TreeStats {
  int iterations = 0;
  int nodes_expanded = 0;
  int duplicate_merges = 0;
  int rollouts = 0;           // simulate calls, cache hits included
  int simulations_run = 0;    // evaluator calls
  int cache_hits = 0;
  int terminal_visits = 0;
  int proposer_failures = 0;
  int ik_failed_frames = 0;
  int ik_flagged_rollouts = 0;
  std::string last_proposer_error;

  Json to_json() const;
};

struct SearchResult {
  KeyframePlan best_plan;
  double best_score = 0.0;
  TreeStats stats;
  std::unique_ptr<SearchNode> root;
};

/// Raised when no proposal ever succeeded.
class SearchFailed : public BackendError {
 public:
  SearchFailed(const std::string& what, TreeStats stats) : BackendError(what), stats_(std::move(stats)) {}
  const TreeStats& stats() const { return stats_; }

 private:
  TreeStats stats_;
};

struct Expansion {
  SearchNode* node = nullptr;
  KeyframePlan completion;  // full plan to simulate for this expansion
  bool merged = false;      // first segment duplicated an existing sibling
};

class KeyframeSearch {
 public:
  KeyframeSearch(std::string prompt, SearchConfig config, SearchBackends backends);

  /// Runs config.iterations rounds and returns the best complete rollout seen.
  SearchResult run();

  // Single steps, exposed for tests.
  void iterate();
  SearchNode& root() { return *root_; }
  const TreeStats& stats() const { return stats_; }
  /// Memoized evaluation of a complete plan.
  double simulate(const KeyframePlan& plan);
  /// Proposes a completion below `leaf`. The returned node holds its first
  /// segment and is an existing sibling when that segment is a duplicate; the
  /// sibling keeps its original stored completion.
  Expansion expand(SearchNode& leaf, const std::vector<SearchNode*>& path);

 private:
  std::string prompt_;
  SearchConfig config_;
  SearchBackends backends_;
  std::unique_ptr<SearchNode> root_;
  TreeStats stats_;
  std::unordered_map<std::uint64_t, Evaluation> cache_;
  std::optional<KeyframePlan> best_plan_;
  double best_score_ = 0.0;
};

/// Hash of a plan's frames, used as the rollout cache key.
std::uint64_t plan_hash(const KeyframePlan& plan);

/// Full tree: segments, N, W, Q per node, plus the normalization in use.
Json tree_to_json(const SearchNode& root, const SearchConfig& config, const TreeStats& stats);

}  // namespace kinoplan::search

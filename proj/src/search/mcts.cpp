#include "kinoplan/search/mcts.hpp"

#include <cmath>
#include <limits>

#include "kinoplan/core/hash.hpp"
#include "kinoplan/core/io.hpp"

namespace kinoplan::search {

void SearchConfig::validate() const {
  if (iterations < 1) throw ValidationError("search iterations must be >= 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("exploration alpha must be >= 0");
  if (segment_length < 1) throw ValidationError("segment length must be >= 1");
  if (target_length < 1) throw ValidationError("target length must be >= 1");
  if (max_children < 1) throw ValidationError("max children per node must be >= 1");
  if (!(duplicate_tolerance >= 0.0)) throw ValidationError("duplicate tolerance must be >= 0");
}

int SearchConfig::max_depth() const {
  const auto ks = static_cast<std::size_t>(segment_length);
  return static_cast<int>((target_length + ks - 1) / ks);
}

std::optional<double> SearchNode::q() const {
  if (visits == 0) return std::nullopt;
  return total_reward / visits;
}

bool SearchNode::fully_expanded(int max_children) const {
  return static_cast<int>(children.size()) >= max_children || expansion_attempts >= max_children;
}

double uct_value(const SearchNode& parent, const SearchNode& child, double alpha) {
  if (child.visits == 0) return std::numeric_limits<double>::infinity();
  const double n_parent = std::max(parent.visits, 1);
  return child.total_reward / child.visits + alpha * std::sqrt(2.0 * std::log(n_parent) / child.visits);
}

std::size_t best_uct_child(const SearchNode& node, double alpha) {
  if (node.children.empty()) throw ValidationError("node has no children");
  std::size_t best = 0;
  double best_value = uct_value(node, *node.children[0], alpha);
  for (std::size_t i = 1; i < node.children.size(); ++i) {
    const double v = uct_value(node, *node.children[i], alpha);
    if (v > best_value) {
      best = i;
      best_value = v;
    }
  }
  return best;
}

std::vector<SearchNode*> select_leaf(SearchNode& root, double alpha, int max_children) {
  std::vector<SearchNode*> path{&root};
  SearchNode* node = &root;
  while (!node->terminal && !node->children.empty()) {
    if (max_children > 0 && !node->fully_expanded(max_children)) break;
    node = node->children[best_uct_child(*node, alpha)].get();
    path.push_back(node);
  }
  return path;
}

void backpropagate(const std::vector<SearchNode*>& path, double reward) {
  if (path.empty()) return;
  const bool terminal = path.back()->terminal;
  for (SearchNode* node : path) {
    node->visits += 1;
    if (!terminal) node->total_reward += reward;
  }
}

std::uint64_t plan_hash(const KeyframePlan& plan) {
  Fnv1a h;
  for (const auto& key : plan.frames) {
    h.number(key.mode == KeyframeMode::absolute ? 0.0 : 1.0);
    for (const auto& p : key.positions) h.number(p.x()).number(p.y()).number(p.z());
  }
  return h.value();
}

Json TreeStats::to_json() const {
  return {{"iterations", iterations},
          {"nodes_expanded", nodes_expanded},
          {"duplicate_merges", duplicate_merges},
          {"rollouts", rollouts},
          {"simulations_run", simulations_run},
          {"cache_hits", cache_hits},
          {"terminal_visits", terminal_visits},
          {"proposer_failures", proposer_failures},
          {"ik_failed_frames", ik_failed_frames},
          {"ik_flagged_rollouts", ik_flagged_rollouts}};
}

KeyframeSearch::KeyframeSearch(std::string prompt, SearchConfig config, SearchBackends backends)
    : prompt_(std::move(prompt)), config_(config), backends_(std::move(backends)),
      root_(std::make_unique<SearchNode>()) {
  config_.validate();
  if (backends_.proposer == nullptr) throw ValidationError("search needs a proposer backend");
  if (!backends_.evaluate) throw ValidationError("search needs a plan evaluator");
  root_->terminal = config_.max_depth() == 0;
}

double KeyframeSearch::simulate(const KeyframePlan& plan) {
  if (plan.length() != config_.target_length) throw ValidationError("rollout plan has the wrong length");
  stats_.rollouts += 1;
  const auto key = plan_hash(plan);
  Evaluation eval;
  if (auto it = cache_.find(key); it != cache_.end()) {
    stats_.cache_hits += 1;
    eval = it->second;
  } else {
    eval = backends_.evaluate(plan);
    if (!std::isfinite(eval.score)) throw NumericalError("plan evaluator returned a non-finite score");
    cache_.emplace(key, eval);
    stats_.simulations_run += 1;
    stats_.ik_failed_frames += eval.failed_frames;
    if (eval.failed_frames > 0) stats_.ik_flagged_rollouts += 1;
  }
  if (!best_plan_ || eval.score > best_score_) {
    best_plan_ = plan;
    best_score_ = eval.score;
  }
  return eval.score;
}

Expansion KeyframeSearch::expand(SearchNode& leaf, const std::vector<SearchNode*>& path) {
  if (leaf.terminal) throw ValidationError("cannot expand a terminal node");
  protocol::ProposalRequest req;
  req.prompt = prompt_;
  req.prefix.prompt = prompt_;
  req.prefix.segment_length = config_.segment_length;
  for (const SearchNode* node : path)
    req.prefix.frames.insert(req.prefix.frames.end(), node->segment.begin(), node->segment.end());
  req.target_length = config_.target_length;
  req.segment_length = config_.segment_length;
  req.initial = backends_.initial;
  req.prompt_template = backends_.prompt_template;

  leaf.expansion_attempts += 1;
  const auto response = protocol::propose(*backends_.proposer, req, backends_.propose_options);

  KeyframePlan completion = req.prefix;
  completion.frames.insert(completion.frames.end(), response.completion.begin(), response.completion.end());

  const std::size_t begin = req.prefix.frames.size();
  const std::size_t end = std::min(config_.target_length, begin + static_cast<std::size_t>(config_.segment_length));
  std::vector<Keyframe> segment(completion.frames.begin() + static_cast<std::ptrdiff_t>(begin),
                                completion.frames.begin() + static_cast<std::ptrdiff_t>(end));

  for (auto& sibling : leaf.children) {
    double diff = 0.0;
    for (std::size_t i = 0; i < segment.size(); ++i)
      for (std::size_t j = 0; j < kKeyJointCount; ++j)
        diff = std::max(diff, (segment[i].positions[j] - sibling->segment[i].positions[j]).cwiseAbs().maxCoeff());
    if (diff <= config_.duplicate_tolerance) {
      stats_.duplicate_merges += 1;
      return {sibling.get(), std::move(completion), true};
    }
  }

  auto child = std::make_unique<SearchNode>();
  child->segment = std::move(segment);
  child->depth = leaf.depth + 1;
  child->terminal = child->depth >= config_.max_depth();
  child->completion = completion;
  leaf.children.push_back(std::move(child));
  stats_.nodes_expanded += 1;
  return {leaf.children.back().get(), std::move(completion), false};
}

void KeyframeSearch::iterate() {
  stats_.iterations += 1;
  auto path = select_leaf(*root_, config_.alpha, config_.max_children);
  SearchNode* leaf = path.back();
  if (leaf->terminal) {
    stats_.terminal_visits += 1;
    const double score = simulate(leaf->completion);
    backpropagate(path, normalize_score(score));
    return;
  }
  Expansion expansion;
  try {
    expansion = expand(*leaf, path);
  } catch (const ValidationError&) {
    throw;
  } catch (const BackendError& e) {
    stats_.proposer_failures += 1;
    stats_.last_proposer_error = e.what();
    return;
  }
  path.push_back(expansion.node);
  const double score = simulate(expansion.completion);
  backpropagate(path, normalize_score(score));
}

SearchResult KeyframeSearch::run() {
  for (int i = 0; i < config_.iterations; ++i) iterate();
  if (!best_plan_) {
    std::string msg = "keyframe search: every proposal failed (" + std::to_string(stats_.proposer_failures) +
                      " of " + std::to_string(stats_.iterations) + " iterations)";
    if (!stats_.last_proposer_error.empty()) msg += ": " + stats_.last_proposer_error;
    throw SearchFailed(msg, stats_);
  }
  SearchResult result;
  result.best_plan = *best_plan_;
  result.best_score = best_score_;
  result.stats = stats_;
  result.root = std::move(root_);
  root_ = std::make_unique<SearchNode>();
  return result;
}

namespace {

Json node_to_json(const SearchNode& node) {
  Json segment = Json::array();
  for (const auto& key : node.segment) segment.push_back(io::keyframe_to_json(key));
  Json children = Json::array();
  for (const auto& c : node.children) children.push_back(node_to_json(*c));
  const auto q = node.q();
  return {{"depth", node.depth},
          {"terminal", node.terminal},
          {"N", node.visits},
          {"W", node.total_reward},
          {"Q", q ? Json(*q) : Json(nullptr)},
          {"expansion_attempts", node.expansion_attempts},
          {"segment", segment},
          {"children", children}};
}

}  // namespace

Json tree_to_json(const SearchNode& root, const SearchConfig& config, const TreeStats& stats) {
  return {{"format", "kinoplan-tree"},
          {"version", 1},
          {"reward_normalization", "(score / 100 + 1) / 2"},
          {"config",
           {{"iterations", config.iterations},
            {"alpha", config.alpha},
            {"segment_length", config.segment_length},
            {"target_length", config.target_length},
            {"max_children", config.max_children},
            {"max_depth", config.max_depth()}}},
          {"stats", stats.to_json()},
          {"root", node_to_json(root)}};
}

}  // namespace kinoplan::search

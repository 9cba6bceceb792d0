#include <doctest.h>

#include <cstdlib>
#include <deque>

#include "kinoplan/core/error.hpp"
#include "kinoplan/core/io.hpp"
#include "kinoplan/core/kinematics.hpp"
#include "kinoplan/ik/prior.hpp"
#include "kinoplan/protocol/base64.hpp"
#include "kinoplan/protocol/http.hpp"
#include "kinoplan/protocol/stubs.hpp"

using namespace kinoplan;
using namespace kinoplan::protocol;

namespace {

const Skeleton& skel() {
  static const Skeleton s = Skeleton::standard();
  return s;
}

ProposalRequest request(std::size_t k, const std::string& prompt = "a person raises the right arm") {
  ProposalRequest req;
  req.prompt = prompt;
  req.target_length = k;
  req.segment_length = 2;
  req.initial = standing_keyframe(skel());
  req.prompt_template = "{prompt}";
  return req;
}

// Replays canned responses and records what it was asked.
class ScriptedProposer final : public ProposerBackend {
 public:
  explicit ScriptedProposer(std::deque<Json> replies) : replies_(std::move(replies)) {}
  Json propose(const Json& req) override {
    requests.push_back(req);
    Json r = replies_.front();
    if (replies_.size() > 1) replies_.pop_front();
    return r;
  }
  std::vector<Json> requests;

 private:
  std::deque<Json> replies_;
};

class ScriptedScorer final : public ScorerBackend {
 public:
  explicit ScriptedScorer(std::vector<double> values) : values_(std::move(values)) {}
  Json score(const Json&) override { return Json{{"scores", Json::array({values_[next_++ % values_.size()]})}}; }

 private:
  std::vector<double> values_;
  std::size_t next_ = 0;
};

// Scores by brightness, so different images get different scores.
class BrightnessScorer final : public ScorerBackend {
 public:
  Json score(const Json& req) override {
    const Image img = decode_image_field(req.at("images").at(0));
    double sum = 0.0;
    for (auto v : img.rgb) sum += v;
    return Json{{"scores", Json::array({100.0 * sum / (255.0 * static_cast<double>(img.rgb.size()))})}};
  }
};

Json keyframe_json(const Keyframe& k) {
  Json f;
  const char* names[] = {"pelvis", "l_wrist", "r_wrist", "l_ankle", "r_ankle"};
  for (std::size_t j = 0; j < kKeyJointCount; ++j) f[names[j]] = {k.positions[j].x(), k.positions[j].y(), k.positions[j].z()};
  return f;
}

Json absolute_completion(const std::vector<Keyframe>& frames) {
  Json fs = Json::array();
  for (const auto& k : frames) fs.push_back(keyframe_json(k));
  return Json{{"completion", {{"mode", "absolute"}, {"frames", fs}}}, {"rationale", "scripted"}};
}

std::vector<std::uint8_t> png_of(const Pose& p) { return encode_png(render_frame(skel(), p)); }

const std::filesystem::path fixtures = std::filesystem::path(KINOPLAN_FIXTURE_DIR) / "protocol";

Json fixture(const std::string& name) { return Json::parse(io::read_text(fixtures / name)); }

struct EnvGuard {
  EnvGuard(const char* n, const char* v) : name(n) {
    if (const char* old = std::getenv(n)) saved = old;
    if (v) setenv(n, v, 1); else unsetenv(n);
  }
  ~EnvGuard() {
    if (saved) setenv(name, saved->c_str(), 1); else unsetenv(name);
  }
  const char* name;
  std::optional<std::string> saved;
};

}  // namespace

TEST_SUITE("propose") {
  TEST_CASE("empty prefix returns the playbook's first frames") {
    PlaybookProposer proposer(skel());
    const auto req = request(4);
    const auto r = propose(proposer, req);
    const auto expected = playbook_keyframes(skel(), select_playbook(req.prompt), 4);
    REQUIRE(r.completion.size() == 4);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < kKeyJointCount; ++j)
        CHECK((r.completion[i].positions[j] - expected[i].positions[j]).norm() < 1e-12);
    for (const auto& k : r.completion) CHECK(k.mode == KeyframeMode::absolute);
  }

  TEST_CASE("prefix of two fills to K") {
    PlaybookProposer proposer(skel());
    auto req = request(4);
    const auto first = propose(proposer, req);
    req.prefix.frames.assign(first.completion.begin(), first.completion.begin() + 2);
    const auto r = propose(proposer, req);
    CHECK(r.completion.size() == 2);
  }

  TEST_CASE("playbook selection by keyword") {
    CHECK(select_playbook("someone squats low") == Playbook::squat);
    CHECK(select_playbook("raise both hands") == Playbook::raise_arm);
    CHECK(select_playbook("take a step forward") == Playbook::step);
    CHECK(select_playbook("xyzzy") == select_playbook("xyzzy"));
  }

  TEST_CASE("playbook poses are valid") {
    for (Playbook p : {Playbook::stand, Playbook::raise_arm, Playbook::squat, Playbook::step}) {
      for (const auto& pose : playbook_poses(skel(), p, 6)) CHECK_NOTHROW(check_pose(skel(), pose));
      CHECK(playbook_keyframes(skel(), p, 6).size() == 6);
    }
  }

  TEST_CASE("seeded noise is reproducible") {
    PlaybookProposer a(skel(), 9, 0.05), b(skel(), 9, 0.05), c(skel(), 10, 0.05);
    const Json ra = a.propose(proposal_request_json(request(3), 1, std::nullopt));
    CHECK(ra == b.propose(proposal_request_json(request(3), 1, std::nullopt)));
    CHECK(ra != c.propose(proposal_request_json(request(3), 1, std::nullopt)));
  }

  TEST_CASE("four-joint frames fail after all retries") {
    PlaybookProposer real(skel());
    Json bad = real.propose(proposal_request_json(request(2), 1, std::nullopt));
    bad["completion"]["frames"][0].erase("r_ankle");
    ScriptedProposer scripted(std::deque<Json>{bad});
    CHECK_THROWS_AS(propose(scripted, request(2)), SchemaError);
    CHECK(scripted.requests.size() == 3);
    CHECK(scripted.requests[2].at("attempt") == 3);
    CHECK(scripted.requests[1].at("feedback").get<std::string>().find("5 key joints") != std::string::npos);
  }

  TEST_CASE("a retry can recover") {
    const auto good = absolute_completion({standing_keyframe(skel()), standing_keyframe(skel())});
    ScriptedProposer scripted(std::deque<Json>{Json{{"rationale", "oops"}}, good});
    const auto r = propose(scripted, request(2));
    CHECK(r.completion.size() == 2);
    CHECK(r.rationale == "scripted");
    CHECK(scripted.requests.size() == 2);
    CHECK(scripted.requests[0].at("feedback").is_null());
  }

  TEST_CASE("wrong completion length is a schema error") {
    ScriptedProposer scripted(std::deque<Json>{absolute_completion({standing_keyframe(skel())})});
    CHECK_THROWS_AS(propose(scripted, request(2)), SchemaError);
  }

  TEST_CASE("workspace bound") {
    Keyframe far = standing_keyframe(skel());
    far[KeyJoint::pelvis].x() = 5.5;
    const auto reply = absolute_completion({far});
    CHECK_THROWS_AS(parse_proposal_response(reply, request(1)), SchemaError);
    ProposeOptions wide;
    wide.workspace_bound = 6.0;
    CHECK_NOTHROW(parse_proposal_response(reply, request(1), wide));
  }

  TEST_CASE("delta completions are relative to the last known frame") {
    Json fs = Json::array();
    Keyframe step;
    step.mode = KeyframeMode::delta;
    step[KeyJoint::pelvis] = Vec3(0.1, 0.0, 0.0);
    fs.push_back(keyframe_json(step));
    fs.push_back(keyframe_json(step));
    const Json reply{{"completion", {{"mode", "delta"}, {"frames", fs}}}};
    const auto r = parse_proposal_response(reply, request(2));
    const Vec3 start = standing_keyframe(skel())[KeyJoint::pelvis];
    CHECK((r.completion[1][KeyJoint::pelvis] - start - Vec3(0.2, 0, 0)).norm() < 1e-12);
  }

  TEST_CASE("request validation") {
    PlaybookProposer proposer(skel());
    auto req = request(1);
    req.prefix.frames.assign(2, standing_keyframe(skel()));
    CHECK_THROWS_AS(propose(proposer, req), ValidationError);
  }
}

TEST_SUITE("score") {
  TEST_CASE("constant scorer mean") {
    ConstantScorer s(50.0);
    const auto png = png_of(standing_pose(skel()));
    CHECK(score_frames(s, "x", {png, png, png}) == 50.0);
  }

  TEST_CASE("mean of two scripted scores") {
    ScriptedScorer s({0.0, 100.0});
    const auto png = png_of(standing_pose(skel()));
    CHECK(score_frames(s, "x", {png, png}) == 50.0);
  }

  TEST_CASE("identical embeddings score 100") {
    EmbeddingScorer s;
    CHECK(score_frames(s, "anything", {png_of(standing_pose(skel()))}) == doctest::Approx(100.0).epsilon(1e-12));
  }

  TEST_CASE("order changes per-frame scores but not the mean") {
    BrightnessScorer s;
    Pose lifted = standing_pose(skel());
    lifted.root_translation.y() += 0.4;
    Pose shifted = standing_pose(skel());
    shifted.root_translation.x() += 0.6;
    shifted.body_rotations[15] = Vec3(0, 0, 1.2);
    const std::vector<std::vector<std::uint8_t>> ab = {png_of(lifted), png_of(shifted), png_of(standing_pose(skel()))};
    const std::vector<std::vector<std::uint8_t>> ba = {ab[2], ab[0], ab[1]};
    const auto e1 = score_each(s, "x", ab);
    const auto e2 = score_each(s, "x", ba);
    CHECK(e1 != e2);
    CHECK(score_frames(s, "x", ab) == doctest::Approx(score_frames(s, "x", ba)).epsilon(1e-14));
  }

  TEST_CASE("template scorer ranks the matching pose highest") {
    TemplateScorer s(skel());
    const std::string prompt = "a person squats down";
    const auto poses = playbook_poses(skel(), Playbook::squat, 8);
    const double exact = s.score_image(prompt, render_frame(skel(), poses[3]));
    CHECK(exact == doctest::Approx(100.0).epsilon(1e-9));
    Image blank = render_frame(skel(), poses[3]);
    std::fill(blank.rgb.begin(), blank.rgb.end(), 255);
    CHECK(s.score_image(prompt, blank) < 10.0);
    Pose other = standing_pose(skel());
    other.body_rotations[15] = Vec3(0, 0, 1.5);
    const double mismatch = s.score_image(prompt, render_frame(skel(), other));
    CHECK(mismatch < exact);
    CHECK(mismatch >= 0.0);
  }

  TEST_CASE("response validation") {
    CHECK(parse_score_response(Json{{"scores", {12.5}}}) == 12.5);
    CHECK_THROWS_AS(parse_score_response(Json{{"scores", {150.0}}}), SchemaError);
    CHECK_THROWS_AS(parse_score_response(Json{{"scores", {1.0, 2.0}}}), SchemaError);
    CHECK_THROWS_AS(parse_score_response(Json{{"score", 1.0}}), SchemaError);
    ConstantScorer s(1.0);
    CHECK_THROWS_AS(score_frames(s, "x", {}), ValidationError);
  }
}

TEST_SUITE("judge") {
  TEST_CASE("fixed judge weights four and two") {
    FixedJudge j(4.0, 2.0);
    const auto r = judge_motion(j, "x", {png_of(standing_pose(skel()))});
    CHECK(r.weighted == doctest::Approx(3.2).epsilon(1e-12));
    CHECK(r.semantic == 4.0);
    CHECK(r.naturalness == 2.0);
  }

  TEST_CASE("repeats of a deterministic judge") {
    FixedJudge j(3.3, 1.7);
    const auto png = png_of(standing_pose(skel()));
    CHECK(judge_motion(j, "x", {png}, {}, 10).weighted == doctest::Approx(judge_motion(j, "x", {png}, {}, 1).weighted).epsilon(1e-14));
  }

  TEST_CASE("equal axes give the shared score for any convex weights") {
    const auto png = png_of(standing_pose(skel()));
    for (double ws : {0.0, 0.25, 0.6, 1.0}) {
      FixedJudge j(2.5, 2.5);
      CHECK(judge_motion(j, "x", {png}, JudgeWeights{ws, 1.0 - ws}, 2).weighted == doctest::Approx(2.5).epsilon(1e-14));
    }
  }

  TEST_CASE("response validation") {
    const JudgeWeights w;
    CHECK_NOTHROW(parse_judge_response(Json{{"semantic", 4.0}, {"naturalness", 2.0}, {"weighted", 3.2}}, w));
    CHECK_THROWS_AS(parse_judge_response(Json{{"semantic", 4.0}, {"naturalness", 2.0}, {"weighted", 3.3}}, w), SchemaError);
    CHECK_THROWS_AS(parse_judge_response(Json{{"semantic", 6.0}, {"naturalness", 2.0}, {"weighted", 4.4}}, w), SchemaError);
    FixedJudge j(1, 1);
    CHECK_THROWS_AS(judge_motion(j, "x", {png_of(standing_pose(skel()))}, w, 0), ValidationError);
  }
}

TEST_SUITE("base64") {
  TEST_CASE("round trip") {
    std::mt19937_64 rng(70);
    for (std::size_t n = 0; n < 40; ++n) {
      std::vector<std::uint8_t> bytes(n);
      for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
      CHECK(base64_decode(base64_encode(bytes)) == bytes);
    }
    CHECK(base64_encode({'M', 'a', 'n'}) == "TWFu");
    CHECK_THROWS_AS(base64_decode("@@@@"), SchemaError);
  }
}

TEST_SUITE("urls") {
  TEST_CASE("flag beats environment") {
    EnvGuard g(kScorerUrlEnv, "http://env:1");
    CHECK(env_url(kScorerUrlEnv) == "http://env:1");
    CHECK(resolve_url(std::string("http://flag:2"), kScorerUrlEnv) == "http://flag:2");
    CHECK(resolve_url(std::nullopt, kScorerUrlEnv) == "http://env:1");
  }

  TEST_CASE("empty or missing environment is unset") {
    {
      EnvGuard g(kJudgeUrlEnv, "");
      CHECK_FALSE(env_url(kJudgeUrlEnv).has_value());
    }
    EnvGuard g(kProposerUrlEnv, nullptr);
    CHECK_FALSE(resolve_url(std::nullopt, kProposerUrlEnv).has_value());
  }
}

TEST_SUITE("http") {
  TEST_CASE("stub server round trips match in-process results") {
    PlaybookProposer p_local(skel(), 3, 0.02), p_served(skel(), 3, 0.02);
    TemplateScorer scorer(skel());
    FixedJudge judge(4.0, 2.0);
    const auto samples = ik::synthetic_pose_samples(skel(), 300, 5);
    Eigen::MatrixXd rows(300, 69);
    for (int i = 0; i < 300; ++i) rows.row(i) = samples[static_cast<std::size_t>(i)].to_vector().transpose();
    const auto prior = ik::AffinePrior::fit(rows, 32);
    StubServer server(&p_served, &scorer, &judge, &prior);
    CHECK(server.port() > 0);

    HttpProposer hp(server.url());
    const auto req = request(4, "a person squats down");
    const auto a = propose(p_local, req);
    const auto b = propose(hp, req);
    REQUIRE(a.completion.size() == b.completion.size());
    for (std::size_t i = 0; i < a.completion.size(); ++i) CHECK(a.completion[i] == b.completion[i]);

    HttpScorer hs(server.url());
    const auto png = png_of(playbook_poses(skel(), Playbook::squat, 8)[2]);
    CHECK(score_frames(hs, req.prompt, {png}) == score_frames(scorer, req.prompt, {png}));

    HttpJudge hj(server.url());
    CHECK(judge_motion(hj, req.prompt, {png}, {}, 2).weighted == doctest::Approx(3.2).epsilon(1e-12));

    protocol::HttpPrior remote(server.url(), 32, 69);
    const Eigen::VectorXd z = prior.sample_latent(2);
    CHECK((remote.decode(z) - prior.decode(z)).cwiseAbs().maxCoeff() == 0.0);
    CHECK_FALSE(remote.decode_jacobian(z).has_value());
  }

  TEST_CASE("error statuses become BackendError") {
    ConstantScorer scorer(1.0);
    StubServer server(nullptr, &scorer, nullptr);
    const HttpJsonClient client(server.url());
    CHECK_THROWS_AS(client.post("/propose", Json::object()), BackendError);       // 404
    CHECK_THROWS_AS(client.post("/score", Json{{"prompt", "x"}}), BackendError);   // 422
    HttpJudge judge(server.url());
    CHECK_THROWS_AS(judge_motion(judge, "x", {png_of(standing_pose(skel()))}), BackendError);
  }

  TEST_CASE("transport failure is a BackendError, not retried as a schema error") {
    HttpProposer dead("http://127.0.0.1:1", 1.0);
    CHECK_THROWS_AS(propose(dead, request(2)), BackendError);
  }

  TEST_CASE("malformed url") {
    CHECK_THROWS_AS(HttpJsonClient("not a url"), ValidationError);
  }
}

TEST_SUITE("fixtures") {
  TEST_CASE("recorded responses parse") {
    auto req = request(4);
    req.prompt_template = "Plan {remaining} keyframes for \"{prompt}\".";
    CHECK(parse_proposal_response(fixture("propose.response.json"), req).completion.size() == 4);
    CHECK(std::isfinite(parse_score_response(fixture("score.response.json"))));
    CHECK(parse_judge_response(fixture("judge.response.json"), {}).weighted == doctest::Approx(3.2));
    CHECK(fixture("decode.response.json").at("pose").size() == 69);
  }

  TEST_CASE("recorded requests are what the builders produce") {
    auto req = request(4);
    req.prompt_template = "Plan {remaining} keyframes for \"{prompt}\".";
    CHECK(proposal_request_json(req, 1, std::nullopt) == fixture("propose.request.json"));
    CHECK(fixture("score.request.json").at("prompt") == req.prompt);
    CHECK_NOTHROW(decode_image_field(fixture("score.request.json").at("images").at(0)));
  }

  TEST_CASE("invalid responses are rejected by the client") {
    auto req = request(4);
    CHECK_THROWS_AS(parse_proposal_response(fixture("invalid/propose.response.four_joints.json"), req), SchemaError);
    CHECK_THROWS_AS(parse_proposal_response(fixture("invalid/propose.response.bad_mode.json"), req), SchemaError);
    CHECK_THROWS_AS(parse_proposal_response(fixture("invalid/propose.response.no_completion.json"), req), SchemaError);
    CHECK_THROWS_AS(parse_score_response(fixture("invalid/score.response.out_of_range.json")), SchemaError);
    CHECK_THROWS_AS(parse_score_response(fixture("invalid/score.response.two_scores.json")), SchemaError);
    CHECK_THROWS_AS(parse_judge_response(fixture("invalid/judge.response.out_of_range.json"), {}), SchemaError);
    CHECK_THROWS_AS(parse_judge_response(fixture("invalid/judge.response.missing_weighted.json"), {}), SchemaError);
  }

  TEST_CASE("servers reject invalid requests") {
    ConstantScorer scorer(1.0);
    CHECK_THROWS_AS(scorer.score(fixture("invalid/score.request.missing_prompt.json")), SchemaError);
  }
}

#include "kinoplan/protocol/stubs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kinoplan/core/error.hpp"
#include "kinoplan/core/hash.hpp"
#include "kinoplan/core/io.hpp"
#include "kinoplan/core/kinematics.hpp"
#include "kinoplan/physics/physics.hpp"
#include "kinoplan/protocol/base64.hpp"

namespace kinoplan::protocol {

namespace {

struct Keyword {
  const char* word;
  Playbook playbook;
};

constexpr Keyword kKeywords[] = {
    {"raise", Playbook::raise_arm}, {"wave", Playbook::raise_arm},  {"arm", Playbook::raise_arm},
    {"hand", Playbook::raise_arm},  {"squat", Playbook::squat},     {"crouch", Playbook::squat},
    {"sit", Playbook::squat},       {"kneel", Playbook::squat},     {"step", Playbook::step},
    {"walk", Playbook::step},       {"forward", Playbook::step},    {"stand", Playbook::stand},
    {"idle", Playbook::stand},      {"still", Playbook::stand}};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

Pose template_pose(const Skeleton& skeleton, Playbook playbook, double s, std::size_t frame) {
  Pose p = Pose::zero(skeleton);
  auto rot = [&](const char* name) -> Vec3& { return p.body_rotations[skeleton.index_of(name) - 1]; };
  switch (playbook) {
    case Playbook::stand:
      rot("left_shoulder").z() = -1.2 * s;
      rot("right_shoulder").z() = 1.2 * s;
      break;
    case Playbook::raise_arm:
      rot("right_shoulder").z() = -1.3 * s;
      rot("right_elbow").y() = 0.3 * s;
      rot("left_shoulder").z() = -1.2 * s;
      break;
    case Playbook::squat:
      for (const char* side : {"left", "right"}) {
        const std::string n(side);
        rot((n + "_hip").c_str()).x() = -1.0 * s;
        rot((n + "_knee").c_str()).x() = 1.8 * s;
        rot((n + "_ankle").c_str()).x() = -0.8 * s;
      }
      rot("spine1").x() = 0.3 * s;
      rot("left_shoulder").y() = -1.2 * s;
      rot("right_shoulder").y() = 1.2 * s;
      break;
    case Playbook::step: {
      const double phase = std::sin(std::numbers::pi * 0.5 * static_cast<double>(frame + 1));
      rot("left_hip").x() = -0.4 * phase;
      rot("right_hip").x() = 0.4 * phase;
      rot("left_knee").x() = 0.3 * std::max(0.0, phase);
      rot("right_knee").x() = 0.3 * std::max(0.0, -phase);
      rot("left_shoulder").z() = -1.2;
      rot("right_shoulder").z() = 1.2;
      p.root_translation.z() = 0.15 * static_cast<double>(frame + 1);
      break;
    }
  }
  const auto proxy = physics::SurfaceProxy::standard(skeleton);
  p.root_translation.y() -= physics::lowest_point(skeleton, p, proxy);
  return p;
}

std::vector<float> blurred_gray(const Image& img, int radius) {
  const int w = img.width, h = img.height;
  std::vector<float> gray(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto* px = img.pixel(x, y);
      gray[static_cast<std::size_t>(y) * w + x] = static_cast<float>((px[0] + px[1] + px[2]) / (3.0 * 255.0));
    }
  if (radius <= 0) return gray;
  // separable box blur with clamped borders
  std::vector<float> tmp(gray.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float sum = 0.0f;
      for (int d = -radius; d <= radius; ++d) sum += gray[static_cast<std::size_t>(y) * w + std::clamp(x + d, 0, w - 1)];
      tmp[static_cast<std::size_t>(y) * w + x] = sum / static_cast<float>(2 * radius + 1);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float sum = 0.0f;
      for (int d = -radius; d <= radius; ++d) sum += tmp[static_cast<std::size_t>(std::clamp(y + d, 0, h - 1)) * w + x];
      gray[static_cast<std::size_t>(y) * w + x] = sum / static_cast<float>(2 * radius + 1);
    }
  return gray;
}

double mse(const std::vector<float>& a, const std::vector<float>& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    total += d * d;
  }
  return total / static_cast<double>(a.size());
}

std::string request_prompt(const Json& request) {
  if (!request.is_object() || !request.contains("prompt") || !request.at("prompt").is_string())
    throw SchemaError("request needs a string 'prompt'");
  return request.at("prompt").get<std::string>();
}

const Json& request_images(const Json& request, const char* key) {
  if (!request.contains(key) || !request.at(key).is_array() || request.at(key).empty())
    throw SchemaError(std::string("request needs a non-empty '") + key + "' array");
  return request.at(key);
}

Json scores_json(const std::vector<double>& scores) { return {{"scores", scores}}; }

}  // namespace

std::string_view playbook_name(Playbook playbook) {
  switch (playbook) {
    case Playbook::stand: return "stand";
    case Playbook::raise_arm: return "raise_arm";
    case Playbook::squat: return "squat";
    case Playbook::step: return "step";
  }
  return "stand";
}

Playbook select_playbook(const std::string& prompt) {
  const std::string text = lower(prompt);
  for (const auto& k : kKeywords)
    if (text.find(k.word) != std::string::npos) return k.playbook;
  return static_cast<Playbook>(fnv1a(text) % 4);
}

std::vector<Pose> playbook_poses(const Skeleton& skeleton, Playbook playbook, std::size_t length) {
  if (!skeleton.is_standard()) throw ValidationError("playbooks need the standard skeleton");
  std::vector<Pose> out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i)
    out.push_back(template_pose(skeleton, playbook, static_cast<double>(i + 1) / static_cast<double>(length), i));
  return out;
}

std::vector<Keyframe> playbook_keyframes(const Skeleton& skeleton, Playbook playbook, std::size_t length) {
  std::vector<Keyframe> out;
  for (const auto& p : playbook_poses(skeleton, playbook, length)) out.push_back(extract_key_positions(skeleton, p));
  return out;
}

PlaybookProposer::PlaybookProposer(Skeleton skeleton, std::uint64_t seed, double noise)
    : skeleton_(std::move(skeleton)), noise_(noise), rng_(seed) {
  if (!(noise >= 0.0)) throw ValidationError("proposer noise must be >= 0");
}

Json PlaybookProposer::propose(const Json& request) {
  const std::string prompt = request_prompt(request);
  std::size_t target = 0, prefix = 0;
  try {
    target = request.at("target_length").get<std::size_t>();
    prefix = request.at("prefix").at("frames").size();
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("propose request: ") + e.what());
  }
  if (prefix > target) throw SchemaError("prefix longer than target length");

  const Playbook playbook = select_playbook(prompt);
  const auto frames = playbook_keyframes(skeleton_, playbook, target);
  const Keyframe start = standing_keyframe(skeleton_);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::lock_guard lock(mutex_);
  Json out = Json::array();
  for (std::size_t i = prefix; i < target; ++i) {
    const Keyframe& before = i == 0 ? start : frames[i - 1];
    Keyframe delta;
    delta.mode = KeyframeMode::delta;
    for (std::size_t k = 0; k < kKeyJointCount; ++k) {
      delta.positions[k] = frames[i].positions[k] - before.positions[k];
      if (noise_ > 0.0)
        for (int c = 0; c < 3; ++c) delta.positions[k][c] += noise_ * normal(rng_);
    }
    out.push_back(io::keyframe_to_json(delta));
  }
  return {{"completion", {{"mode", "delta"}, {"frames", out}}},
          {"rationale", "playbook " + std::string(playbook_name(playbook))}};
}

Json ConstantScorer::score(const Json& request) {
  request_prompt(request);
  return scores_json(std::vector<double>(request_images(request, "images").size(), value_));
}

TemplateScorer::TemplateScorer(Skeleton skeleton, OrthoCamera camera, std::size_t template_frames, int blur_radius)
    : skeleton_(std::move(skeleton)), camera_(camera), template_frames_(template_frames), blur_radius_(blur_radius) {
  if (template_frames_ < 1) throw ValidationError("template scorer needs at least one frame");
  const Image blank = render_frame(skeleton_, standing_pose(skeleton_, 0.0, 1e3), camera_);  // figure off-canvas
  const auto blank_gray = blurred_gray(blank, blur_radius_);
  for (auto pb : {Playbook::stand, Playbook::raise_arm, Playbook::squat, Playbook::step}) {
    Target t;
    double ref = 0.0;
    for (const auto& pose : playbook_poses(skeleton_, pb, template_frames_)) {
      t.frames.push_back(blurred_gray(render_frame(skeleton_, pose, camera_), blur_radius_));
      ref += mse(t.frames.back(), blank_gray);
    }
    t.mse_ref = ref / static_cast<double>(t.frames.size());
    targets_.push_back(std::move(t));
  }
}

const TemplateScorer::Target& TemplateScorer::target(Playbook playbook) const {
  return targets_[static_cast<std::size_t>(playbook)];
}

double TemplateScorer::score_image(const std::string& prompt, const Image& image) const {
  const Target& t = target(select_playbook(prompt));
  if (image.width != camera_.width || image.height != camera_.height)
    throw SchemaError("image size does not match the scorer's camera");
  const auto gray = blurred_gray(image, blur_radius_);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : t.frames) best = std::min(best, mse(gray, f));
  return std::clamp(100.0 * (1.0 - best / t.mse_ref), 0.0, kScoreMax);
}

Json TemplateScorer::score(const Json& request) {
  const std::string prompt = request_prompt(request);
  std::vector<double> scores;
  for (const auto& img : request_images(request, "images")) scores.push_back(score_image(prompt, decode_image_field(img)));
  return scores_json(scores);
}

EmbeddingScorer::EmbeddingScorer(TextEmbedder text, ImageEmbedder image)
    : text_(std::move(text)), image_(std::move(image)) {
  if (!text_) text_ = [](const std::string&) { return std::vector<double>{1.0, 0.0}; };
  if (!image_) image_ = [](const Image&) { return std::vector<double>{1.0, 0.0}; };
}

Json EmbeddingScorer::score(const Json& request) {
  const auto t = text_(request_prompt(request));
  std::vector<double> scores;
  for (const auto& img : request_images(request, "images")) {
    const auto v = image_(decode_image_field(img));
    if (v.size() != t.size()) throw SchemaError("text and image embeddings differ in size");
    double dot = 0.0, nt = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      dot += t[i] * v[i];
      nt += t[i] * t[i];
      nv += v[i] * v[i];
    }
    if (!(nt > 0.0) || !(nv > 0.0)) throw SchemaError("zero embedding");
    scores.push_back(std::clamp(100.0 * dot / std::sqrt(nt * nv), kScoreMin, kScoreMax));
  }
  return scores_json(scores);
}

Json FixedJudge::judge(const Json& request) {
  request_prompt(request);
  request_images(request, "frames");
  double ws = 0.6, wn = 0.4;
  try {
    ws = request.at("weights").at("semantic").get<double>();
    wn = request.at("weights").at("naturalness").get<double>();
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("judge request: ") + e.what());
  }
  return {{"semantic", semantic_}, {"naturalness", naturalness_}, {"weighted", ws * semantic_ + wn * naturalness_}};
}

Image decode_image_field(const Json& value) {
  if (!value.is_string()) throw SchemaError("image must be a base64 string");
  try {
    return decode_png(base64_decode(value.get<std::string>()));
  } catch (const FormatError& e) {
    throw SchemaError(std::string("image is not a PNG: ") + e.what());
  }
}

}  // namespace kinoplan::protocol

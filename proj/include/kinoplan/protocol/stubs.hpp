#pragma once

// Deterministic in-process backends. They speak the same JSON as the HTTP
// services, so every client-side check applies to them too.

#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "kinoplan/core/render.hpp"
#include "kinoplan/protocol/client.hpp"

namespace kinoplan::protocol {

enum class Playbook { stand, raise_arm, squat, step };

std::string_view playbook_name(Playbook playbook);
/// Keyword match on the prompt ("raise", "squat", "step", ...), otherwise a
/// hash of the prompt picks one.
Playbook select_playbook(const std::string& prompt);

/// Template poses for frames 1..length of a playbook, starting from the
/// standing pose; each is lifted so its lowest surface point touches y = 0.
std::vector<Pose> playbook_poses(const Skeleton& skeleton, Playbook playbook, std::size_t length);
std::vector<Keyframe> playbook_keyframes(const Skeleton& skeleton, Playbook playbook, std::size_t length);

/// Continues the playbook from the end of the prefix in delta mode. With
/// noise > 0 every coordinate gets seeded Gaussian jitter (meters).
class PlaybookProposer final : public ProposerBackend {
 public:
  PlaybookProposer(Skeleton skeleton, std::uint64_t seed = 0, double noise = 0.0);
  Json propose(const Json& request) override;

 private:
  Skeleton skeleton_;
  double noise_;
  std::mutex mutex_;
  std::mt19937_64 rng_;
};

class ConstantScorer final : public ScorerBackend {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  Json score(const Json& request) override;

 private:
  double value_;
};

/// 100 * (1 - mse / mse_ref), floored at 0, against the closest frame of the
/// prompt's playbook rendered with the same camera. mse is taken over
/// box-blurred gray levels; mse_ref is the mean mse of an empty canvas, so a
/// blank frame scores about 0 and an exact template frame scores 100.
class TemplateScorer final : public ScorerBackend {
 public:
  TemplateScorer(Skeleton skeleton, OrthoCamera camera = {}, std::size_t template_frames = 8, int blur_radius = 3);
  Json score(const Json& request) override;

  double score_image(const std::string& prompt, const Image& image) const;

 private:
  struct Target {
    std::vector<std::vector<float>> frames;
    double mse_ref = 1.0;
  };
  const Target& target(Playbook playbook) const;

  Skeleton skeleton_;
  OrthoCamera camera_;
  std::size_t template_frames_;
  int blur_radius_;
  std::vector<Target> targets_;
};

/// 100 * cosine(text embedding, image embedding).
class EmbeddingScorer final : public ScorerBackend {
 public:
  using TextEmbedder = std::function<std::vector<double>(const std::string&)>;
  using ImageEmbedder = std::function<std::vector<double>(const Image&)>;

  /// Defaults embed everything as the same unit vector.
  EmbeddingScorer(TextEmbedder text = {}, ImageEmbedder image = {});
  Json score(const Json& request) override;

 private:
  TextEmbedder text_;
  ImageEmbedder image_;
};

class FixedJudge final : public JudgeBackend {
 public:
  FixedJudge(double semantic, double naturalness) : semantic_(semantic), naturalness_(naturalness) {}
  Json judge(const Json& request) override;

 private:
  double semantic_;
  double naturalness_;
};

/// Base64 PNG field of a request decoded to an image; SchemaError on failure.
Image decode_image_field(const Json& value);

}  // namespace kinoplan::protocol

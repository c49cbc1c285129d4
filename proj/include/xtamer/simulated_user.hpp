#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "xtamer/emotion.hpp"
#include "xtamer/expression.hpp"
#include "xtamer/face_synth.hpp"
#include "xtamer/rng.hpp"

namespace xtamer {

using ConfusionMatrix = std::array<std::array<double, kEmotionCount>, kEmotionCount>;

ConfusionMatrix uniform_confusion();

/// Stand-in for a human trainer. `confusion[i][j]` is the probability of
/// re-enacting emotion j when a mimic of expression i goes wrong.
struct UserProfile {
  static constexpr int kFormatVersion = 1;

  IdentityParams identity = IdentityParams::canonical();
  double mimic_accuracy = 1.0;
  ConfusionMatrix confusion = uniform_confusion();
  double expression_noise = 0.05;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument on bad accuracy, noise, or confusion rows.
  void validate() const;

  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

nlohmann::json profile_to_json(const UserProfile& profile);

/// Accepts a full document or a partial one ("identity": {"seed": n} draws
/// identity geometry from that seed). Throws ParseError on bad fields.
UserProfile profile_from_json(const nlohmann::json& doc);

void save_profile(const std::filesystem::path& path, const UserProfile& profile);
UserProfile load_profile(const std::filesystem::path& path);

class SimulatedUser {
 public:
  explicit SimulatedUser(UserProfile profile);

  FaceImage present_emotion(Emotion emotion);

  /// Emotion the user re-enacts for `robot_action` (consumes randomness).
  Emotion sample_mimic_emotion(const ExpressionAction& robot_action);

  /// Throws std::invalid_argument for non-catalog actions.
  FaceImage mimic_action(const ExpressionAction& robot_action);

  const UserProfile& profile() const noexcept { return profile_; }
  Rng& rng() noexcept { return rng_; }
  const Rng& rng() const noexcept { return rng_; }

 private:
  UserProfile profile_;
  Rng rng_;
};

}  // namespace xtamer

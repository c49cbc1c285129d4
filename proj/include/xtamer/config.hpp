#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "xtamer/reward_channel.hpp"
#include "xtamer/simulated_user.hpp"
#include "xtamer/som.hpp"
#include "xtamer/tamer.hpp"

namespace xtamer {

enum class UserSource { simulated, interactive };

/// Learner defaults for sessions: the reward model's own defaults plus
/// epsilon-greedy exploration at 0.3.
inline RewardModelOptions default_session_learner() {
  RewardModelOptions o;
  o.epsilon = 0.3;
  return o;
}

/// Everything a session needs. Serialized as JSON; every key is optional
/// and falls back to the defaults below.
///
///   seed                    master seed for all derived streams
///   calibration_samples     presentations per emotion before training
///   interactions_per_epoch  interactions averaged into one epoch summary
///   epochs                  epochs to run in `simulate`
///   evaluation_samples      held-out stimuli per emotion after training
///   reward_timeout_s        interactive reward deadline; late rewards discard the turn
///   reward                  {"mode": "mimicry"|"direct", "thresholds": [t1, t2, t3, t4]}
///   learner                 {"hidden_units", "learning_rate", "epsilon", "state_init_scale",
///                            "action_init_scale", "zero_output_layer", "initial_prediction",
///                            "action_features": "one_hot"|"led_bits"}
///   som                     {"rows", "cols", "iterations", "learning_rate0", "radius0"}
///   user                    {"source": "simulated"|"interactive", "profile": <path>}
///   profile                 inline profile document (overrides user.profile)
///   cnn_model               path to a pretrained CNN checkpoint
///   som_model               optional path to a SOM checkpoint (skips calibration)
struct SessionConfig {
  std::uint64_t seed = 1;
  int calibration_samples = 10;
  int interactions_per_epoch = 100;
  int epochs = 10;
  int evaluation_samples = 50;
  double reward_timeout_s = 120.0;
  RewardConfig reward;
  RewardModelOptions learner = default_session_learner();
  SomOptions som;
  UserSource user_source = UserSource::simulated;
  std::optional<std::string> profile_path;
  std::optional<UserProfile> profile;
  std::optional<std::string> cnn_model;
  std::optional<std::string> som_model;

  /// Throws std::invalid_argument naming the offending key.
  void validate() const;
};

SessionConfig default_config();

nlohmann::json config_to_json(const SessionConfig& config);

/// Applies the keys present in `doc` on top of `base`.
SessionConfig config_from_json(const nlohmann::json& doc, SessionConfig base = default_config());

SessionConfig load_config(const std::filesystem::path& path);

/// Resolves the simulated user: inline profile, then profile file, then a
/// perfect-mimic default with the canonical identity.
UserProfile resolve_profile(const SessionConfig& config);

}  // namespace xtamer

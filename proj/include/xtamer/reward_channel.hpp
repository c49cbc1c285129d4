#pragma once

#include "xtamer/cnn.hpp"
#include "xtamer/face_synth.hpp"
#include "xtamer/som.hpp"

namespace xtamer {

enum class RewardMode { mimicry, direct };

/// Distance cut points for the five reward levels:
/// d < t1 -> +2, d < t2 -> +1, d < t3 -> 0, d < t4 -> -1, otherwise -2.
struct RewardConfig {
  double t1 = 0.10;
  double t2 = 0.30;
  double t3 = 0.55;
  double t4 = 0.80;
  RewardMode mode = RewardMode::mimicry;

  /// Thresholds must be strictly increasing inside (0, 1).
  void validate() const;

  friend bool operator==(const RewardConfig&, const RewardConfig&) = default;
};

/// Throws std::invalid_argument when d is outside [0, 1].
int threshold_distance(double d, const RewardConfig& config);

struct MimicryOutcome {
  int reward = 0;
  BmuPosition mimic_bmu;
  double distance = 0.0;
};

/// Maps the trainer's re-enactment into SOM space and scores how far it
/// landed from the stimulus BMU.
MimicryOutcome mimicry_reward(const SomModel& som, const CnnModel& cnn, const BmuPosition& stimulus_bmu,
                              const FaceImage& mimic_image, const RewardConfig& config);

/// Clamps to [-2, 2]; throws std::invalid_argument for NaN or infinities.
double direct_reward(double value);

}  // namespace xtamer

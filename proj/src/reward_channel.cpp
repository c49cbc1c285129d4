#include "xtamer/reward_channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xtamer/tamer.hpp"
#include "xtamer/text.hpp"

namespace xtamer {

void RewardConfig::validate() const {
  if (!(0.0 < t1 && t1 < t2 && t2 < t3 && t3 < t4 && t4 < 1.0))
    throw std::invalid_argument("reward thresholds must satisfy 0 < t1 < t2 < t3 < t4 < 1");
}

int threshold_distance(double d, const RewardConfig& c) {
  if (!(d >= 0.0 && d <= 1.0)) throw std::invalid_argument("distance " + text::format_real(d) + " outside [0, 1]");
  if (d < c.t1) return 2;
  if (d < c.t2) return 1;
  if (d < c.t3) return 0;
  if (d < c.t4) return -1;
  return -2;
}

MimicryOutcome mimicry_reward(const SomModel& som, const CnnModel& cnn, const BmuPosition& stimulus_bmu,
                              const FaceImage& mimic_image, const RewardConfig& config) {
  MimicryOutcome out;
  out.mimic_bmu = best_matching_unit(som, forward_features(cnn, mimic_image));
  // Rounding can push the diagonal case a hair above 1.
  out.distance = std::min(1.0, normalized_bmu_distance(stimulus_bmu, out.mimic_bmu));
  out.reward = threshold_distance(out.distance, config);
  return out;
}

double direct_reward(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("direct reward must be finite");
  return std::clamp(value, -kMaxReward, kMaxReward);
}

}  // namespace xtamer

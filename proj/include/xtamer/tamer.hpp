#pragma once

// Reward-model learner: an MLP predicts the trainer's reward for a
// (BMU state, expression action) pair and the policy acts greedily on it.
// Credit is assigned immediately to the last action (turn-based loop).

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>

#include "xtamer/checkpoint.hpp"
#include "xtamer/expression.hpp"
#include "xtamer/network.hpp"
#include "xtamer/rng.hpp"
#include "xtamer/som.hpp"

namespace xtamer {

inline constexpr double kMaxReward = 2.0;

/// Hidden units start as tanh ridges across the unit square of normalized
/// BMU coordinates: state weights ~ N(0, state_init_scale^2), action weights
/// ~ N(0, action_init_scale^2), and each bias puts the ridge through a
/// uniformly drawn point of the square.
struct RewardModelOptions {
  int hidden_units = 128;
  double learning_rate = 0.002;
  double epsilon = 0.0;  // exploration probability; 0 is purely greedy
  double state_init_scale = 10.0;
  double action_init_scale = 3.0;
  bool zero_output_layer = true;
  double initial_prediction = 0.0;  // untrained output, in (-2, 2); set through the output bias
  ActionFeatureKind action_features = ActionFeatureKind::one_hot;
  std::uint64_t seed = 1;
};

struct RewardSample {
  BmuPosition state;
  ExpressionAction action;
  double reward = 0.0;  // in [-2, 2]
};

using RewardPredictions = std::array<double, kEmotionCount>;

struct ActionChoice {
  ExpressionAction action;
  RewardPredictions predictions;
  bool explored = false;
};

/// Index of the largest prediction; ties go to the lowest action id.
int greedy_action(std::span<const double, kEmotionCount> predictions);

class RewardModel {
 public:
  explicit RewardModel(const RewardModelOptions& options = {});

  /// In (-2, 2); only an output pre-activation beyond ~19 saturates tanh to
  /// exactly +-2 in double precision. Throws std::invalid_argument for
  /// non-catalog actions.
  double predict_reward(const BmuPosition& state, const ExpressionAction& action) const;

  RewardPredictions predict_all(const BmuPosition& state) const;

  /// Greedy over the catalog; with `exploration` and epsilon > 0 a uniformly
  /// random action is taken with probability epsilon.
  ActionChoice select_action(const BmuPosition& state, Rng* exploration = nullptr) const;

  /// One SGD step on (prediction - reward)^2. Returns the pre-update cost.
  /// Throws std::invalid_argument when the reward is outside [-2, 2].
  double update(const RewardSample& sample);

  const RewardModelOptions& options() const noexcept { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  std::uint64_t update_count() const noexcept { return update_count_; }

  const nn::Network<double>& network() const noexcept { return net_; }
  nn::Network<double>& network() noexcept { return net_; }

  /// Model input: [normalized row, normalized col, action features...].
  TensorD input_for(const BmuPosition& state, const ExpressionAction& action) const;

  Section to_section() const;
  static RewardModel from_section(const Section& section);

  friend bool operator==(const RewardModel& a, const RewardModel& b);

 private:
  RewardModelOptions options_;
  nn::Network<double> net_;
  std::uint64_t update_count_ = 0;
};

/// Arithmetic mean. Throws std::invalid_argument when empty.
double epoch_cost(std::span<const double> costs);

void save_reward_model(const std::filesystem::path& path, const RewardModel& model);
RewardModel load_reward_model(const std::filesystem::path& path);

}  // namespace xtamer

#include <cmath>
#include <map>

#include "gtest/gtest.h"
#include "support.hpp"
#include "xtamer/reward_channel.hpp"
#include "xtamer/simulated_user.hpp"

namespace xtamer {
namespace {

TEST(Threshold, Endpoints) {
  const RewardConfig c;
  EXPECT_EQ(threshold_distance(0.0, c), 2);
  EXPECT_EQ(threshold_distance(1.0, c), -2);
}

TEST(Threshold, DefaultExamples) {
  const RewardConfig c;
  EXPECT_EQ(threshold_distance(0.2, c), 1);
  EXPECT_EQ(threshold_distance(0.45, c), 0);
  EXPECT_EQ(threshold_distance(0.7, c), -1);
  EXPECT_EQ(threshold_distance(0.10, c), 1);  // boundaries belong to the lower level
  EXPECT_EQ(threshold_distance(0.80, c), -2);
}

TEST(Threshold, MonotoneOverFineGridAndAllLevelsReached) {
  const RewardConfig c;
  std::map<int, int> levels;
  int prev = 3;
  for (int i = 0; i <= 10000; ++i) {
    const int r = threshold_distance(i / 10000.0, c);
    EXPECT_LE(r, prev);
    prev = r;
    ++levels[r];
  }
  EXPECT_EQ(levels.size(), 5u);
}

TEST(Threshold, RandomConfigsStayMonotone) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::array<double, 4> t{};
    for (auto& v : t) v = rng.uniform(0.01, 0.99);
    std::sort(t.begin(), t.end());
    RewardConfig c{t[0], t[1], t[2], t[3]};
    if (!(t[0] < t[1] && t[1] < t[2] && t[2] < t[3])) continue;
    ASSERT_NO_THROW(c.validate());
    int prev = 3;
    for (int i = 0; i <= 1000; ++i) {
      const int r = threshold_distance(i / 1000.0, c);
      EXPECT_GE(r, -2);
      EXPECT_LE(r, prev);
      prev = r;
    }
  }
}

TEST(Threshold, RejectsBadInput) {
  const RewardConfig c;
  EXPECT_THROW(threshold_distance(-0.01, c), std::invalid_argument);
  EXPECT_THROW(threshold_distance(1.01, c), std::invalid_argument);
  EXPECT_THROW(threshold_distance(std::nan(""), c), std::invalid_argument);
  EXPECT_THROW((RewardConfig{0.3, 0.2, 0.5, 0.8}).validate(), std::invalid_argument);
  EXPECT_THROW((RewardConfig{0.0, 0.2, 0.5, 0.8}).validate(), std::invalid_argument);
  EXPECT_THROW((RewardConfig{0.1, 0.2, 0.5, 1.0}).validate(), std::invalid_argument);
}

TEST(Direct, ClampsAndRejectsNonFinite) {
  EXPECT_EQ(direct_reward(1.5), 1.5);
  EXPECT_EQ(direct_reward(2.7), 2.0);
  EXPECT_EQ(direct_reward(-9.0), -2.0);
  EXPECT_THROW(direct_reward(std::nan("")), std::invalid_argument);
  EXPECT_THROW(direct_reward(INFINITY), std::invalid_argument);
}

// Per-user SOM from ten noisy presentations of every emotion.
struct Calibrated {
  SomModel som;
  LabelMap labels;
  UserProfile profile;
};

const Calibrated& calibrated() {
  static const Calibrated c = [] {
    Calibrated out;
    out.profile.identity = IdentityParams::from_seed(31);
    out.profile.seed = 31;
    SimulatedUser user(out.profile);
    std::vector<FeatureVector> features;
    std::vector<LabeledFeature> samples;
    for (int k = 0; k < 10; ++k)
      for (Emotion e : kAllEmotions) {
        features.push_back(forward_features(*testing::small_cnn(), user.present_emotion(e)));
        samples.push_back({features.back(), e});
      }
    out.som = train_som(features, SomOptions{});
    out.labels = label_map(out.som, samples);
    return out;
  }();
  return c;
}

TEST(Mimicry, IdenticalImageIsPerfect) {
  const auto& c = calibrated();
  const auto& cnn = *testing::small_cnn();
  const auto img = render_face(Emotion::disgust, c.profile.identity, 0.05, 3);
  const auto bmu = best_matching_unit(c.som, forward_features(cnn, img));
  const auto r = mimicry_reward(c.som, cnn, bmu, img, RewardConfig{});
  EXPECT_EQ(r.distance, 0.0);
  EXPECT_EQ(r.reward, 2);
  EXPECT_EQ(r.mimic_bmu, bmu);
}

TEST(Mimicry, DistantClassesAreNotRewarded) {
  const auto& c = calibrated();
  const auto& cnn = *testing::small_cnn();
  const RewardConfig cfg;
  std::array<BmuPosition, kEmotionCount> home{};
  for (Emotion e : kAllEmotions)
    home[std::size_t(code(e))] = best_matching_unit(c.som, forward_features(cnn, render_face(e, c.profile.identity, 0, 0)));
  int checked = 0;
  for (Emotion a : kAllEmotions)
    for (Emotion b : kAllEmotions) {
      const auto& ha = home[std::size_t(code(a))];
      const auto& hb = home[std::size_t(code(b))];
      if (a == b || normalized_bmu_distance(ha, hb) < cfg.t3) continue;
      const auto r = mimicry_reward(c.som, cnn, ha, render_face(b, c.profile.identity, 0, 0), cfg);
      EXPECT_LE(r.reward, 0) << name(a) << " mimicked as " << name(b);
      ++checked;
    }
  EXPECT_GT(checked, 0);
}

TEST(Mimicry, RewardCodomain) {
  const auto& c = calibrated();
  const auto& cnn = *testing::small_cnn();
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const BmuPosition s{int(rng.below(20)), int(rng.below(20)), 20, 20};
    const auto r = mimicry_reward(c.som, cnn, s, render_face(kAllEmotions[rng.below(7)], c.profile.identity, 0.05,
                                                             rng.next()),
                                  RewardConfig{});
    EXPECT_GE(r.reward, -2);
    EXPECT_LE(r.reward, 2);
    EXPECT_GE(r.distance, 0.0);
    EXPECT_LE(r.distance, 1.0);
    EXPECT_EQ(r.reward, threshold_distance(r.distance, RewardConfig{}));
  }
}

TEST(Mimicry, PerfectMimicOfCorrectActionIsRewarded) {
  const auto& c = calibrated();
  ASSERT_GE(c.labels.purity, 0.9);
  const auto& cnn = *testing::small_cnn();
  SimulatedUser user(c.profile);
  int top = 0, positive = 0, total = 0;
  for (int k = 0; k < 30; ++k)
    for (Emotion e : kAllEmotions) {
      const auto bmu = best_matching_unit(c.som, forward_features(cnn, user.present_emotion(e)));
      const auto r = mimicry_reward(c.som, cnn, bmu, user.mimic_action(catalog_action(e)), RewardConfig{});
      top += r.reward == 2;
      positive += r.reward > 0;
      ++total;
    }
  // Two noisy renders of one emotion often land a few units apart, past
  // t1 = 0.10 (2.7 cells), so +1 is common; a correct action is never
  // scored zero or below.
  RecordProperty("top_reward_rate", std::to_string(double(top) / total));
  EXPECT_EQ(positive, total);
  EXPECT_GE(double(top) / total, 0.5);
}

}  // namespace
}  // namespace xtamer

#pragma once

// Virtual robot face: LED masks per subsystem and the seven-action catalog.
//
// Wire encoding is five uppercase hex digits:
//   [left_brow][right_brow][mouth hi][mouth lo][eyelids]
// e.g. all LEDs on with eyes fully open is "FF3F5".

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xtamer/emotion.hpp"

namespace xtamer {

struct ExpressionAction {
  static constexpr unsigned kBrowBits = 4;
  static constexpr unsigned kMouthBits = 6;
  static constexpr unsigned kMaxEyelids = 5;

  std::optional<int> action_id;  // nullopt: not one of the catalog actions
  std::uint8_t left_brow = 0;    // 4-bit mask
  std::uint8_t right_brow = 0;   // 4-bit mask
  std::uint8_t mouth = 0;        // 6-bit mask
  std::uint8_t eyelids = 0;      // aperture step 0..5

  bool same_pattern(const ExpressionAction& o) const {
    return left_brow == o.left_brow && right_brow == o.right_brow && mouth == o.mouth &&
           eyelids == o.eyelids;
  }

  friend bool operator==(const ExpressionAction&, const ExpressionAction&) = default;
};

using ActionCatalog = std::array<ExpressionAction, kEmotionCount>;

/// The constant catalog, indexed by emotion code.
const ActionCatalog& action_catalog();

const ExpressionAction& catalog_action(Emotion emotion);

/// Emotion whose catalog action this is; nullopt for non-catalog actions.
std::optional<Emotion> action_emotion(const ExpressionAction& action);

/// Throws ParseError naming the out-of-width field.
std::string encode_action(const ExpressionAction& action);

/// Throws ParseError naming the offending field ("encoding", "left_brow",
/// "right_brow", "mouth", "eyelids").
ExpressionAction decode_action(std::string_view encoding);

enum class ActionFeatureKind { one_hot, led_bits };

std::size_t action_feature_size(ActionFeatureKind kind);

/// one_hot: length-7 indicator of action_id (non-catalog actions rejected).
/// led_bits: the 14 LED bits followed by eyelids / 5.
Eigen::VectorXd action_features(const ExpressionAction& action,
                                ActionFeatureKind kind = ActionFeatureKind::one_hot);

/// Indices of lit LEDs per subsystem, bit i -> LED i.
struct LedLayout {
  std::vector<int> left_brow;
  std::vector<int> right_brow;
  std::vector<int> mouth;
  int eyelid_aperture = 0;
};

LedLayout led_layout(const ExpressionAction& action);

}  // namespace xtamer

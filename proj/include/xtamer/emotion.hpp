#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace xtamer {

/// The six universal emotions plus neutral. Integer codes are stable.
enum class Emotion : int {
  anger = 0,
  disgust = 1,
  fear = 2,
  happiness = 3,
  sadness = 4,
  surprise = 5,
  neutral = 6,
};

inline constexpr std::size_t kEmotionCount = 7;

inline constexpr std::array<Emotion, kEmotionCount> kAllEmotions = {
    Emotion::anger,   Emotion::disgust,  Emotion::fear,   Emotion::happiness,
    Emotion::sadness, Emotion::surprise, Emotion::neutral,
};

constexpr int code(Emotion e) { return static_cast<int>(e); }

constexpr std::string_view name(Emotion e) {
  constexpr std::array<std::string_view, kEmotionCount> names = {
      "anger", "disgust", "fear", "happiness", "sadness", "surprise", "neutral"};
  return names[std::size_t(code(e))];
}

constexpr std::optional<Emotion> emotion_from_code(long c) {
  if (c < 0 || c >= long(kEmotionCount)) return std::nullopt;
  return static_cast<Emotion>(c);
}

/// Accepts the lowercase name or the integer code.
constexpr std::optional<Emotion> parse_emotion(std::string_view s) {
  for (Emotion e : kAllEmotions)
    if (name(e) == s) return e;
  if (s.size() == 1 && s[0] >= '0' && s[0] <= '9') return emotion_from_code(s[0] - '0');
  return std::nullopt;
}

}  // namespace xtamer

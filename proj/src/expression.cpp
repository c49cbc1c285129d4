#include "xtamer/expression.hpp"

#include <stdexcept>

#include "xtamer/errors.hpp"

namespace xtamer {

namespace {

constexpr std::array<std::string_view, kEmotionCount> kCatalogEncodings = {
    "C3185",  // anger
    "99205",  // disgust
    "66304",  // fear
    "18015",  // happiness
    "39042",  // sadness
    "66335",  // surprise
    "18185",  // neutral (rest pattern)
};

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

ExpressionAction decode_pattern(std::string_view s) {
  if (s.size() != 5) throw ParseError("encoding", "expected 5 hex digits, got " + std::to_string(s.size()));
  constexpr std::array<const char*, 5> field = {"left_brow", "right_brow", "mouth", "mouth", "eyelids"};
  std::array<int, 5> d{};
  for (std::size_t i = 0; i < 5; ++i) {
    d[i] = hex_value(s[i]);
    if (d[i] < 0) throw ParseError(field[i], std::string("invalid hex digit '") + s[i] + "'");
  }
  ExpressionAction a;
  a.left_brow = std::uint8_t(d[0]);
  a.right_brow = std::uint8_t(d[1]);
  const int mouth = d[2] * 16 + d[3];
  if (mouth > 0x3F) throw ParseError("mouth", "mask exceeds 6 bits");
  a.mouth = std::uint8_t(mouth);
  if (d[4] > int(ExpressionAction::kMaxEyelids)) throw ParseError("eyelids", "aperture step above 5");
  a.eyelids = std::uint8_t(d[4]);
  return a;
}

ActionCatalog build_catalog() {
  ActionCatalog c{};
  for (std::size_t i = 0; i < kEmotionCount; ++i) {
    c[i] = decode_pattern(kCatalogEncodings[i]);
    c[i].action_id = int(i);
  }
  return c;
}

void append_bits(std::vector<int>& out, unsigned mask, unsigned width) {
  for (unsigned i = 0; i < width; ++i)
    if (mask & (1u << i)) out.push_back(int(i));
}

}  // namespace

const ActionCatalog& action_catalog() {
  static const ActionCatalog catalog = build_catalog();
  return catalog;
}

const ExpressionAction& catalog_action(Emotion emotion) {
  return action_catalog()[std::size_t(code(emotion))];
}

std::optional<Emotion> action_emotion(const ExpressionAction& action) {
  if (!action.action_id) return std::nullopt;
  return emotion_from_code(*action.action_id);
}

std::string encode_action(const ExpressionAction& a) {
  if (a.left_brow > 0xF) throw ParseError("left_brow", "mask exceeds 4 bits");
  if (a.right_brow > 0xF) throw ParseError("right_brow", "mask exceeds 4 bits");
  if (a.mouth > 0x3F) throw ParseError("mouth", "mask exceeds 6 bits");
  if (a.eyelids > ExpressionAction::kMaxEyelids) throw ParseError("eyelids", "aperture step above 5");
  constexpr char digits[] = "0123456789ABCDEF";
  std::string s(5, '0');
  s[0] = digits[a.left_brow];
  s[1] = digits[a.right_brow];
  s[2] = digits[a.mouth >> 4];
  s[3] = digits[a.mouth & 0xF];
  s[4] = digits[a.eyelids];
  return s;
}

ExpressionAction decode_action(std::string_view encoding) {
  ExpressionAction a = decode_pattern(encoding);
  for (const auto& c : action_catalog()) {
    if (c.same_pattern(a)) {
      a.action_id = c.action_id;
      break;
    }
  }
  return a;
}

std::size_t action_feature_size(ActionFeatureKind kind) {
  return kind == ActionFeatureKind::one_hot ? kEmotionCount : 15;
}

Eigen::VectorXd action_features(const ExpressionAction& a, ActionFeatureKind kind) {
  if (!a.action_id || *a.action_id < 0 || *a.action_id >= int(kEmotionCount))
    throw std::invalid_argument("action_features: not a catalog action");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(Eigen::Index(action_feature_size(kind)));
  if (kind == ActionFeatureKind::one_hot) {
    v[*a.action_id] = 1.0;
    return v;
  }
  Eigen::Index k = 0;
  for (unsigned i = 0; i < 4; ++i) v[k++] = (a.left_brow >> i) & 1u;
  for (unsigned i = 0; i < 4; ++i) v[k++] = (a.right_brow >> i) & 1u;
  for (unsigned i = 0; i < 6; ++i) v[k++] = (a.mouth >> i) & 1u;
  v[k] = double(a.eyelids) / double(ExpressionAction::kMaxEyelids);
  return v;
}

LedLayout led_layout(const ExpressionAction& a) {
  LedLayout l;
  append_bits(l.left_brow, a.left_brow, ExpressionAction::kBrowBits);
  append_bits(l.right_brow, a.right_brow, ExpressionAction::kBrowBits);
  append_bits(l.mouth, a.mouth, ExpressionAction::kMouthBits);
  l.eyelid_aperture = a.eyelids;
  return l;
}

}  // namespace xtamer

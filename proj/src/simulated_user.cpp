#include "xtamer/simulated_user.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "xtamer/errors.hpp"

namespace xtamer {

using nlohmann::json;

ConfusionMatrix uniform_confusion() {
  ConfusionMatrix m{};
  for (auto& row : m) row.fill(1.0 / double(kEmotionCount));
  return m;
}

void UserProfile::validate() const {
  identity.validate();
  if (!(mimic_accuracy >= 0.0 && mimic_accuracy <= 1.0)) throw std::invalid_argument("mimic_accuracy outside [0, 1]");
  if (!(expression_noise >= 0.0 && expression_noise <= kMaxNoise))
    throw std::invalid_argument("expression_noise outside [0, 0.2]");
  for (std::size_t i = 0; i < kEmotionCount; ++i) {
    double sum = 0.0;
    for (double p : confusion[i]) {
      if (!(p >= 0.0)) throw std::invalid_argument("confusion entries must be non-negative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("confusion row " + std::to_string(i) + " does not sum to 1");
  }
}

json profile_to_json(const UserProfile& p) {
  const auto& id = p.identity;
  return json{
      {"format", "xtamer-profile"},
      {"version", UserProfile::kFormatVersion},
      {"identity",
       {{"face_width_ratio", id.face_width_ratio},
        {"eye_spacing", id.eye_spacing},
        {"eye_height", id.eye_height},
        {"brow_thickness", id.brow_thickness},
        {"mouth_width", id.mouth_width},
        {"skin_tone", id.skin_tone},
        {"seed", id.seed}}},
      {"mimic_accuracy", p.mimic_accuracy},
      {"confusion", p.confusion},
      {"expression_noise", p.expression_noise},
      {"seed", p.seed},
  };
}

UserProfile profile_from_json(const json& doc) {
  if (!doc.is_object()) throw ParseError("profile", "expected a JSON object");
  if (doc.contains("format") && doc["format"] != "xtamer-profile") throw ParseError("format", "not an xtamer profile");
  if (doc.contains("version") && doc["version"] != UserProfile::kFormatVersion)
    throw ParseError("version", "unsupported profile version");
  UserProfile p;
  try {
    if (doc.contains("identity")) {
      const auto& id = doc["identity"];
      if (id.contains("seed")) p.identity = IdentityParams::from_seed(id["seed"].get<std::uint64_t>());
      auto field = [&](const char* key, double& out) {
        if (id.contains(key)) out = id[key].get<double>();
      };
      field("face_width_ratio", p.identity.face_width_ratio);
      field("eye_spacing", p.identity.eye_spacing);
      field("eye_height", p.identity.eye_height);
      field("brow_thickness", p.identity.brow_thickness);
      field("mouth_width", p.identity.mouth_width);
      field("skin_tone", p.identity.skin_tone);
    }
    if (doc.contains("mimic_accuracy")) p.mimic_accuracy = doc["mimic_accuracy"].get<double>();
    if (doc.contains("confusion")) p.confusion = doc["confusion"].get<ConfusionMatrix>();
    if (doc.contains("expression_noise")) p.expression_noise = doc["expression_noise"].get<double>();
    if (doc.contains("seed")) p.seed = doc["seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ParseError("profile", e.what());
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError("profile", e.what());
  }
  return p;
}

void save_profile(const std::filesystem::path& path, const UserProfile& profile) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << profile_to_json(profile).dump(2) << '\n';
}

UserProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("profile", e.what());
  }
  return profile_from_json(doc);
}

SimulatedUser::SimulatedUser(UserProfile profile)
    : profile_(std::move(profile)), rng_(derive_seed(profile_.seed, 0x05E7)) {
  profile_.validate();
}

FaceImage SimulatedUser::present_emotion(Emotion emotion) {
  return render_face(emotion, profile_.identity, profile_.expression_noise, rng_.next());
}

Emotion SimulatedUser::sample_mimic_emotion(const ExpressionAction& robot_action) {
  const auto shown = action_emotion(robot_action);
  if (!shown) throw std::invalid_argument("mimic_action: not a catalog action");
  // Both draws are always taken so the stream advances identically.
  const bool faithful = rng_.bernoulli(profile_.mimic_accuracy);
  const double u = rng_.uniform();
  if (faithful) return *shown;
  const auto& row = profile_.confusion[std::size_t(code(*shown))];
  double cumulative = 0.0;
  for (std::size_t j = 0; j < kEmotionCount; ++j) {
    cumulative += row[j];
    if (u < cumulative) return *emotion_from_code(long(j));
  }
  for (std::size_t j = kEmotionCount; j-- > 0;)
    if (row[j] > 0.0) return *emotion_from_code(long(j));
  return *shown;
}

FaceImage SimulatedUser::mimic_action(const ExpressionAction& robot_action) {
  const Emotion e = sample_mimic_emotion(robot_action);
  return render_face(e, profile_.identity, profile_.expression_noise, rng_.next());
}

}  // namespace xtamer

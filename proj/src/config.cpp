#include "xtamer/config.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "xtamer/errors.hpp"

namespace xtamer {

using nlohmann::json;

namespace {

const char* mode_name(RewardMode m) { return m == RewardMode::mimicry ? "mimicry" : "direct"; }

RewardMode parse_mode(const std::string& s) {
  if (s == "mimicry" || s == "mimic") return RewardMode::mimicry;
  if (s == "direct") return RewardMode::direct;
  throw ParseError("reward.mode", "expected 'mimicry' or 'direct'");
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& path) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(path + key, e.what());
  }
}

}  // namespace

void SessionConfig::validate() const {
  if (calibration_samples < 1) throw std::invalid_argument("calibration_samples must be >= 1");
  if (interactions_per_epoch < 1) throw std::invalid_argument("interactions_per_epoch must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (evaluation_samples < 0) throw std::invalid_argument("evaluation_samples must be >= 0");
  if (!(reward_timeout_s > 0.0)) throw std::invalid_argument("reward_timeout_s must be > 0");
  reward.validate();
  if (learner.hidden_units < 1) throw std::invalid_argument("learner.hidden_units must be >= 1");
  if (!(learner.learning_rate >= 0.0)) throw std::invalid_argument("learner.learning_rate must be >= 0");
  if (!(learner.epsilon >= 0.0 && learner.epsilon <= 1.0)) throw std::invalid_argument("learner.epsilon outside [0, 1]");
  if (!(std::abs(learner.initial_prediction) < kMaxReward))
    throw std::invalid_argument("learner.initial_prediction outside (-2, 2)");
  if (som.rows < 1 || som.cols < 1 || som.iterations < 1) throw std::invalid_argument("som grid/iterations must be positive");
  if (profile) profile->validate();
}

SessionConfig default_config() { return SessionConfig{}; }

json config_to_json(const SessionConfig& c) {
  json doc{
      {"seed", c.seed},
      {"calibration_samples", c.calibration_samples},
      {"interactions_per_epoch", c.interactions_per_epoch},
      {"epochs", c.epochs},
      {"evaluation_samples", c.evaluation_samples},
      {"reward_timeout_s", c.reward_timeout_s},
      {"reward", {{"mode", mode_name(c.reward.mode)}, {"thresholds", {c.reward.t1, c.reward.t2, c.reward.t3, c.reward.t4}}}},
      {"learner",
       {{"hidden_units", c.learner.hidden_units},
        {"learning_rate", c.learner.learning_rate},
        {"epsilon", c.learner.epsilon},
        {"state_init_scale", c.learner.state_init_scale},
        {"action_init_scale", c.learner.action_init_scale},
        {"zero_output_layer", c.learner.zero_output_layer},
        {"initial_prediction", c.learner.initial_prediction},
        {"action_features", c.learner.action_features == ActionFeatureKind::one_hot ? "one_hot" : "led_bits"}}},
      {"som",
       {{"rows", c.som.rows},
        {"cols", c.som.cols},
        {"iterations", c.som.iterations},
        {"learning_rate0", c.som.learning_rate0},
        {"radius0", c.som.radius0}}},
      {"user", {{"source", c.user_source == UserSource::simulated ? "simulated" : "interactive"}}},
  };
  if (c.profile_path) doc["user"]["profile"] = *c.profile_path;
  if (c.profile) doc["profile"] = profile_to_json(*c.profile);
  if (c.cnn_model) doc["cnn_model"] = *c.cnn_model;
  if (c.som_model) doc["som_model"] = *c.som_model;
  return doc;
}

SessionConfig config_from_json(const json& doc, SessionConfig c) {
  if (!doc.is_object()) throw ParseError("config", "expected a JSON object");
  read(doc, "seed", c.seed, "");
  read(doc, "calibration_samples", c.calibration_samples, "");
  read(doc, "interactions_per_epoch", c.interactions_per_epoch, "");
  read(doc, "epochs", c.epochs, "");
  read(doc, "evaluation_samples", c.evaluation_samples, "");
  read(doc, "reward_timeout_s", c.reward_timeout_s, "");
  if (doc.contains("reward")) {
    const auto& r = doc["reward"];
    if (r.contains("mode")) c.reward.mode = parse_mode(r["mode"].get<std::string>());
    if (r.contains("thresholds")) {
      std::vector<double> t;
      read(r, "thresholds", t, "reward.");
      if (t.size() != 4) throw ParseError("reward.thresholds", "expected four values");
      c.reward.t1 = t[0];
      c.reward.t2 = t[1];
      c.reward.t3 = t[2];
      c.reward.t4 = t[3];
    }
  }
  if (doc.contains("learner")) {
    const auto& l = doc["learner"];
    read(l, "hidden_units", c.learner.hidden_units, "learner.");
    read(l, "learning_rate", c.learner.learning_rate, "learner.");
    read(l, "epsilon", c.learner.epsilon, "learner.");
    read(l, "state_init_scale", c.learner.state_init_scale, "learner.");
    read(l, "action_init_scale", c.learner.action_init_scale, "learner.");
    read(l, "zero_output_layer", c.learner.zero_output_layer, "learner.");
    read(l, "initial_prediction", c.learner.initial_prediction, "learner.");
    if (l.contains("action_features")) {
      const auto kind = l["action_features"].get<std::string>();
      if (kind == "one_hot") c.learner.action_features = ActionFeatureKind::one_hot;
      else if (kind == "led_bits") c.learner.action_features = ActionFeatureKind::led_bits;
      else throw ParseError("learner.action_features", "expected 'one_hot' or 'led_bits'");
    }
  }
  if (doc.contains("som")) {
    const auto& s = doc["som"];
    read(s, "rows", c.som.rows, "som.");
    read(s, "cols", c.som.cols, "som.");
    read(s, "iterations", c.som.iterations, "som.");
    read(s, "learning_rate0", c.som.learning_rate0, "som.");
    read(s, "radius0", c.som.radius0, "som.");
  }
  if (doc.contains("user")) {
    const auto& u = doc["user"];
    if (u.contains("source")) {
      const auto src = u["source"].get<std::string>();
      if (src == "simulated") c.user_source = UserSource::simulated;
      else if (src == "interactive") c.user_source = UserSource::interactive;
      else throw ParseError("user.source", "expected 'simulated' or 'interactive'");
    }
    if (u.contains("profile")) c.profile_path = u["profile"].get<std::string>();
  }
  if (doc.contains("profile")) c.profile = profile_from_json(doc["profile"]);
  if (doc.contains("cnn_model")) c.cnn_model = doc["cnn_model"].get<std::string>();
  if (doc.contains("som_model")) c.som_model = doc["som_model"].get<std::string>();
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError("config", e.what());
  }
  return c;
}

SessionConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ParseError("config", e.what());
  }
}

UserProfile resolve_profile(const SessionConfig& config) {
  if (config.profile) return *config.profile;
  if (config.profile_path) return load_profile(*config.profile_path);
  UserProfile p;
  p.seed = derive_seed(config.seed, 0x0E5E);
  return p;
}

}  // namespace xtamer

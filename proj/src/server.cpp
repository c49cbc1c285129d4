#include "xtamer/server.hpp"

#include <sodium.h>

#include <chrono>
#include <stdexcept>

#include "httplib.h"
#include "xtamer/errors.hpp"

namespace xtamer {

using nlohmann::json;

std::string base64_encode(const std::string& bytes) {
  const std::size_t len = sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  std::string out(len, '\0');
  sodium_bin2base64(out.data(), len, reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(),
                    sodium_base64_VARIANT_ORIGINAL);
  out.resize(len - 1);
  return out;
}

std::string base64_decode(const std::string& text) {
  std::string out(text.size() / 4 * 3 + 3, '\0');
  std::size_t n = 0;
  if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(), text.data(), text.size(), " \r\n",
                        &n, nullptr, sodium_base64_VARIANT_ORIGINAL) != 0)
    throw ParseError("image", "invalid base64");
  out.resize(n);
  return out;
}

namespace {

ApiResponse error(int status, const std::string& message) { return {status, json{{"error", message}}}; }

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ParseError("body", "expected a JSON object");
  return doc;
}

json bmu_json(const BmuPosition& b) { return json{{"row", b.row}, {"col", b.col}}; }

json summaries_json(const std::vector<EpochSummary>& epochs) {
  json out = json::array();
  for (const auto& e : epochs)
    out.push_back({{"epoch", e.epoch}, {"avg_cost", e.avg_cost}, {"accuracy", e.accuracy}, {"interactions", e.interactions}});
  return out;
}

std::optional<Emotion> emotion_field(const json& doc) {
  if (!doc.contains("emotion")) return std::nullopt;
  if (!doc["emotion"].is_string()) throw ParseError("emotion", "expected an emotion name");
  const auto e = parse_emotion(doc["emotion"].get<std::string>());
  if (!e) throw ParseError("emotion", "unknown emotion '" + doc["emotion"].get<std::string>() + "'");
  return e;
}

FaceImage image_field(const json& doc) {
  if (!doc["image"].is_string()) throw ParseError("image", "expected base64 PGM text");
  return decode_pgm(base64_decode(doc["image"].get<std::string>()));
}

template <typename Fn>
ApiResponse guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    return error(400, e.what());
  } catch (const ShapeError& e) {
    return error(400, e.what());
  } catch (const std::invalid_argument& e) {
    return error(400, e.what());
  } catch (const std::out_of_range&) {
    return error(404, "unknown session");
  }
}

}  // namespace

SessionService::SessionService(SessionConfig base, std::shared_ptr<const CnnModel> cnn, std::function<double()> clock)
    : base_(std::move(base)), cnn_(std::move(cnn)), clock_(std::move(clock)) {
  if (!cnn_) throw std::invalid_argument("service needs a CNN model");
  if (!clock_) {
    clock_ = [] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
    };
  }
}

double SessionService::now() const { return clock_(); }

std::shared_ptr<SessionService::Live> SessionService::find(const std::string& id) const {
  std::lock_guard lock(registry_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw std::out_of_range("unknown session " + id);
  return it->second;
}

std::size_t SessionService::session_count() const {
  std::lock_guard lock(registry_mutex_);
  return sessions_.size();
}

void SessionService::with_session(const std::string& id, const std::function<void(Session&)>& fn) {
  auto live = find(id);
  std::lock_guard lock(live->mutex);
  fn(*live->session);
}

ApiResponse SessionService::create_session(const std::string& body) {
  return guarded([&] {
    SessionConfig config = config_from_json(parse_body(body), base_);
    config.user_source = UserSource::interactive;
    auto live = std::make_shared<Live>();
    live->user = std::make_unique<SimulatedUser>(resolve_profile(config));
    live->session = std::make_unique<Session>(config, cnn_);
    json calibration = nullptr;
    if (config.som_model) {
      live->session->set_som(load_som(*config.som_model));
    } else {
      const auto report = live->session->calibrate(*live->user);
      calibration = {{"purity", report.purity},
                     {"quantization_error", report.quantization_error},
                     {"samples", report.samples}};
    }
    live->created_at = now();
    std::string id;
    {
      std::lock_guard lock(registry_mutex_);
      id = "s" + std::to_string(next_id_++);
      sessions_.emplace(id, live);
    }
    return ApiResponse{201, json{{"id", id}, {"phase", phase_name(live->session->phase())}, {"calibration", calibration}}};
  });
}

ApiResponse SessionService::state(const std::string& id) {
  return guarded([&] {
    auto live = find(id);
    std::lock_guard lock(live->mutex);
    const Session& s = *live->session;
    json pending = nullptr;
    if (s.pending()) {
      const auto& p = *s.pending();
      pending = {{"index", p.index},
                 {"stimulus_bmu", bmu_json(p.stimulus_bmu)},
                 {"action", encode_action(p.choice.action)},
                 {"predicted", p.choice.predictions}};
    }
    json last = s.records().empty() ? json(nullptr) : record_to_json(s.records().back());
    return ApiResponse{200, json{{"id", id},
                                 {"phase", phase_name(s.phase())},
                                 {"interactions", s.records().size()},
                                 {"epochs_completed", s.epochs().size()},
                                 {"updates", s.learner().update_count()},
                                 {"discarded", s.discarded()},
                                 {"pending", pending},
                                 {"last_record", last},
                                 {"config", config_to_json(s.config())}}};
  });
}

ApiResponse SessionService::present(const std::string& id, const std::string& body) {
  return guarded([&] {
    auto live = find(id);
    const json doc = parse_body(body);
    const auto emotion = emotion_field(doc);
    std::lock_guard lock(live->mutex);
    Session& s = *live->session;
    const double t = now() - live->created_at;
    if (s.pending()) {
      if (t - s.pending()->started_at <= s.config().reward_timeout_s)
        return error(409, "an interaction is awaiting its reward");
      s.discard_pending();
    }
    FaceImage stimulus;
    if (doc.contains("image")) {
      stimulus = image_field(doc);
    } else if (emotion) {
      stimulus = live->user->present_emotion(*emotion);
    } else {
      throw ParseError("body", "expected 'emotion' or 'image'");
    }
    const auto& p = s.present(stimulus, emotion, t);
    return ApiResponse{200, json{{"index", p.index},
                                 {"stimulus_bmu", bmu_json(p.stimulus_bmu)},
                                 {"action", encode_action(p.choice.action)},
                                 {"predicted", p.choice.predictions},
                                 {"explored", p.choice.explored}}};
  });
}

ApiResponse SessionService::reward(const std::string& id, const std::string& body) {
  return guarded([&] {
    auto live = find(id);
    const json doc = parse_body(body);
    std::lock_guard lock(live->mutex);
    Session& s = *live->session;
    if (!s.pending()) return error(409, "no interaction is awaiting a reward");
    const double t = now() - live->created_at;
    if (t - s.pending()->started_at > s.config().reward_timeout_s) {
      s.discard_pending();
      return error(408, "reward arrived after the deadline; interaction discarded");
    }
    const std::string mode = doc.value("mode", std::string(s.config().reward.mode == RewardMode::direct ? "direct" : "mimic"));
    RewardOutcome outcome;
    if (mode == "mimic" || mode == "mimicry") {
      FaceImage mimic;
      if (doc.contains("image")) {
        mimic = image_field(doc);
      } else if (auto e = emotion_field(doc)) {
        mimic = render_face(*e, live->user->profile().identity, 0.0, 0);
      } else {
        throw ParseError("body", "mimic reward needs 'image' or 'emotion'");
      }
      const auto m = mimicry_reward(s.som(), s.cnn(), s.pending()->stimulus_bmu, mimic, s.config().reward);
      outcome = {double(m.reward), m.distance, m.mimic_bmu};
    } else if (mode == "direct") {
      if (!doc.contains("value") || !doc["value"].is_number()) throw ParseError("value", "expected a number");
      outcome.reward = direct_reward(doc["value"].get<double>());
    } else {
      throw ParseError("mode", "expected 'mimic' or 'direct'");
    }
    return ApiResponse{200, record_to_json(s.complete(outcome, t))};
  });
}

ApiResponse SessionService::metrics(const std::string& id) {
  return guarded([&] {
    auto live = find(id);
    std::lock_guard lock(live->mutex);
    return ApiResponse{200, json{{"epochs", summaries_json(live->session->epochs())}}};
  });
}

ApiResponse SessionService::catalog() {
  json out = json::array();
  for (const auto& a : action_catalog())
    out.push_back({{"action_id", *a.action_id}, {"emotion", name(*action_emotion(a))}, {"encoding", encode_action(a)}});
  return {200, json{{"actions", out}}};
}

ApiResponse SessionService::render(const std::string& encoding) {
  return guarded([&] {
    const auto layout = led_layout(decode_action(encoding));
    return ApiResponse{200, json{{"encoding", encoding},
                                 {"left_brow", layout.left_brow},
                                 {"right_brow", layout.right_brow},
                                 {"mouth", layout.mouth},
                                 {"eyelid_aperture", layout.eyelid_aperture}}};
  });
}

void register_routes(httplib::Server& server, SessionService& service) {
  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Post("/sessions", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.create_session(req.body));
  });
  server.Get("/sessions/:id/state", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.state(req.path_params.at("id")));
  });
  server.Post("/sessions/:id/present", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.present(req.path_params.at("id"), req.body));
  });
  server.Post("/sessions/:id/reward", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.reward(req.path_params.at("id"), req.body));
  });
  server.Get("/sessions/:id/metrics", [&, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.metrics(req.path_params.at("id")));
  });
  server.Get("/catalog", [reply](const httplib::Request&, httplib::Response& res) { reply(res, SessionService::catalog()); });
  server.Get("/render/:encoding", [reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, SessionService::render(req.path_params.at("encoding")));
  });
}

void serve(SessionService& service, const std::string& host, int port) {
  httplib::Server server;
  register_routes(server, service);
  if (!server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  server.listen_after_bind();
}

}  // namespace xtamer

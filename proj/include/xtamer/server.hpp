#pragma once

// HTTP front end for interactive sessions. SessionService holds the
// transport-free request logic so it can be driven directly in tests;
// register_routes wires it onto an httplib server.
//
//   POST /sessions                 body: config overrides -> {"id", "phase", "calibration"}
//   GET  /sessions/{id}/state
//   POST /sessions/{id}/present    {"emotion": name} or {"image": base64 PGM[, "emotion": name]}
//   POST /sessions/{id}/reward     {"mode": "mimic", "image"|"emotion"} or {"mode": "direct", "value": r}
//   GET  /sessions/{id}/metrics    per-epoch summaries
//   GET  /catalog
//   GET  /render/{encoding}        subsystem -> lit LED indices
//
// Status codes: 400 malformed body or encoding, 404 unknown session,
// 408 reward after the deadline (interaction discarded), 409 reward with
// nothing pending or present while a reward is pending.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "json.hpp"
#include "xtamer/cnn.hpp"
#include "xtamer/config.hpp"
#include "xtamer/session.hpp"

namespace httplib {
class Server;
}

namespace xtamer {

std::string base64_encode(const std::string& bytes);
/// Throws ParseError("image") on malformed input.
std::string base64_decode(const std::string& text);

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

class SessionService {
 public:
  /// `clock` returns seconds on any monotonic scale; defaults to steady_clock.
  SessionService(SessionConfig base, std::shared_ptr<const CnnModel> cnn, std::function<double()> clock = {});

  ApiResponse create_session(const std::string& body);
  ApiResponse state(const std::string& id);
  ApiResponse present(const std::string& id, const std::string& body);
  ApiResponse reward(const std::string& id, const std::string& body);
  ApiResponse metrics(const std::string& id);
  static ApiResponse catalog();
  static ApiResponse render(const std::string& encoding);

  std::size_t session_count() const;

  /// Runs `fn` under the session's lock; throws std::out_of_range for unknown ids.
  void with_session(const std::string& id, const std::function<void(Session&)>& fn);

 private:
  struct Live {
    std::mutex mutex;
    std::unique_ptr<Session> session;
    std::unique_ptr<SimulatedUser> user;
    double created_at = 0.0;
  };

  std::shared_ptr<Live> find(const std::string& id) const;
  double now() const;

  SessionConfig base_;
  std::shared_ptr<const CnnModel> cnn_;
  std::function<double()> clock_;
  mutable std::mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<Live>> sessions_;
  std::uint64_t next_id_ = 1;
};

void register_routes(httplib::Server& server, SessionService& service);

/// Blocks serving on host:port. Throws IoError when the port cannot be bound.
void serve(SessionService& service, const std::string& host, int port);

}  // namespace xtamer

#pragma once

// The interaction loop: stimulus -> features -> BMU -> greedy expression ->
// trainer reward -> one reward-model update, plus epoch bookkeeping,
// held-out evaluation and on-disk persistence for simulated runs.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "xtamer/cnn.hpp"
#include "xtamer/config.hpp"
#include "xtamer/expression.hpp"
#include "xtamer/reward_channel.hpp"
#include "xtamer/simulated_user.hpp"
#include "xtamer/som.hpp"
#include "xtamer/tamer.hpp"

namespace xtamer {

enum class SessionPhase { idle, calibrating, training };

const char* phase_name(SessionPhase phase);

struct InteractionRecord {
  int index = 0;                     // 0-based position in the session log
  std::optional<Emotion> presented;  // known for simulated or label-driven stimuli
  BmuPosition stimulus_bmu;
  std::string action;                // 5-hex-digit encoding
  bool explored = false;             // action drawn by epsilon exploration
  RewardPredictions predicted{};
  double observed_reward = 0.0;
  std::optional<double> distance;    // mimicry mode only
  std::optional<BmuPosition> mimic_bmu;
  double cost = 0.0;                 // squared prediction error before the update
  double timestamp = 0.0;            // seconds since session start

  /// Greedy hit: the highest-predicted expression belongs to the presented
  /// emotion. Equals the chosen action unless the turn explored.
  std::optional<bool> correct() const;
};

nlohmann::json record_to_json(const InteractionRecord& record);
InteractionRecord record_from_json(const nlohmann::json& doc);

struct EpochSummary {
  int epoch = 0;  // 1-based
  double avg_cost = 0.0;
  double accuracy = 0.0;  // greedy hits over records with a known presented emotion
  int interactions = 0;
};

/// Summaries for every complete block of `per_epoch` records.
std::vector<EpochSummary> summarize_epochs(const std::vector<InteractionRecord>& records, int per_epoch);

struct CalibrationReport {
  double purity = 0.0;
  double quantization_error = 0.0;
  int samples = 0;
};

struct RewardOutcome {
  double reward = 0.0;
  std::optional<double> distance;
  std::optional<BmuPosition> mimic_bmu;
};

class Session;

/// Supplies the trainer's reward for the robot's expression; nullopt means
/// no reward arrived in time and the interaction is discarded.
class RewardSource {
 public:
  virtual ~RewardSource() = default;
  virtual std::optional<RewardOutcome> obtain(const Session& session, std::optional<Emotion> presented,
                                              const ExpressionAction& action, const BmuPosition& stimulus_bmu) = 0;
};

/// Simulated trainer. Mimicry mode renders the user's re-enactment and scores
/// it through the SOM; direct mode answers +2 when the re-enacted emotion
/// matches the presented one and -2 otherwise.
class SimulatedRewardSource : public RewardSource {
 public:
  SimulatedRewardSource(SimulatedUser& user, RewardConfig config) : user_(user), config_(config) {}
  std::optional<RewardOutcome> obtain(const Session& session, std::optional<Emotion> presented,
                                      const ExpressionAction& action, const BmuPosition& stimulus_bmu) override;

 private:
  SimulatedUser& user_;
  RewardConfig config_;
};

struct EvaluationResult {
  std::array<double, kEmotionCount> per_class_accuracy{};
  int classes_correct = 0;  // classes where most held-out stimuli get their own expression
  double overall_accuracy = 0.0;
};

class Session {
 public:
  struct Pending {
    int index = 0;
    std::optional<Emotion> presented;
    BmuPosition stimulus_bmu;
    ActionChoice choice;
    double started_at = 0.0;
  };

  Session(SessionConfig config, std::shared_ptr<const CnnModel> cnn);

  const SessionConfig& config() const noexcept { return config_; }
  SessionPhase phase() const noexcept { return phase_; }
  const CnnModel& cnn() const noexcept { return *cnn_; }
  const SomModel& som() const;
  const RewardModel& learner() const noexcept { return learner_; }
  RewardModel& learner() noexcept { return learner_; }

  /// Collects calibration_samples presentations per emotion and trains the
  /// per-user SOM.
  CalibrationReport calibrate(SimulatedUser& user);

  /// Installs a previously trained SOM instead of calibrating.
  void set_som(SomModel som);

  /// Stimulus to chosen action; the interaction stays pending until a
  /// reward arrives. Throws std::logic_error before calibration or while
  /// another interaction is pending.
  const Pending& present(const FaceImage& stimulus, std::optional<Emotion> presented, double now);
  const std::optional<Pending>& pending() const noexcept { return pending_; }

  /// Applies exactly one learner update and appends the record.
  const InteractionRecord& complete(const RewardOutcome& outcome, double now);

  /// Drops the pending interaction without touching the learner.
  void discard_pending();

  std::optional<InteractionRecord> run_interaction(const FaceImage& stimulus, std::optional<Emotion> presented,
                                                   RewardSource& source);

  /// interactions_per_epoch interactions, emotions in shuffled round-robin
  /// cycles restarted each epoch.
  EpochSummary run_epoch(SimulatedUser& user, RewardSource& source);

  /// Greedy choices on fresh stimuli; does not touch the learner.
  EvaluationResult evaluate(SimulatedUser& user, int samples_per_class) const;

  const std::vector<InteractionRecord>& records() const noexcept { return records_; }
  const std::vector<EpochSummary>& epochs() const noexcept { return epochs_; }
  std::uint64_t discarded() const noexcept { return discarded_; }
  std::optional<CalibrationReport> calibration() const noexcept { return calibration_; }

  void set_clock(std::function<double()> clock) { clock_ = std::move(clock); }
  void set_record_sink(std::function<void(const InteractionRecord&)> sink) { sink_ = std::move(sink); }
  void set_phase(SessionPhase phase) { phase_ = phase; }
  Rng& schedule_rng() noexcept { return schedule_rng_; }
  Rng& exploration_rng() noexcept { return explore_rng_; }

  /// Reinstates state saved at an epoch boundary.
  void restore(SomModel som, RewardModel learner, std::vector<InteractionRecord> records,
               std::optional<CalibrationReport> calibration, std::uint64_t discarded);

 private:
  SessionConfig config_;
  std::shared_ptr<const CnnModel> cnn_;
  SessionPhase phase_ = SessionPhase::idle;
  std::optional<SomModel> som_;
  RewardModel learner_;
  std::optional<Pending> pending_;
  std::vector<InteractionRecord> records_;
  std::vector<EpochSummary> epochs_;
  std::optional<CalibrationReport> calibration_;
  std::uint64_t discarded_ = 0;
  Rng schedule_rng_;
  Rng explore_rng_;
  std::function<double()> clock_;
  std::function<void(const InteractionRecord&)> sink_;
};

// ---------------------------------------------------------------------------
// Simulated runs with persistence

struct Convergence {
  std::optional<int> epoch;        // first epoch with accuracy >= threshold
  std::optional<int> interaction;  // first n >= window with trailing-window accuracy >= threshold
};

inline constexpr double kConvergenceAccuracy = 0.85;

Convergence find_convergence(const std::vector<InteractionRecord>& records, const std::vector<EpochSummary>& epochs,
                             int window, double threshold = kConvergenceAccuracy);

struct SessionResult {
  std::vector<InteractionRecord> records;
  std::vector<EpochSummary> epochs;
  CalibrationReport calibration;
  EvaluationResult evaluation;
  Convergence convergence;
  bool resumed = false;
};

struct RunOptions {
  bool resume = false;
  std::function<void(const EpochSummary&)> on_epoch;
};

/// Output files written into `out_dir`.
namespace session_files {
inline constexpr const char* kLog = "session.jsonl";
inline constexpr const char* kCheckpoint = "checkpoint.xtm";
inline constexpr const char* kReport = "report.tsv";
inline constexpr const char* kCurve = "curve.tsv";
inline constexpr const char* kSummary = "summary.json";
inline constexpr const char* kConfig = "config.json";
}  // namespace session_files

/// Calibrate, run every epoch with a simulated user, checkpoint after each
/// epoch, then evaluate and write the report. With `resume`, continues from
/// the checkpoint in `out_dir`.
SessionResult run_session(const SessionConfig& config, std::shared_ptr<const CnnModel> cnn,
                          const std::filesystem::path& out_dir, const RunOptions& options = {});

/// Tab-separated per-epoch table: epoch, avg_cost, accuracy.
std::string format_report(const std::vector<EpochSummary>& epochs);

std::vector<InteractionRecord> read_session_log(const std::filesystem::path& path);

}  // namespace xtamer

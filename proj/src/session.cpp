#include "xtamer/session.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "xtamer/checkpoint.hpp"
#include "xtamer/errors.hpp"
#include "xtamer/text.hpp"

namespace xtamer {

using nlohmann::json;
using text::format_real;
using text::parse_u64;

namespace {

constexpr std::uint64_t kLearnerStream = 0x7A3E;
constexpr std::uint64_t kScheduleStream = 0x5C4E;
constexpr std::uint64_t kExploreStream = 0xE7B1;
constexpr std::uint64_t kSomStream = 0x50A0;
constexpr std::uint64_t kEvaluationStream = 0xE7A1;

json bmu_json(const BmuPosition& b) { return json{{"row", b.row}, {"col", b.col}}; }

BmuPosition bmu_from(const json& j, int rows, int cols) {
  return {j.at("row").get<int>(), j.at("col").get<int>(), rows, cols};
}

EpochSummary summarize_block(const std::vector<InteractionRecord>& records, std::size_t begin, std::size_t end,
                             int epoch) {
  EpochSummary s;
  s.epoch = epoch;
  s.interactions = int(end - begin);
  double sum = 0.0;
  int known = 0, hits = 0;
  for (std::size_t i = begin; i < end; ++i) {
    sum += records[i].cost;
    if (auto c = records[i].correct()) {
      ++known;
      hits += *c ? 1 : 0;
    }
  }
  s.avg_cost = s.interactions > 0 ? sum / double(s.interactions) : 0.0;
  s.accuracy = known > 0 ? double(hits) / double(known) : 0.0;
  return s;
}

}  // namespace

const char* phase_name(SessionPhase phase) {
  switch (phase) {
    case SessionPhase::idle: return "idle";
    case SessionPhase::calibrating: return "calibrating";
    case SessionPhase::training: return "training";
  }
  return "idle";
}

std::optional<bool> InteractionRecord::correct() const {
  if (!presented) return std::nullopt;
  return code(*presented) == greedy_action(predicted);
}

json record_to_json(const InteractionRecord& r) {
  json doc{
      {"index", r.index},
      {"presented", r.presented ? json(name(*r.presented)) : json(nullptr)},
      {"stimulus_bmu", bmu_json(r.stimulus_bmu)},
      {"action", r.action},
      {"explored", r.explored},
      {"predicted", r.predicted},
      {"reward", r.observed_reward},
      {"distance", r.distance ? json(*r.distance) : json(nullptr)},
      {"mimic_bmu", r.mimic_bmu ? bmu_json(*r.mimic_bmu) : json(nullptr)},
      {"cost", r.cost},
      {"timestamp", r.timestamp},
      {"grid", {r.stimulus_bmu.rows, r.stimulus_bmu.cols}},
  };
  return doc;
}

InteractionRecord record_from_json(const json& doc) {
  InteractionRecord r;
  try {
    r.index = doc.at("index").get<int>();
    const auto grid = doc.at("grid").get<std::array<int, 2>>();
    if (!doc.at("presented").is_null()) r.presented = parse_emotion(doc["presented"].get<std::string>());
    r.stimulus_bmu = bmu_from(doc.at("stimulus_bmu"), grid[0], grid[1]);
    r.action = doc.at("action").get<std::string>();
    decode_action(r.action);
    r.explored = doc.at("explored").get<bool>();
    r.predicted = doc.at("predicted").get<RewardPredictions>();
    r.observed_reward = doc.at("reward").get<double>();
    if (!doc.at("distance").is_null()) r.distance = doc["distance"].get<double>();
    if (!doc.at("mimic_bmu").is_null()) r.mimic_bmu = bmu_from(doc["mimic_bmu"], grid[0], grid[1]);
    r.cost = doc.at("cost").get<double>();
    r.timestamp = doc.at("timestamp").get<double>();
  } catch (const json::exception& e) {
    throw ParseError("record", e.what());
  }
  return r;
}

std::vector<EpochSummary> summarize_epochs(const std::vector<InteractionRecord>& records, int per_epoch) {
  if (per_epoch < 1) throw std::invalid_argument("per_epoch must be >= 1");
  std::vector<EpochSummary> out;
  const std::size_t n = std::size_t(per_epoch);
  for (std::size_t b = 0; b + n <= records.size(); b += n) out.push_back(summarize_block(records, b, b + n, int(b / n) + 1));
  return out;
}

std::optional<RewardOutcome> SimulatedRewardSource::obtain(const Session& session, std::optional<Emotion> presented,
                                                           const ExpressionAction& action,
                                                           const BmuPosition& stimulus_bmu) {
  if (config_.mode == RewardMode::mimicry) {
    const FaceImage mimic = user_.mimic_action(action);
    const auto m = mimicry_reward(session.som(), session.cnn(), stimulus_bmu, mimic, config_);
    return RewardOutcome{double(m.reward), m.distance, m.mimic_bmu};
  }
  if (!presented) throw std::logic_error("direct simulated reward needs the presented emotion");
  const Emotion reenacted = user_.sample_mimic_emotion(action);
  return RewardOutcome{reenacted == *presented ? kMaxReward : -kMaxReward, std::nullopt, std::nullopt};
}

Session::Session(SessionConfig config, std::shared_ptr<const CnnModel> cnn)
    : config_(std::move(config)),
      cnn_(std::move(cnn)),
      learner_([&] {
        auto opts = config_.learner;
        opts.seed = derive_seed(config_.seed, kLearnerStream);
        return opts;
      }()),
      schedule_rng_(derive_seed(config_.seed, kScheduleStream)),
      explore_rng_(derive_seed(config_.seed, kExploreStream)) {
  config_.validate();
  if (!cnn_) throw std::invalid_argument("session needs a CNN model");
}

const SomModel& Session::som() const {
  if (!som_) throw std::logic_error("session is not calibrated");
  return *som_;
}

CalibrationReport Session::calibrate(SimulatedUser& user) {
  phase_ = SessionPhase::calibrating;
  std::vector<FeatureVector> features;
  std::vector<LabeledFeature> labeled;
  for (int k = 0; k < config_.calibration_samples; ++k) {
    for (Emotion e : kAllEmotions) {
      auto f = forward_features(*cnn_, user.present_emotion(e));
      features.push_back(f);
      labeled.push_back({std::move(f), e});
    }
  }
  auto opts = config_.som;
  opts.seed = derive_seed(config_.seed, kSomStream);
  SomModel som = train_som(features, opts);
  CalibrationReport report;
  report.purity = label_map(som, labeled).purity;
  report.quantization_error = quantization_error(som, features);
  report.samples = int(features.size());
  som_ = std::move(som);
  calibration_ = report;
  phase_ = SessionPhase::training;
  return report;
}

void Session::set_som(SomModel som) {
  if (som.prototypes.rows() != Index(som.rows) * som.cols || som.prototypes.rows() == 0)
    throw ShapeError("SOM prototype count does not match its grid");
  som_ = std::move(som);
  phase_ = SessionPhase::training;
}

const Session::Pending& Session::present(const FaceImage& stimulus, std::optional<Emotion> presented, double now) {
  if (phase_ != SessionPhase::training || !som_) throw std::logic_error("session is not calibrated");
  if (pending_) throw std::logic_error("an interaction is already awaiting its reward");
  const BmuPosition bmu = best_matching_unit(*som_, forward_features(*cnn_, stimulus));
  Pending p;
  p.index = int(records_.size());
  p.presented = presented;
  p.stimulus_bmu = bmu;
  p.choice = learner_.select_action(bmu, config_.learner.epsilon > 0.0 ? &explore_rng_ : nullptr);
  p.started_at = now;
  pending_ = std::move(p);
  return *pending_;
}

const InteractionRecord& Session::complete(const RewardOutcome& outcome, double now) {
  if (!pending_) throw std::logic_error("no interaction is awaiting a reward");
  if (!(outcome.reward >= -kMaxReward && outcome.reward <= kMaxReward))
    throw std::invalid_argument("reward outside [-2, 2]");
  const Pending& p = *pending_;
  InteractionRecord r;
  r.index = p.index;
  r.presented = p.presented;
  r.stimulus_bmu = p.stimulus_bmu;
  r.action = encode_action(p.choice.action);
  r.explored = p.choice.explored;
  r.predicted = p.choice.predictions;
  r.observed_reward = outcome.reward;
  r.distance = outcome.distance;
  r.mimic_bmu = outcome.mimic_bmu;
  r.cost = learner_.update({p.stimulus_bmu, p.choice.action, outcome.reward});
  r.timestamp = now;
  pending_.reset();
  records_.push_back(std::move(r));
  const std::size_t n = std::size_t(config_.interactions_per_epoch);
  if (records_.size() % n == 0)
    epochs_.push_back(summarize_block(records_, records_.size() - n, records_.size(), int(records_.size() / n)));
  if (sink_) sink_(records_.back());
  return records_.back();
}

void Session::discard_pending() {
  if (!pending_) return;
  pending_.reset();
  ++discarded_;
}

std::optional<InteractionRecord> Session::run_interaction(const FaceImage& stimulus, std::optional<Emotion> presented,
                                                          RewardSource& source) {
  auto now = [&] { return clock_ ? clock_() : double(records_.size() + discarded_); };
  const Pending& p = present(stimulus, presented, now());
  const BmuPosition bmu = p.stimulus_bmu;
  const ExpressionAction action = p.choice.action;
  std::optional<RewardOutcome> outcome;
  try {
    outcome = source.obtain(*this, presented, action, bmu);
  } catch (...) {
    discard_pending();
    throw;
  }
  if (!outcome) {
    discard_pending();
    return std::nullopt;
  }
  return complete(*outcome, now());
}

EpochSummary Session::run_epoch(SimulatedUser& user, RewardSource& source) {
  const std::size_t n = std::size_t(config_.interactions_per_epoch);
  if (records_.size() % n != 0) throw std::logic_error("run_epoch must start on an epoch boundary");
  const std::size_t target = records_.size() + n;
  std::array<Emotion, kEmotionCount> cycle = kAllEmotions;
  std::size_t pos = kEmotionCount;
  while (records_.size() < target) {
    if (pos == kEmotionCount) {
      cycle = kAllEmotions;
      schedule_rng_.shuffle(std::span<Emotion>(cycle));
      pos = 0;
    }
    const Emotion e = cycle[pos++];
    run_interaction(user.present_emotion(e), e, source);
  }
  return epochs_.back();
}

EvaluationResult Session::evaluate(SimulatedUser& user, int samples_per_class) const {
  if (samples_per_class < 1) throw std::invalid_argument("samples_per_class must be >= 1");
  EvaluationResult out;
  int total_hits = 0;
  for (Emotion e : kAllEmotions) {
    int hits = 0;
    for (int k = 0; k < samples_per_class; ++k) {
      const BmuPosition bmu = best_matching_unit(som(), forward_features(*cnn_, user.present_emotion(e)));
      const auto shown = action_emotion(learner_.select_action(bmu).action);
      hits += (shown && *shown == e) ? 1 : 0;
    }
    out.per_class_accuracy[std::size_t(code(e))] = double(hits) / double(samples_per_class);
    if (2 * hits > samples_per_class) ++out.classes_correct;
    total_hits += hits;
  }
  out.overall_accuracy = double(total_hits) / double(samples_per_class * int(kEmotionCount));
  return out;
}

void Session::restore(SomModel som, RewardModel learner, std::vector<InteractionRecord> records,
                      std::optional<CalibrationReport> calibration, std::uint64_t discarded) {
  set_som(std::move(som));
  learner_ = std::move(learner);
  records_ = std::move(records);
  epochs_ = summarize_epochs(records_, config_.interactions_per_epoch);
  calibration_ = calibration;
  discarded_ = discarded;
  pending_.reset();
}

// ---------------------------------------------------------------------------

Convergence find_convergence(const std::vector<InteractionRecord>& records, const std::vector<EpochSummary>& epochs,
                             int window, double threshold) {
  Convergence c;
  for (const auto& e : epochs) {
    if (e.accuracy >= threshold) {
      c.epoch = e.epoch;
      break;
    }
  }
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  int hits = 0, known = 0;
  std::vector<int> flag(records.size(), -1);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (auto ok = records[i].correct()) {
      flag[i] = *ok ? 1 : 0;
      ++known;
      hits += flag[i];
    }
    if (i >= std::size_t(window)) {
      const int old = flag[i - std::size_t(window)];
      if (old >= 0) {
        --known;
        hits -= old;
      }
    }
    if (i + 1 >= std::size_t(window) && known > 0 && double(hits) / double(known) >= threshold) {
      c.interaction = int(i + 1);
      break;
    }
  }
  return c;
}

std::string format_report(const std::vector<EpochSummary>& epochs) {
  std::string out = "epoch\tavg_cost\taccuracy\n";
  for (const auto& e : epochs)
    out += std::to_string(e.epoch) + '\t' + format_real(e.avg_cost) + '\t' + format_real(e.accuracy) + '\n';
  return out;
}

std::vector<InteractionRecord> read_session_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<InteractionRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError("record", e.what());
    }
  }
  return out;
}

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void save_session_checkpoint(const fs::path& path, Session& session, const SimulatedUser& user) {
  Section sess;
  sess.tag = "SESS";
  sess.meta["records"] = std::to_string(session.records().size());
  sess.meta["discarded"] = std::to_string(session.discarded());
  sess.meta["schedule_rng"] = session.schedule_rng().state();
  sess.meta["explore_rng"] = session.exploration_rng().state();
  sess.meta["user_rng"] = user.rng().state();
  const auto cal = session.calibration().value_or(CalibrationReport{});
  sess.meta["calibration_samples"] = std::to_string(cal.samples);
  sess.values = Eigen::VectorXd(2);
  sess.values << cal.purity, cal.quantization_error;
  write_container(path, {sess, som_section(session.som()), session.learner().to_section()});
}

std::string curve_text(const std::vector<InteractionRecord>& records, int window) {
  std::string out = "interaction\tcost\tavg_cost\taccuracy\n";
  double cost_sum = 0.0;
  int hits = 0, known = 0;
  std::vector<int> flag(records.size(), -1);
  for (std::size_t i = 0; i < records.size(); ++i) {
    cost_sum += records[i].cost;
    if (auto ok = records[i].correct()) {
      flag[i] = *ok ? 1 : 0;
      ++known;
      hits += flag[i];
    }
    if (i >= std::size_t(window)) {
      cost_sum -= records[i - std::size_t(window)].cost;
      if (const int old = flag[i - std::size_t(window)]; old >= 0) {
        --known;
        hits -= old;
      }
    }
    const double n = double(std::min<std::size_t>(i + 1, std::size_t(window)));
    out += std::to_string(i + 1) + '\t' + format_real(records[i].cost) + '\t' + format_real(cost_sum / n) + '\t' +
           format_real(known > 0 ? double(hits) / double(known) : 0.0) + '\n';
  }
  return out;
}

json optional_int(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

json summary_json(const SessionResult& r, const Session& session) {
  json epochs = json::array();
  for (const auto& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"avg_cost", e.avg_cost}, {"accuracy", e.accuracy}, {"interactions", e.interactions}});
  return json{
      {"calibration",
       {{"purity", r.calibration.purity},
        {"quantization_error", r.calibration.quantization_error},
        {"samples", r.calibration.samples}}},
      {"epochs", epochs},
      {"evaluation",
       {{"per_class_accuracy", r.evaluation.per_class_accuracy},
        {"classes_correct", r.evaluation.classes_correct},
        {"overall_accuracy", r.evaluation.overall_accuracy}}},
      {"convergence", {{"epoch", optional_int(r.convergence.epoch)}, {"interaction", optional_int(r.convergence.interaction)}}},
      {"updates", session.learner().update_count()},
      {"discarded", session.discarded()},
  };
}

}  // namespace

SessionResult run_session(const SessionConfig& config, std::shared_ptr<const CnnModel> cnn, const fs::path& out_dir,
                          const RunOptions& options) {
  config.validate();
  fs::create_directories(out_dir);
  const fs::path log_path = out_dir / session_files::kLog;
  const fs::path ckpt_path = out_dir / session_files::kCheckpoint;

  const UserProfile profile = resolve_profile(config);
  SimulatedUser user(profile);
  Session session(config, std::move(cnn));
  SimulatedRewardSource source(user, config.reward);
  SessionResult result;

  if (options.resume && fs::exists(ckpt_path)) {
    const auto sections = read_container(ckpt_path);
    const Section& sess = find_section(sections, "SESS");
    const std::size_t n_records = std::size_t(parse_u64(sess.require("records"), "records"));
    auto records = fs::exists(log_path) ? read_session_log(log_path) : std::vector<InteractionRecord>{};
    if (records.size() < n_records) throw VersionError("session log is shorter than the checkpoint");
    records.resize(n_records);
    std::string kept;
    for (const auto& r : records) kept += record_to_json(r).dump() + '\n';
    write_text(log_path, kept);
    if (sess.values.size() != 2) throw VersionError("SESS section: expected 2 values");
    CalibrationReport cal{sess.values[0], sess.values[1],
                          int(parse_u64(sess.require("calibration_samples"), "calibration_samples"))};
    session.restore(som_from_section(find_section(sections, "SOM ")),
                    RewardModel::from_section(find_section(sections, "RWDM")), std::move(records), cal,
                    parse_u64(sess.require("discarded"), "discarded"));
    session.schedule_rng().restore(sess.require("schedule_rng"));
    session.exploration_rng().restore(sess.require("explore_rng"));
    user.rng().restore(sess.require("user_rng"));
    result.resumed = true;
  } else {
    write_text(log_path, "");
    if (config.som_model) {
      session.set_som(load_som(*config.som_model));
    } else {
      session.calibrate(user);
    }
    save_session_checkpoint(ckpt_path, session, user);
  }
  write_text(out_dir / session_files::kConfig, config_to_json(config).dump(2) + '\n');

  std::ofstream log(log_path, std::ios::binary | std::ios::app);
  if (!log) throw IoError("cannot append to " + log_path.string());
  session.set_record_sink([&](const InteractionRecord& r) {
    log << record_to_json(r).dump() << '\n';
    log.flush();
  });

  while (int(session.epochs().size()) < config.epochs) {
    const EpochSummary s = session.run_epoch(user, source);
    save_session_checkpoint(ckpt_path, session, user);
    if (options.on_epoch) options.on_epoch(s);
  }
  session.set_record_sink(nullptr);

  result.records = session.records();
  result.epochs = session.epochs();
  result.calibration = session.calibration().value_or(CalibrationReport{});
  if (config.evaluation_samples > 0) {
    UserProfile eval_profile = profile;
    eval_profile.seed = derive_seed(profile.seed, kEvaluationStream);
    SimulatedUser eval_user(eval_profile);
    result.evaluation = session.evaluate(eval_user, config.evaluation_samples);
  }
  result.convergence = find_convergence(result.records, result.epochs, config.interactions_per_epoch);

  write_text(out_dir / session_files::kReport, format_report(result.epochs));
  write_text(out_dir / session_files::kCurve, curve_text(result.records, config.interactions_per_epoch));
  write_text(out_dir / session_files::kSummary, summary_json(result, session).dump(2) + '\n');
  return result;
}

}  // namespace xtamer

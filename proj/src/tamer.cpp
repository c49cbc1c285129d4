#include "xtamer/tamer.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "xtamer/text.hpp"

namespace xtamer {

namespace {

constexpr const char* kSectionTag = "RWDM";

const char* feature_kind_name(ActionFeatureKind k) {
  return k == ActionFeatureKind::one_hot ? "one_hot" : "led_bits";
}

ActionFeatureKind parse_feature_kind(const std::string& s) {
  if (s == "one_hot") return ActionFeatureKind::one_hot;
  if (s == "led_bits") return ActionFeatureKind::led_bits;
  throw VersionError("unknown action feature kind '" + s + "'");
}

}  // namespace

int greedy_action(std::span<const double, kEmotionCount> predictions) {
  int best = 0;
  for (int i = 1; i < int(kEmotionCount); ++i)
    if (predictions[std::size_t(i)] > predictions[std::size_t(best)]) best = i;
  return best;
}

RewardModel::RewardModel(const RewardModelOptions& options) : options_(options) {
  if (options.hidden_units < 1) throw std::invalid_argument("hidden_units must be >= 1");
  if (!(options.learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
  if (!(options.epsilon >= 0.0 && options.epsilon <= 1.0)) throw std::invalid_argument("epsilon outside [0, 1]");
  if (!(std::abs(options.initial_prediction) < kMaxReward))
    throw std::invalid_argument("initial_prediction outside (-2, 2)");

  const Index actions = Index(action_feature_size(options.action_features));
  const Index in = 2 + actions;
  const Index hidden = options.hidden_units;
  Rng rng(derive_seed(options.seed, 0x7A3E));
  TensorD w1({hidden, in});
  TensorD b1({hidden});
  auto m1 = w1.matrix(hidden, in);
  for (Index j = 0; j < hidden; ++j) {
    const double u0 = rng.normal(0.0, options.state_init_scale);
    const double u1 = rng.normal(0.0, options.state_init_scale);
    m1(j, 0) = u0;
    m1(j, 1) = u1;
    for (Index k = 0; k < actions; ++k) m1(j, 2 + k) = rng.normal(0.0, options.action_init_scale);
    b1[j] = -(u0 * rng.uniform() + u1 * rng.uniform());
  }
  TensorD w2({1, hidden});
  if (!options.zero_output_layer) {
    const double s2 = 1.0 / std::sqrt(double(hidden));
    for (Index i = 0; i < w2.size(); ++i) w2[i] = rng.normal(0.0, s2);
  }
  net_.add(nn::Dense<double>{std::move(w1), std::move(b1), nn::ActivationSpec<double>::tanh()});
  TensorD b2({1});
  b2[0] = std::atanh(options.initial_prediction / kMaxReward);
  net_.add(nn::Dense<double>{std::move(w2), std::move(b2), nn::ActivationSpec<double>::scaled_tanh(kMaxReward)});
}

TensorD RewardModel::input_for(const BmuPosition& state, const ExpressionAction& action) const {
  const Eigen::VectorXd a = action_features(action, options_.action_features);
  const auto s = state.normalized();
  Eigen::VectorXd x(2 + a.size());
  x << s[0], s[1], a;
  const Index n = x.size();
  return TensorD({n}, std::move(x));
}

double RewardModel::predict_reward(const BmuPosition& state, const ExpressionAction& action) const {
  return net_.predict(input_for(state, action))[0];
}

RewardPredictions RewardModel::predict_all(const BmuPosition& state) const {
  RewardPredictions p{};
  for (std::size_t i = 0; i < kEmotionCount; ++i) p[i] = predict_reward(state, action_catalog()[i]);
  return p;
}

ActionChoice RewardModel::select_action(const BmuPosition& state, Rng* exploration) const {
  ActionChoice c;
  c.predictions = predict_all(state);
  int id = greedy_action(c.predictions);
  if (exploration && options_.epsilon > 0.0 && exploration->bernoulli(options_.epsilon)) {
    id = int(exploration->below(kEmotionCount));
    c.explored = true;
  }
  c.action = action_catalog()[std::size_t(id)];
  return c;
}

double RewardModel::update(const RewardSample& sample) {
  if (!(sample.reward >= -kMaxReward && sample.reward <= kMaxReward))
    throw std::invalid_argument("reward " + text::format_real(sample.reward) + " outside [-2, 2]");
  const auto cache = net_.forward(input_for(sample.state, sample.action));
  const double error = cache.output()[0] - sample.reward;
  const double cost = error * error;
  const auto grads = nn::backward(net_, cache, TensorD({1}, {2.0 * error}), /*need_input_grad=*/false);
  if (!nn::sgd_step(net_, grads, options_.learning_rate))
    throw std::runtime_error("reward model update refused: non-finite gradient");
  ++update_count_;
  return cost;
}

Section RewardModel::to_section() const {
  Section s;
  s.tag = kSectionTag;
  s.meta["arch"] = "dense=" + std::to_string(net_.parameters()[0]->dim(1)) + "x" +
                   std::to_string(options_.hidden_units) + "x1";
  s.meta["hidden_units"] = std::to_string(options_.hidden_units);
  s.meta["learning_rate"] = text::format_real(options_.learning_rate);
  s.meta["epsilon"] = text::format_real(options_.epsilon);
  s.meta["state_init_scale"] = text::format_real(options_.state_init_scale);
  s.meta["action_init_scale"] = text::format_real(options_.action_init_scale);
  s.meta["zero_output_layer"] = options_.zero_output_layer ? "1" : "0";
  s.meta["initial_prediction"] = text::format_real(options_.initial_prediction);
  s.meta["action_features"] = feature_kind_name(options_.action_features);
  s.meta["seed"] = std::to_string(options_.seed);
  s.meta["update_count"] = std::to_string(update_count_);
  s.values = nn::flatten_parameters(net_);
  return s;
}

RewardModel RewardModel::from_section(const Section& s) {
  if (s.tag != kSectionTag) throw VersionError("not a reward model section: '" + s.tag + "'");
  RewardModelOptions o;
  o.hidden_units = int(text::parse_u64(s.require("hidden_units"), "hidden_units"));
  o.learning_rate = text::parse_real(s.require("learning_rate"), "learning_rate");
  o.epsilon = text::parse_real(s.require("epsilon"), "epsilon");
  o.state_init_scale = text::parse_real(s.require("state_init_scale"), "state_init_scale");
  o.action_init_scale = text::parse_real(s.require("action_init_scale"), "action_init_scale");
  o.zero_output_layer = s.require("zero_output_layer") == "1";
  o.initial_prediction = text::parse_real(s.require("initial_prediction"), "initial_prediction");
  o.action_features = parse_feature_kind(s.require("action_features"));
  o.seed = text::parse_u64(s.require("seed"), "seed");
  RewardModel m(o);
  if (s.values.size() != m.net_.parameter_count()) throw VersionError("reward model parameter count mismatch");
  nn::assign_parameters(m.net_, s.values);
  m.update_count_ = text::parse_u64(s.require("update_count"), "update_count");
  return m;
}

bool operator==(const RewardModel& a, const RewardModel& b) {
  const auto pa = nn::flatten_parameters(a.net_), pb = nn::flatten_parameters(b.net_);
  return a.update_count_ == b.update_count_ && pa.size() == pb.size() && (pa.array() == pb.array()).all();
}

double epoch_cost(std::span<const double> costs) {
  if (costs.empty()) throw std::invalid_argument("epoch_cost: no costs");
  return std::accumulate(costs.begin(), costs.end(), 0.0) / double(costs.size());
}

void save_reward_model(const std::filesystem::path& path, const RewardModel& model) {
  write_container(path, {model.to_section()});
}

RewardModel load_reward_model(const std::filesystem::path& path) {
  return RewardModel::from_section(find_section(read_container(path), kSectionTag));
}

}  // namespace xtamer

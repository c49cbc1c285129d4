#include "xtamer/cnn.hpp"

#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>

#include "xtamer/checkpoint.hpp"
#include "xtamer/rng.hpp"
#include "xtamer/text.hpp"

namespace xtamer {

namespace {

constexpr const char* kSectionTag = "CNN ";
constexpr const char* kArchitecture = "conv1=8x1x5x5;conv2=16x8x5x5;head=7x2704";

TensorD he_normal(Shape shape, Index fan_in, Rng& rng) {
  TensorD t(std::move(shape));
  const double stddev = std::sqrt(2.0 / double(fan_in));
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

Index argmax_lowest(const Eigen::VectorXd& v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

CnnModel::CnnModel() = default;

CnnModel CnnModel::initialize(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xC77));
  CnnModel m;
  const Index k2 = kKernel * kKernel;
  m.encoder_.add(nn::Conv2d<double>{he_normal({kConv1Channels, 1, kKernel, kKernel}, k2, rng),
                                    TensorD({kConv1Channels})});
  m.encoder_.add(nn::Activation<double>{nn::ActivationSpec<double>::relu()});
  m.encoder_.add(nn::MaxPool2d{2});
  m.encoder_.add(nn::L1Normalize{});
  m.encoder_.add(nn::Scale<double>{double(kConv1Channels * 30 * 30)});
  m.encoder_.add(nn::Conv2d<double>{
      he_normal({kConv2Channels, kConv1Channels, kKernel, kKernel}, kConv1Channels * k2, rng),
      TensorD({kConv2Channels})});
  m.encoder_.add(nn::Activation<double>{nn::ActivationSpec<double>::relu()});
  m.encoder_.add(nn::MaxPool2d{2});
  m.encoder_.add(nn::L2Normalize{});
  m.encoder_.add(nn::Flatten{});
  m.head_.add(nn::Dense<double>{TensorD({Index(kEmotionCount), kFeatureDim}),
                                TensorD({Index(kEmotionCount)}), nn::ActivationSpec<double>::linear()});
  m.meta.seed = seed;
  return m;
}

bool operator==(const CnnModel& a, const CnnModel& b) {
  const auto pa = nn::flatten_parameters(a.encoder_), pb = nn::flatten_parameters(b.encoder_);
  const auto ha = nn::flatten_parameters(a.head_), hb = nn::flatten_parameters(b.head_);
  return pa.size() == pb.size() && ha.size() == hb.size() && (pa.array() == pb.array()).all() &&
         (ha.array() == hb.array()).all();
}

FeatureVector forward_features(const CnnModel& model, const FaceImage& image) {
  return model.encoder().predict(image.to_tensor()).data();
}

Classification classify(const CnnModel& model, const FaceImage& image) {
  const TensorD features(Shape{CnnModel::kFeatureDim}, forward_features(model, image));
  const Eigen::VectorXd p = softmax(model.head().predict(features).data());
  Classification c{Emotion::neutral, {}};
  for (std::size_t i = 0; i < kEmotionCount; ++i) c.probabilities[i] = p[Index(i)];
  c.label = *emotion_from_code(long(argmax_lowest(p)));
  return c;
}

std::vector<LabeledImage> load_labeled_images(const DatasetManifest& manifest) {
  std::vector<LabeledImage> out;
  out.reserve(manifest.records.size());
  for (const auto& r : manifest.records) out.push_back({load_pgm(manifest.path_of(r)), r.label});
  return out;
}

PretrainResult pretrain(const std::vector<LabeledImage>& data, const PretrainOptions& options,
                        const EpochCallback& on_epoch) {
  std::array<bool, kEmotionCount> seen{};
  for (const auto& d : data) seen[std::size_t(code(d.label))] = true;
  for (std::size_t c = 0; c < kEmotionCount; ++c)
    if (!seen[c])
      throw std::invalid_argument("pretraining data lacks class '" +
                                  std::string(name(*emotion_from_code(long(c)))) + "'");
  if (options.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (options.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(options.learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");

  PretrainResult result{CnnModel::initialize(options.seed), {}};
  CnnModel& model = result.model;
  Rng rng(derive_seed(options.seed, 0x5EED));

  std::vector<TensorD> inputs;
  inputs.reserve(data.size());
  for (const auto& d : data) inputs.push_back(d.image.to_tensor());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(options.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + std::size_t(options.batch_size));
      nn::Grads<double> enc_grads, head_grads;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t idx = order[k];
        const auto enc = model.encoder().forward(inputs[idx]);
        const auto head = model.head().forward(enc.output());
        const Eigen::VectorXd p = softmax(head.output().data());
        const Index y = code(data[idx].label);
        loss_sum += -std::log(std::max(p[y], 1e-300));
        if (argmax_lowest(p) == y) ++correct;

        TensorD upstream(Shape{Index(kEmotionCount)}, p);
        upstream[y] -= 1.0;
        auto hg = nn::backward(model.head(), head, upstream);
        auto eg = nn::backward(model.encoder(), enc, hg.input, /*need_input_grad=*/false);
        head_grads += hg;
        enc_grads += eg;
      }
      const double scale = 1.0 / double(stop - start);
      head_grads *= scale;
      enc_grads *= scale;
      // A refused step (non-finite gradient) skips this batch.
      if (nn::sgd_step(model.head(), head_grads, options.learning_rate))
        (void)nn::sgd_step(model.encoder(), enc_grads, options.learning_rate);
    }
    EpochStats stats{epoch, loss_sum / double(data.size()), double(correct) / double(data.size())};
    result.history.push_back(stats);
    model.meta.epochs = epoch;
    model.meta.final_loss = stats.loss;
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

PretrainResult pretrain(const DatasetManifest& dataset, const PretrainOptions& options,
                        const EpochCallback& on_epoch) {
  if (!dataset.covers_all_classes()) throw std::invalid_argument("dataset does not cover all 7 classes");
  return pretrain(load_labeled_images(dataset), options, on_epoch);
}

double classification_accuracy(const CnnModel& model, const std::vector<LabeledImage>& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& d : data)
    if (classify(model, d.image).label == d.label) ++correct;
  return double(correct) / double(data.size());
}

void save_model(const std::filesystem::path& path, const CnnModel& model) {
  Section s;
  s.tag = kSectionTag;
  s.meta["arch"] = kArchitecture;
  s.meta["epochs"] = std::to_string(model.meta.epochs);
  s.meta["final_loss"] = text::format_real(model.meta.final_loss);
  s.meta["seed"] = std::to_string(model.meta.seed);
  const auto enc = nn::flatten_parameters(model.encoder());
  const auto head = nn::flatten_parameters(model.head());
  s.values.resize(enc.size() + head.size());
  s.values << enc, head;
  write_container(path, {s});
}

CnnModel load_model(const std::filesystem::path& path) {
  const auto sections = read_container(path);
  const Section& s = find_section(sections, kSectionTag);
  if (s.require("arch") != kArchitecture)
    throw VersionError("unsupported CNN architecture '" + s.require("arch") + "'");
  CnnModel m = CnnModel::initialize(0);
  const Index n_enc = m.encoder().parameter_count();
  if (s.values.size() != n_enc + m.head().parameter_count())
    throw VersionError("CNN checkpoint parameter count mismatch");
  nn::assign_parameters(m.encoder(), Eigen::VectorXd(s.values.head(n_enc)));
  nn::assign_parameters(m.head(), Eigen::VectorXd(s.values.tail(s.values.size() - n_enc)));
  m.meta.epochs = int(text::parse_u64(s.require("epochs"), "epochs"));
  m.meta.final_loss = text::parse_real(s.require("final_loss"), "final_loss");
  m.meta.seed = text::parse_u64(s.require("seed"), "seed");
  return m;
}

}  // namespace xtamer

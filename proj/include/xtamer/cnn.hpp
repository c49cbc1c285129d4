#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "xtamer/emotion.hpp"
#include "xtamer/face_synth.hpp"
#include "xtamer/network.hpp"

namespace xtamer {

/// Unit-L2-norm CNN embedding of a face image.
using FeatureVector = Eigen::VectorXd;

struct CnnTrainingMeta {
  int epochs = 0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;
};

/// Perception network: conv(8x1x5x5) -> relu -> pool -> L1 -> conv(16x8x5x5)
/// -> relu -> pool -> L2 -> flatten, plus a linear 7-way head used only for
/// pretraining.
class CnnModel {
 public:
  static constexpr Index kConv1Channels = 8;
  static constexpr Index kConv2Channels = 16;
  static constexpr Index kKernel = 5;
  static constexpr Index kFeatureDim = 16 * 13 * 13;  // 64 -> 60 -> 30 -> 26 -> 13

  /// He-normal convolution kernels, zero biases, zero head.
  static CnnModel initialize(std::uint64_t seed);

  const nn::Network<double>& encoder() const noexcept { return encoder_; }
  nn::Network<double>& encoder() noexcept { return encoder_; }
  const nn::Network<double>& head() const noexcept { return head_; }
  nn::Network<double>& head() noexcept { return head_; }

  CnnTrainingMeta meta;

  friend bool operator==(const CnnModel& a, const CnnModel& b);

 private:
  CnnModel();

  nn::Network<double> encoder_;
  nn::Network<double> head_;
};

FeatureVector forward_features(const CnnModel& model, const FaceImage& image);

struct Classification {
  Emotion label;
  std::array<double, kEmotionCount> probabilities;
};

Classification classify(const CnnModel& model, const FaceImage& image);

struct PretrainOptions {
  int epochs = 30;
  double learning_rate = 0.2;
  int batch_size = 8;
  std::uint64_t seed = 1;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;      // mean cross-entropy over the epoch's samples
  double accuracy = 0.0;  // running training accuracy during the epoch
};

struct LabeledImage {
  FaceImage image;
  Emotion label;
};

struct PretrainResult {
  CnnModel model;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch SGD on softmax cross-entropy. Throws std::invalid_argument if
/// any emotion class is missing from the data.
PretrainResult pretrain(const std::vector<LabeledImage>& data, const PretrainOptions& options,
                        const EpochCallback& on_epoch = {});

std::vector<LabeledImage> load_labeled_images(const DatasetManifest& manifest);

PretrainResult pretrain(const DatasetManifest& dataset, const PretrainOptions& options,
                        const EpochCallback& on_epoch = {});

double classification_accuracy(const CnnModel& model, const std::vector<LabeledImage>& data);

void save_model(const std::filesystem::path& path, const CnnModel& model);

/// Throws ChecksumError / VersionError for corrupt or foreign files.
CnnModel load_model(const std::filesystem::path& path);

}  // namespace xtamer

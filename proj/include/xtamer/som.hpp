#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "xtamer/checkpoint.hpp"
#include "xtamer/cnn.hpp"
#include "xtamer/emotion.hpp"
#include "xtamer/rng.hpp"

namespace xtamer {

/// Winning unit on a rows x cols grid.
struct BmuPosition {
  int row = 0;
  int col = 0;
  int rows = 1;
  int cols = 1;

  /// (row / (rows-1), col / (cols-1)); 0 along a degenerate axis.
  std::array<double, 2> normalized() const {
    return {rows > 1 ? double(row) / double(rows - 1) : 0.0,
            cols > 1 ? double(col) / double(cols - 1) : 0.0};
  }

  friend bool operator==(const BmuPosition&, const BmuPosition&) = default;
};

struct SomOptions {
  int rows = 20;
  int cols = 20;
  int iterations = 3000;
  double learning_rate0 = 0.5;
  double radius0 = 10.0;
  std::uint64_t seed = 1;
};

struct SomModel {
  int rows = 20;
  int cols = 20;
  /// One prototype per row, unit index = row * cols + col.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> prototypes;
  SomOptions options;
  int iterations_done = 0;

  Index dimension() const { return prototypes.cols(); }
  Index units() const { return prototypes.rows(); }
  BmuPosition position(Index unit) const {
    return {int(unit / cols), int(unit % cols), rows, cols};
  }
};

/// Learning rate decays exponentially from lr0 to lr0/100 and the Gaussian
/// neighbourhood radius from radius0 to 1 over the planned iterations.
struct SomSchedule {
  int total_iterations;
  double learning_rate0;
  double radius0;

  double learning_rate(int t) const;
  double radius(int t) const;
};

/// Online SOM training that can be paused and resumed; running i then j
/// iterations is identical to running i + j at once.
class SomTrainer {
 public:
  /// Prototypes start uniform within the per-dimension range of `features`.
  SomTrainer(std::vector<FeatureVector> features, const SomOptions& options);

  /// Advance up to `n` iterations (never past the planned total).
  void run(int n);
  void run_to_completion() { run(schedule_.total_iterations - model_.iterations_done); }

  const SomModel& model() const noexcept { return model_; }
  int iteration() const noexcept { return model_.iterations_done; }
  bool done() const noexcept { return model_.iterations_done >= schedule_.total_iterations; }
  const Rng& rng() const noexcept { return rng_; }

 private:
  std::vector<FeatureVector> features_;
  SomSchedule schedule_;
  SomModel model_;
  Rng rng_;
};

/// Throws std::invalid_argument on empty input or non-positive iterations.
SomModel train_som(const std::vector<FeatureVector>& features, const SomOptions& options);

/// Euclidean argmin; ties resolve to the smallest row, then smallest column.
BmuPosition best_matching_unit(const SomModel& model, const FeatureVector& v);

/// Grid distance between normalized coordinates divided by sqrt(2), in [0, 1].
double normalized_bmu_distance(const BmuPosition& a, const BmuPosition& b);

/// Mean distance from each sample to its BMU prototype.
double quantization_error(const SomModel& model, const std::vector<FeatureVector>& features);

struct LabeledFeature {
  FeatureVector features;
  Emotion label;
};

struct LabelMap {
  std::vector<Emotion> unit_labels;  // per unit, row-major
  std::vector<int> hits;             // samples mapped to each unit
  double purity = 0.0;
};

/// Majority vote per unit (ties to the lowest emotion code); unvisited units
/// copy the nearest visited unit on the grid.
LabelMap label_map(const SomModel& model, const std::vector<LabeledFeature>& samples);

void save_som(const std::filesystem::path& path, const SomModel& model);
SomModel load_som(const std::filesystem::path& path);

Section som_section(const SomModel& model);
SomModel som_from_section(const Section& section);

}  // namespace xtamer

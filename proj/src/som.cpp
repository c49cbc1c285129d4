#include "xtamer/som.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "xtamer/checkpoint.hpp"
#include "xtamer/errors.hpp"
#include "xtamer/text.hpp"

namespace xtamer {

namespace {

constexpr const char* kSectionTag = "SOM ";

// Neighbourhood weights below this are skipped; their update is far below
// the resolution of the prototypes.
constexpr double kNeighbourhoodCutoff = 1e-12;

double progress(int t, int total) { return total > 1 ? double(t) / double(total - 1) : 0.0; }

void check_options(const SomOptions& o) {
  if (o.rows < 1 || o.cols < 1) throw std::invalid_argument("SOM grid must be at least 1x1");
  if (o.iterations < 1) throw std::invalid_argument("SOM iterations must be >= 1");
  if (!(o.learning_rate0 > 0.0)) throw std::invalid_argument("SOM learning rate must be > 0");
  if (!(o.radius0 >= 1.0)) throw std::invalid_argument("SOM radius must be >= 1");
}

}  // namespace

double SomSchedule::learning_rate(int t) const {
  return learning_rate0 * std::pow(0.01, progress(t, total_iterations));
}

double SomSchedule::radius(int t) const {
  return radius0 * std::pow(1.0 / radius0, progress(t, total_iterations));
}

SomTrainer::SomTrainer(std::vector<FeatureVector> features, const SomOptions& options)
    : features_(std::move(features)),
      schedule_{options.iterations, options.learning_rate0, options.radius0},
      rng_(derive_seed(options.seed, 0x50AA)) {
  if (features_.empty()) throw std::invalid_argument("train_som: no features");
  check_options(options);
  const Index dim = features_.front().size();
  Eigen::VectorXd lo = features_.front(), hi = features_.front();
  for (const auto& f : features_) {
    if (f.size() != dim) throw ShapeError("train_som: feature dimensions differ");
    lo = lo.cwiseMin(f);
    hi = hi.cwiseMax(f);
  }
  model_.rows = options.rows;
  model_.cols = options.cols;
  model_.options = options;
  model_.prototypes.resize(Index(options.rows) * options.cols, dim);
  for (Index u = 0; u < model_.units(); ++u)
    for (Index d = 0; d < dim; ++d) model_.prototypes(u, d) = rng_.uniform(lo[d], hi[d]);
}

void SomTrainer::run(int n) {
  const int stop = std::min(schedule_.total_iterations, model_.iterations_done + std::max(n, 0));
  for (int t = model_.iterations_done; t < stop; ++t) {
    const auto& x = features_[std::size_t(rng_.below(features_.size()))];
    const BmuPosition bmu = best_matching_unit(model_, x);
    const double lr = schedule_.learning_rate(t);
    const double sigma = schedule_.radius(t);
    const double inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
    for (Index u = 0; u < model_.units(); ++u) {
      const double dr = double(u / model_.cols - bmu.row), dc = double(u % model_.cols - bmu.col);
      const double h = std::exp(-(dr * dr + dc * dc) * inv_two_sigma2);
      if (h < kNeighbourhoodCutoff) continue;
      model_.prototypes.row(u) += (lr * h) * (x.transpose() - model_.prototypes.row(u));
    }
    model_.iterations_done = t + 1;
  }
}

SomModel train_som(const std::vector<FeatureVector>& features, const SomOptions& options) {
  SomTrainer trainer(features, options);
  trainer.run_to_completion();
  return trainer.model();
}

BmuPosition best_matching_unit(const SomModel& model, const FeatureVector& v) {
  if (v.size() != model.dimension())
    throw ShapeError("best_matching_unit: feature of " + std::to_string(v.size()) +
                     " values vs prototypes of " + std::to_string(model.dimension()));
  const Eigen::VectorXd d2 = (model.prototypes.rowwise() - v.transpose()).rowwise().squaredNorm();
  Index best = 0;
  for (Index u = 1; u < d2.size(); ++u)
    if (d2[u] < d2[best]) best = u;
  return model.position(best);
}

double normalized_bmu_distance(const BmuPosition& a, const BmuPosition& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw std::invalid_argument("normalized_bmu_distance: positions from different grids");
  const auto na = a.normalized(), nb = b.normalized();
  return std::hypot(na[0] - nb[0], na[1] - nb[1]) / std::sqrt(2.0);
}

double quantization_error(const SomModel& model, const std::vector<FeatureVector>& features) {
  if (features.empty()) throw std::invalid_argument("quantization_error: no features");
  double total = 0.0;
  for (const auto& f : features) {
    const BmuPosition p = best_matching_unit(model, f);
    total += (model.prototypes.row(Index(p.row) * model.cols + p.col).transpose() - f).norm();
  }
  return total / double(features.size());
}

LabelMap label_map(const SomModel& model, const std::vector<LabeledFeature>& samples) {
  if (samples.empty()) throw std::invalid_argument("label_map: no samples");
  const std::size_t units = std::size_t(model.units());
  std::vector<std::array<int, kEmotionCount>> votes(units, std::array<int, kEmotionCount>{});
  std::vector<std::size_t> sample_unit;
  sample_unit.reserve(samples.size());
  for (const auto& s : samples) {
    const BmuPosition p = best_matching_unit(model, s.features);
    const std::size_t u = std::size_t(p.row) * std::size_t(model.cols) + std::size_t(p.col);
    ++votes[u][std::size_t(code(s.label))];
    sample_unit.push_back(u);
  }

  LabelMap m;
  m.unit_labels.assign(units, Emotion::neutral);
  m.hits.assign(units, 0);
  std::vector<std::size_t> visited;
  for (std::size_t u = 0; u < units; ++u) {
    std::size_t best = 0;
    for (std::size_t c = 0; c < kEmotionCount; ++c) {
      m.hits[u] += votes[u][c];
      if (votes[u][c] > votes[u][best]) best = c;
    }
    if (m.hits[u] > 0) {
      m.unit_labels[u] = *emotion_from_code(long(best));
      visited.push_back(u);
    }
  }
  for (std::size_t u = 0; u < units; ++u) {
    if (m.hits[u] > 0) continue;
    const int r = int(u) / model.cols, c = int(u) % model.cols;
    std::size_t nearest = visited.front();
    int nearest_d2 = std::numeric_limits<int>::max();
    for (std::size_t v : visited) {
      const int dr = int(v) / model.cols - r, dc = int(v) % model.cols - c;
      if (dr * dr + dc * dc < nearest_d2) {
        nearest_d2 = dr * dr + dc * dc;
        nearest = v;
      }
    }
    m.unit_labels[u] = m.unit_labels[nearest];
  }

  std::size_t pure = 0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (m.unit_labels[sample_unit[i]] == samples[i].label) ++pure;
  m.purity = double(pure) / double(samples.size());
  return m;
}

Section som_section(const SomModel& model) {
  Section s;
  s.tag = kSectionTag;
  s.meta["rows"] = std::to_string(model.rows);
  s.meta["cols"] = std::to_string(model.cols);
  s.meta["dim"] = std::to_string(model.dimension());
  s.meta["iterations"] = std::to_string(model.options.iterations);
  s.meta["iterations_done"] = std::to_string(model.iterations_done);
  s.meta["learning_rate0"] = text::format_real(model.options.learning_rate0);
  s.meta["radius0"] = text::format_real(model.options.radius0);
  s.meta["seed"] = std::to_string(model.options.seed);
  s.values = Eigen::Map<const Eigen::VectorXd>(model.prototypes.data(), model.prototypes.size());
  return s;
}

SomModel som_from_section(const Section& s) {
  SomModel m;
  m.rows = int(text::parse_u64(s.require("rows"), "rows"));
  m.cols = int(text::parse_u64(s.require("cols"), "cols"));
  const auto dim = Index(text::parse_u64(s.require("dim"), "dim"));
  m.options.rows = m.rows;
  m.options.cols = m.cols;
  m.options.iterations = int(text::parse_u64(s.require("iterations"), "iterations"));
  m.iterations_done = int(text::parse_u64(s.require("iterations_done"), "iterations_done"));
  m.options.learning_rate0 = text::parse_real(s.require("learning_rate0"), "learning_rate0");
  m.options.radius0 = text::parse_real(s.require("radius0"), "radius0");
  m.options.seed = text::parse_u64(s.require("seed"), "seed");
  if (s.values.size() != Index(m.rows) * m.cols * dim) throw VersionError("SOM checkpoint size mismatch");
  m.prototypes = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      s.values.data(), Index(m.rows) * m.cols, dim);
  return m;
}

void save_som(const std::filesystem::path& path, const SomModel& model) {
  write_container(path, {som_section(model)});
}

SomModel load_som(const std::filesystem::path& path) {
  return som_from_section(find_section(read_container(path), kSectionTag));
}

}  // namespace xtamer

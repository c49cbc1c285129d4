#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xtamer/emotion.hpp"
#include "xtamer/tensor.hpp"

namespace xtamer {

/// 64x64 grayscale raster, intensities in [0, 1], row-major.
class FaceImage {
 public:
  static constexpr Index kSide = 64;
  using Pixels = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  FaceImage() : pixels_(Pixels::Zero(kSide, kSide)) {}
  explicit FaceImage(Pixels pixels);

  const Pixels& pixels() const noexcept { return pixels_; }
  double operator()(Index row, Index col) const { return pixels_(row, col); }

  /// 1 x 64 x 64 tensor for the perception network.
  TensorD to_tensor() const;

  friend bool operator==(const FaceImage& a, const FaceImage& b) {
    return (a.pixels_.array() == b.pixels_.array()).all();
  }

 private:
  Pixels pixels_;
};

/// Per-person face geometry. Bounds are closed intervals.
struct IdentityParams {
  double face_width_ratio = 0.70;  // [0.62, 0.78] of image width
  double eye_spacing = 0.375;      // [0.30, 0.45] eye-center distance / face width
  double eye_height = 0.41;        // [0.36, 0.46] eye line / face height, from top
  double brow_thickness = 1.8;     // [1.2, 2.4] pixels
  double mouth_width = 0.39;       // [0.32, 0.46] / face width
  double skin_tone = 0.70;         // [0.55, 0.85] intensity
  std::uint64_t seed = 0;

  /// Mid-range identity used for canonical renders.
  static IdentityParams canonical() { return {}; }

  /// Deterministic identity drawn uniformly inside the bounds.
  static IdentityParams from_seed(std::uint64_t seed);

  /// Throws std::invalid_argument naming the first out-of-bound field.
  void validate() const;

  friend bool operator==(const IdentityParams&, const IdentityParams&) = default;
};

/// Facial configuration of one emotion. Neutral is all-rest: zero angle,
/// raise, curvature, opening, asymmetry and unit eye/mouth scale.
struct ExpressionGeometry {
  double brow_angle;       // >0 slants inner ends down (anger), <0 raises them (sadness)
  double brow_raise;       // fraction of face height
  double eye_open;         // multiplier on eye aperture
  double mouth_curve;      // >0 upturned corners, <0 downturned
  double mouth_open;       // lip separation, 0 closed
  double mouth_width;      // multiplier on identity mouth width
  double mouth_asymmetry;  // one-sided corner lift
};

ExpressionGeometry expression_geometry(Emotion emotion);

inline constexpr double kMaxNoise = 0.2;

/// Deterministic given all arguments. Throws std::invalid_argument when
/// `noise` is outside [0, 0.2].
FaceImage render_face(Emotion emotion, const IdentityParams& identity, double noise,
                      std::uint64_t rng_seed);

// ---------------------------------------------------------------------------
// Datasets

struct ManifestRecord {
  std::string file;
  Emotion label;
  std::uint64_t identity_seed;
  double noise;
};

struct DatasetManifest {
  std::filesystem::path directory;
  std::vector<ManifestRecord> records;

  std::filesystem::path path_of(const ManifestRecord& r) const { return directory / r.file; }
  bool covers_all_classes() const;
};

inline constexpr const char* kManifestName = "manifest.tsv";

/// Writes 7 * n_per_class PGM images plus manifest.tsv into `out_dir`
/// (created if absent). Identities are cycled across classes.
DatasetManifest generate_dataset(const std::filesystem::path& out_dir, int n_per_class,
                                 int n_identities, double noise, std::uint64_t seed);

/// Reads `dir/manifest.tsv`; verifies every referenced file exists.
DatasetManifest read_manifest(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// PGM (binary P5, 8-bit)

std::string encode_pgm(const FaceImage& image);
FaceImage decode_pgm(const std::string& bytes);
void save_pgm(const std::filesystem::path& path, const FaceImage& image);
FaceImage load_pgm(const std::filesystem::path& path);

}  // namespace xtamer

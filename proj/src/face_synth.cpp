#include "xtamer/face_synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "xtamer/errors.hpp"
#include "xtamer/rng.hpp"
#include "xtamer/text.hpp"

namespace xtamer {

FaceImage::FaceImage(Pixels pixels) : pixels_(std::move(pixels)) {
  if (pixels_.rows() != kSide || pixels_.cols() != kSide)
    throw ShapeError("FaceImage must be 64x64, got " + std::to_string(pixels_.rows()) + "x" +
                     std::to_string(pixels_.cols()));
  if (!pixels_.allFinite() || pixels_.minCoeff() < 0.0 || pixels_.maxCoeff() > 1.0)
    throw std::invalid_argument("FaceImage pixels must lie in [0, 1]");
}

TensorD FaceImage::to_tensor() const {
  return TensorD({1, kSide, kSide}, Eigen::Map<const TensorD::Vector>(pixels_.data(), pixels_.size()));
}

// ---------------------------------------------------------------------------

namespace {

struct Bound {
  const char* name;
  double lo, hi;
};

constexpr Bound kFaceWidth{"face_width_ratio", 0.62, 0.78};
constexpr Bound kEyeSpacing{"eye_spacing", 0.30, 0.45};
constexpr Bound kEyeHeight{"eye_height", 0.36, 0.46};
constexpr Bound kBrowThickness{"brow_thickness", 1.2, 2.4};
constexpr Bound kMouthWidth{"mouth_width", 0.32, 0.46};
constexpr Bound kSkinTone{"skin_tone", 0.55, 0.85};

void check(const Bound& b, double v) {
  if (!(v >= b.lo && v <= b.hi))
    throw std::invalid_argument(std::string(b.name) + " = " + text::format_real(v) + " outside [" +
                                text::format_real(b.lo) + ", " + text::format_real(b.hi) + "]");
}

constexpr double kBackground = 0.12;
constexpr double kFeatureInk = 0.08;
constexpr int kSupersample = 4;

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double t = std::clamp(((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy), 0.0, 1.0);
  return std::hypot(px - (ax + t * dx), py - (ay + t * dy));
}

}  // namespace

IdentityParams IdentityParams::from_seed(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x1D));
  IdentityParams p;
  p.face_width_ratio = rng.uniform(kFaceWidth.lo, kFaceWidth.hi);
  p.eye_spacing = rng.uniform(kEyeSpacing.lo, kEyeSpacing.hi);
  p.eye_height = rng.uniform(kEyeHeight.lo, kEyeHeight.hi);
  p.brow_thickness = rng.uniform(kBrowThickness.lo, kBrowThickness.hi);
  p.mouth_width = rng.uniform(kMouthWidth.lo, kMouthWidth.hi);
  p.skin_tone = rng.uniform(kSkinTone.lo, kSkinTone.hi);
  p.seed = seed;
  return p;
}

void IdentityParams::validate() const {
  check(kFaceWidth, face_width_ratio);
  check(kEyeSpacing, eye_spacing);
  check(kEyeHeight, eye_height);
  check(kBrowThickness, brow_thickness);
  check(kMouthWidth, mouth_width);
  check(kSkinTone, skin_tone);
}

ExpressionGeometry expression_geometry(Emotion emotion) {
  switch (emotion) {
    //                       angle  raise   eye   curve  open  width  asym
    case Emotion::anger:     return {0.45, -0.02, 0.75, -0.15, 0.00, 0.85, 0.00};
    case Emotion::disgust:   return {0.20, -0.01, 0.55, -0.35, 0.15, 0.80, 0.35};
    case Emotion::fear:      return {-0.35, 0.05, 1.45, -0.20, 0.45, 1.05, 0.00};
    case Emotion::happiness: return {0.00, 0.015, 0.85, 0.65, 0.20, 1.20, 0.00};
    case Emotion::sadness:   return {-0.45, 0.00, 0.70, -0.60, 0.00, 0.90, 0.00};
    case Emotion::surprise:  return {0.00, 0.09, 1.70, 0.00, 0.90, 0.65, 0.00};
    case Emotion::neutral:   return {0.00, 0.00, 1.00, 0.00, 0.00, 1.00, 0.00};
  }
  throw std::invalid_argument("unknown emotion");
}

FaceImage render_face(Emotion emotion, const IdentityParams& id, double noise, std::uint64_t rng_seed) {
  if (!(noise >= 0.0 && noise <= kMaxNoise))
    throw std::invalid_argument("noise " + text::format_real(noise) + " outside [0, 0.2]");
  id.validate();
  const ExpressionGeometry g = expression_geometry(emotion);

  const double side = double(FaceImage::kSide);
  const double cx = side / 2.0, cy = side / 2.0 + 1.0;
  const double a = id.face_width_ratio * side / 2.0;
  const double b = std::min(1.25 * a, side / 2.0 - 1.0);

  const double eye_y = cy - b + id.eye_height * 2.0 * b;
  const double eye_rx = 0.17 * a;
  const double eye_ry = std::max(0.45, 0.5 * eye_rx * g.eye_open);
  const double brow_y = eye_y - 0.30 * a - g.brow_raise * 2.0 * b;
  const double brow_half = 0.24 * a;

  const double mouth_x = cx, mouth_y = cy + 0.52 * b;
  const double mouth_half = id.mouth_width * a * g.mouth_width;
  const double curve_h = 0.22 * a;
  const double open_h = 0.18 * a;
  constexpr double lip = 1.6;

  auto shade = [&](double x, double y) {
    const double fx = (x - cx) / a, fy = (y - cy) / b;
    if (fx * fx + fy * fy > 1.0) return kBackground;
    for (double s : {-1.0, 1.0}) {
      const double ex = cx + s * id.eye_spacing * a;
      const double dx = (x - ex) / eye_rx, dy = (y - eye_y) / eye_ry;
      if (dx * dx + dy * dy <= 1.0) return kFeatureInk;
      // Inner brow end points toward the midline.
      const double inner_x = ex - s * brow_half, outer_x = ex + s * brow_half;
      const double inner_y = brow_y + g.brow_angle * brow_half;
      const double outer_y = brow_y - g.brow_angle * brow_half;
      if (segment_distance(x, y, inner_x, inner_y, outer_x, outer_y) <= id.brow_thickness / 2.0)
        return kFeatureInk;
    }
    const double u = (x - mouth_x) / mouth_half;
    if (std::abs(u) <= 1.0) {
      const double centre = mouth_y + g.mouth_curve * curve_h * (0.5 - u * u) - g.mouth_asymmetry * curve_h * u;
      const double half_open = g.mouth_open * open_h * std::sqrt(1.0 - u * u);
      if (std::abs(y - centre) <= half_open + lip / 2.0) return kFeatureInk;
    }
    return id.skin_tone;
  };

  FaceImage::Pixels px(FaceImage::kSide, FaceImage::kSide);
  const double step = 1.0 / kSupersample;
  for (Index r = 0; r < FaceImage::kSide; ++r) {
    for (Index c = 0; c < FaceImage::kSide; ++c) {
      double acc = 0.0;
      for (int sy = 0; sy < kSupersample; ++sy)
        for (int sx = 0; sx < kSupersample; ++sx)
          acc += shade(double(c) + (sx + 0.5) * step, double(r) + (sy + 0.5) * step);
      px(r, c) = acc / (kSupersample * kSupersample);
    }
  }

  if (noise > 0.0) {
    Rng rng(rng_seed);
    for (Index i = 0; i < px.size(); ++i)
      px.data()[i] = std::clamp(px.data()[i] + noise * rng.normal(), 0.0, 1.0);
  }
  return FaceImage(std::move(px));
}

// ---------------------------------------------------------------------------

bool DatasetManifest::covers_all_classes() const {
  std::array<bool, kEmotionCount> seen{};
  for (const auto& r : records) seen[std::size_t(code(r.label))] = true;
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

DatasetManifest generate_dataset(const std::filesystem::path& out_dir, int n_per_class,
                                 int n_identities, double noise, std::uint64_t seed) {
  if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
  if (n_identities < 1) throw std::invalid_argument("n_identities must be >= 1");
  if (!(noise >= 0.0 && noise <= kMaxNoise)) throw std::invalid_argument("noise outside [0, 0.2]");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<IdentityParams> identities;
  for (int j = 0; j < n_identities; ++j)
    identities.push_back(IdentityParams::from_seed(derive_seed(seed, 0x1D000000ULL + std::uint64_t(j))));

  DatasetManifest manifest{out_dir, {}};
  for (int i = 0; i < n_per_class; ++i) {
    for (Emotion e : kAllEmotions) {
      const std::size_t k = manifest.records.size();
      const auto& id = identities[std::size_t((i + code(e)) % n_identities)];
      char name[32];
      std::snprintf(name, sizeof name, "img_%05zu.pgm", k);
      save_pgm(out_dir / name, render_face(e, id, noise, derive_seed(seed, k)));
      manifest.records.push_back({name, e, id.seed, noise});
    }
  }

  std::ofstream out(out_dir / kManifestName, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in " + out_dir.string());
  for (const auto& r : manifest.records)
    out << r.file << '\t' << code(r.label) << '\t' << r.identity_seed << '\t'
        << text::format_real(r.noise) << '\n';
  if (!out) throw IoError("write failed for manifest in " + out_dir.string());
  return manifest;
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifestName, std::ios::binary);
  if (!in) throw IoError("cannot open " + (dir / kManifestName).string());
  DatasetManifest m{dir, {}};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = text::split(line, '\t');
    const std::string where = "manifest line " + std::to_string(line_no);
    if (fields.size() != 4) throw ParseError(where, "expected 4 tab-separated fields");
    const auto label = emotion_from_code(long(text::parse_u64(fields[1], where + " label")));
    if (!label) throw ParseError(where + " label", "code out of range");
    ManifestRecord r{std::string(fields[0]), *label, text::parse_u64(fields[2], where + " identity"),
                     text::parse_real(fields[3], where + " noise")};
    if (!std::filesystem::exists(dir / r.file)) throw IoError("manifest references missing file " + r.file);
    m.records.push_back(std::move(r));
  }
  return m;
}

// ---------------------------------------------------------------------------

std::string encode_pgm(const FaceImage& image) {
  std::string out = "P5\n64 64\n255\n";
  out.reserve(out.size() + std::size_t(image.pixels().size()));
  for (Index i = 0; i < image.pixels().size(); ++i)
    out.push_back(char(static_cast<unsigned char>(std::lround(image.pixels().data()[i] * 255.0))));
  return out;
}

FaceImage decode_pgm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  in >> magic;
  if (magic != "P5") throw ParseError("pgm", "expected P5 magic");
  auto skip_comments = [&] {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string ignored;
      std::getline(in, ignored);
      in >> std::ws;
    }
  };
  skip_comments();
  in >> width;
  skip_comments();
  in >> height;
  skip_comments();
  in >> maxval;
  if (!in || width != FaceImage::kSide || height != FaceImage::kSide)
    throw ParseError("pgm", "expected a 64x64 image");
  if (maxval <= 0 || maxval > 255) throw ParseError("pgm", "only 8-bit images are supported");
  in.get();  // single whitespace after maxval
  const std::size_t offset = std::size_t(in.tellg());
  const std::size_t n = std::size_t(width) * std::size_t(height);
  if (bytes.size() < offset + n) throw ParseError("pgm", "truncated pixel data");
  FaceImage::Pixels px(height, width);
  for (std::size_t i = 0; i < n; ++i)
    px.data()[i] = double(static_cast<unsigned char>(bytes[offset + i])) / double(maxval);
  return FaceImage(std::move(px));
}

void save_pgm(const std::filesystem::path& path, const FaceImage& image) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const std::string bytes = encode_pgm(image);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

FaceImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_pgm(ss.str());
}

}  // namespace xtamer

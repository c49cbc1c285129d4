#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gtest/gtest.h"
#include "support.hpp"
#include "xtamer/errors.hpp"
#include "xtamer/face_synth.hpp"

namespace xtamer {
namespace {

using testing::ScratchDir;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Darkest row per column inside the lower third of the face.
std::vector<Index> mouth_rows(const FaceImage& img, Index col_lo, Index col_hi) {
  std::vector<Index> rows;
  for (Index c = col_lo; c <= col_hi; ++c) {
    Index best = 40;
    for (Index r = 40; r < 55; ++r)
      if (img(r, c) < img(best, c)) best = r;
    rows.push_back(best);
  }
  return rows;
}

TEST(Render, Deterministic) {
  const auto id = IdentityParams::from_seed(5);
  for (Emotion e : kAllEmotions) EXPECT_EQ(render_face(e, id, 0.1, 77), render_face(e, id, 0.1, 77));
}

TEST(Render, PixelsInUnitRange) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto img = render_face(kAllEmotions[seed % 7], IdentityParams::from_seed(seed), kMaxNoise, seed);
    EXPECT_EQ(img.pixels().rows(), 64);
    EXPECT_EQ(img.pixels().cols(), 64);
    EXPECT_GE(img.pixels().minCoeff(), 0.0);
    EXPECT_LE(img.pixels().maxCoeff(), 1.0);
  }
}

TEST(Render, EmotionsDifferInAtLeastOnePercentOfPixels) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto id = IdentityParams::from_seed(s);
    for (Emotion a : kAllEmotions)
      for (Emotion b : kAllEmotions) {
        if (a == b) continue;
        const auto pa = render_face(a, id, 0.0, 0), pb = render_face(b, id, 0.0, 0);
        const auto differing = ((pa.pixels() - pb.pixels()).array().abs() > 0).count();
        EXPECT_GE(double(differing), 0.01 * 64 * 64) << name(a) << " vs " << name(b);
      }
  }
}

TEST(Render, NeutralMouthIsHorizontal) {
  const auto g = expression_geometry(Emotion::neutral);
  EXPECT_EQ(g.mouth_curve, 0.0);
  EXPECT_EQ(g.mouth_open, 0.0);
  EXPECT_EQ(g.mouth_asymmetry, 0.0);
  EXPECT_EQ(g.brow_angle, 0.0);
  const auto rows = mouth_rows(render_face(Emotion::neutral, IdentityParams::canonical(), 0.0, 0), 25, 38);
  EXPECT_EQ(std::set<Index>(rows.begin(), rows.end()).size(), 1u);
  const auto smile = mouth_rows(render_face(Emotion::happiness, IdentityParams::canonical(), 0.0, 0), 25, 38);
  EXPECT_GT(std::set<Index>(smile.begin(), smile.end()).size(), 1u);
}

TEST(Render, NoiseChangesWithSeed) {
  const auto id = IdentityParams::canonical();
  EXPECT_FALSE(render_face(Emotion::fear, id, 0.05, 1) == render_face(Emotion::fear, id, 0.05, 2));
  EXPECT_EQ(render_face(Emotion::fear, id, 0.0, 1), render_face(Emotion::fear, id, 0.0, 2));
}

TEST(Render, RejectsBadArguments) {
  EXPECT_THROW(render_face(Emotion::anger, IdentityParams::canonical(), 0.25, 0), std::invalid_argument);
  EXPECT_THROW(render_face(Emotion::anger, IdentityParams::canonical(), -0.01, 0), std::invalid_argument);
  IdentityParams bad;
  bad.eye_spacing = 0.9;
  EXPECT_THROW(render_face(Emotion::anger, bad, 0.0, 0), std::invalid_argument);
}

TEST(Identity, DrawnParametersRespectBounds) {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const auto id = IdentityParams::from_seed(seed);
    EXPECT_NO_THROW(id.validate()) << "seed " << seed;
    EXPECT_EQ(id, IdentityParams::from_seed(seed));
  }
  EXPECT_NO_THROW(IdentityParams::canonical().validate());
}

TEST(Render, NearestCentroidOnRawPixelsIsPerfect) {
  const auto id = IdentityParams::canonical();
  std::map<Emotion, FaceImage::Pixels> centroid;
  for (Emotion e : kAllEmotions) {
    FaceImage::Pixels sum = FaceImage::Pixels::Zero(64, 64);
    for (std::uint64_t s = 0; s < 5; ++s) sum += render_face(e, id, 0.05, 100 + s).pixels();
    centroid[e] = sum / 5.0;
  }
  int correct = 0, total = 0;
  for (Emotion e : kAllEmotions) {
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto img = render_face(e, id, s == 0 ? 0.0 : 0.05, 500 + s);
      Emotion best = Emotion::anger;
      double best_d = 1e300;
      for (const auto& [label, c] : centroid) {
        const double d = (img.pixels() - c).squaredNorm();
        if (d < best_d) best_d = d, best = label;
      }
      correct += best == e;
      ++total;
    }
  }
  EXPECT_EQ(correct, total);
}

TEST(Pgm, RoundTripQuantizesToEightBits) {
  const auto img = render_face(Emotion::surprise, IdentityParams::from_seed(3), 0.05, 9);
  const auto back = decode_pgm(encode_pgm(img));
  EXPECT_LE((img.pixels() - back.pixels()).cwiseAbs().maxCoeff(), 0.5 / 255.0 + 1e-12);
  EXPECT_EQ(decode_pgm(encode_pgm(back)), back);
}

TEST(Pgm, RejectsMalformedInput) {
  EXPECT_THROW(decode_pgm("P2\n64 64\n255\n"), ParseError);
  EXPECT_THROW(decode_pgm("P5\n32 32\n255\n" + std::string(1024, '\0')), ParseError);
  EXPECT_THROW(decode_pgm("P5\n64 64\n255\n" + std::string(100, '\0')), ParseError);
  EXPECT_NO_THROW(decode_pgm("P5\n# comment\n64 64\n255\n" + std::string(4096, '\x7f')));
}

TEST(Dataset, StandardSetCount) {
  ScratchDir dir("dataset-scale");
  const auto m = generate_dataset(dir.path(), 143, 20, 0.05, 1);
  EXPECT_EQ(m.records.size(), 1001u);
  EXPECT_TRUE(m.covers_all_classes());
}

TEST(Dataset, OnePerClass) {
  ScratchDir dir("dataset-one");
  const auto m = generate_dataset(dir.path(), 1, 1, 0.0, 4);
  ASSERT_EQ(m.records.size(), 7u);
  std::set<Emotion> labels;
  for (const auto& r : m.records) labels.insert(r.label);
  EXPECT_EQ(labels.size(), 7u);
  const auto back = read_manifest(dir.path());
  ASSERT_EQ(back.records.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(back.records[i].file, m.records[i].file);
    EXPECT_EQ(back.records[i].label, m.records[i].label);
    EXPECT_EQ(back.records[i].identity_seed, m.records[i].identity_seed);
  }
}

TEST(Dataset, RegenerationIsByteIdentical) {
  ScratchDir a("dataset-a"), b("dataset-b");
  const auto ma = generate_dataset(a.path(), 3, 2, 0.05, 21);
  generate_dataset(b.path(), 3, 2, 0.05, 21);
  EXPECT_EQ(slurp(a / kManifestName), slurp(b / kManifestName));
  for (const auto& r : ma.records) EXPECT_EQ(slurp(a / r.file), slurp(b / r.file));
}

TEST(Dataset, MissingFileIsReported) {
  ScratchDir dir("dataset-missing");
  const auto m = generate_dataset(dir.path(), 1, 1, 0.0, 4);
  std::filesystem::remove(dir / m.records[3].file);
  EXPECT_THROW(read_manifest(dir.path()), IoError);
}

}  // namespace
}  // namespace xtamer

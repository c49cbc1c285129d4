#include <cstring>
#include <fstream>

#include "gtest/gtest.h"
#include "support.hpp"
#include "xtamer/checkpoint.hpp"
#include "xtamer/errors.hpp"

namespace xtamer {
namespace {

std::vector<Section> sample_sections() {
  Section a;
  a.tag = "TEST";
  a.meta = {{"alpha", "1"}, {"name", "with spaces"}};
  a.values = Eigen::VectorXd::LinSpaced(17, -3.0, 5.0);
  a.values[4] = 1.0 / 3.0;
  Section b;
  b.tag = "EMPT";
  return {a, b};
}

void put_u32(std::string& bytes, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes[at + std::size_t(i)] = char((v >> (8 * i)) & 0xFF);
}

TEST(Container, RoundTripIsExact) {
  const auto in = sample_sections();
  const auto out = decode_container(encode_container(in));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].tag, "TEST");
  EXPECT_EQ(out[0].meta, in[0].meta);
  EXPECT_TRUE((out[0].values.array() == in[0].values.array()).all());
  EXPECT_EQ(out[1].values.size(), 0);
  EXPECT_EQ(find_section(out, "EMPT").tag, "EMPT");
  EXPECT_THROW(find_section(out, "NONE"), VersionError);
  EXPECT_THROW(out[0].require("missing"), VersionError);
}

TEST(Container, EveryTruncationIsAChecksumError) {
  const std::string bytes = encode_container(sample_sections());
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    try {
      decode_container(bytes.substr(0, n));
      ADD_FAILURE() << "truncation to " << n << " bytes accepted";
    } catch (const ChecksumError&) {
    } catch (const VersionError&) {
      // Cutting inside the magic reads as a foreign file.
      EXPECT_LT(n, 8u);
    }
  }
}

TEST(Container, FlippedBitIsDetected) {
  const std::string bytes = encode_container(sample_sections());
  for (std::size_t i = 8; i < bytes.size(); i += 7) {
    std::string bad = bytes;
    bad[i] = char(bad[i] ^ 0x10);
    EXPECT_THROW(decode_container(bad), ChecksumError) << "byte " << i;
  }
}

TEST(Container, WrongMagicIsVersionError) {
  std::string bytes = encode_container(sample_sections());
  bytes[0] = 'Y';
  EXPECT_THROW(decode_container(bytes), VersionError);
}

TEST(Container, WrongVersionIsVersionError) {
  std::string bytes = encode_container(sample_sections());
  put_u32(bytes, 8, kContainerVersion + 1);
  put_u32(bytes, bytes.size() - 4, crc32(bytes.substr(0, bytes.size() - 4)));
  EXPECT_THROW(decode_container(bytes), VersionError);
}

TEST(Container, RejectsBadTags) {
  Section s;
  s.tag = "TOOLONG";
  EXPECT_THROW(encode_container({s}), std::invalid_argument);
}

TEST(Container, FileRoundTripAndMissingFile) {
  testing::ScratchDir dir("container");
  write_container(dir / "x.xtm", sample_sections());
  EXPECT_EQ(read_container(dir / "x.xtm").size(), 2u);
  EXPECT_THROW(read_container(dir / "nope.xtm"), IoError);
}

TEST(Crc32, KnownVector) { EXPECT_EQ(crc32("123456789"), 0xCBF43926u); }

}  // namespace
}  // namespace xtamer

#pragma once

// "XTAMER1" checkpoint container shared by every persisted model.
//
// Layout (all integers little-endian):
//   magic        8 bytes  "XTAMER1\0"
//   version      u32      kContainerVersion
//   n_sections   u32
//   per section:
//     tag        4 bytes  e.g. "CNN ", "SOM ", "RWDM"
//     meta_len   u32, then meta_len bytes of "key=value\n" lines
//     n_values   u64, then n_values IEEE-754 doubles
//   crc32        u32      over every preceding byte

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace xtamer {

inline constexpr std::uint32_t kContainerVersion = 1;

struct Section {
  std::string tag;
  std::map<std::string, std::string> meta;
  Eigen::VectorXd values;

  /// Throws VersionError if the key is absent.
  const std::string& require(const std::string& key) const;
};

std::string encode_container(const std::vector<Section>& sections);

/// Throws VersionError on bad magic/version and ChecksumError on truncation
/// or CRC mismatch.
std::vector<Section> decode_container(const std::string& bytes);

void write_container(const std::filesystem::path& path, const std::vector<Section>& sections);
std::vector<Section> read_container(const std::filesystem::path& path);

/// Throws VersionError when no section carries `tag`.
const Section& find_section(const std::vector<Section>& sections, const std::string& tag);

std::uint32_t crc32(const std::string& bytes);

}  // namespace xtamer

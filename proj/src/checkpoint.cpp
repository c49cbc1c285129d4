#include "xtamer/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "xtamer/errors.hpp"

namespace xtamer {

namespace {

constexpr char kMagic[8] = {'X', 'T', 'A', 'M', 'E', 'R', '1', '\0'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  std::uint64_t uint(int width) {
    need(std::size_t(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
      v |= std::uint64_t(static_cast<unsigned char>(bytes_[pos_ + std::size_t(i)])) << (8 * i);
    pos_ += std::size_t(width);
    return v;
  }

  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return end_ - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw VersionError("checkpoint section overruns payload");
  }

  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

const std::string& Section::require(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw VersionError("section '" + tag + "' lacks key '" + key + "'");
  return it->second;
}

std::uint32_t crc32(const std::string& bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  return std::uint32_t(::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), uInt(bytes.size())));
}

std::string encode_container(const std::vector<Section>& sections) {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kContainerVersion);
  put_u32(out, std::uint32_t(sections.size()));
  for (const auto& s : sections) {
    if (s.tag.size() != 4) throw std::invalid_argument("section tag must be 4 bytes: '" + s.tag + "'");
    out += s.tag;
    std::string meta;
    for (const auto& [k, v] : s.meta) {
      if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
        throw std::invalid_argument("section metadata may not contain '=' in keys or newlines");
      meta += k + "=" + v + "\n";
    }
    put_u32(out, std::uint32_t(meta.size()));
    out += meta;
    put_u64(out, std::uint64_t(s.values.size()));
    for (Eigen::Index i = 0; i < s.values.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(s.values[i]));
  }
  put_u32(out, crc32(out));
  return out;
}

std::vector<Section> decode_container(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic) throw ChecksumError("checkpoint truncated before header");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw VersionError("not an XTAMER1 checkpoint (bad magic)");
  if (bytes.size() < sizeof kMagic + 12) throw ChecksumError("checkpoint truncated");

  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes, bytes.size());
  tail.raw(body);
  const auto stored = std::uint32_t(tail.uint(4));
  if (crc32(bytes.substr(0, body)) != stored) throw ChecksumError("checkpoint CRC-32 mismatch");

  Reader r(bytes, body);
  r.raw(sizeof kMagic);
  const auto version = r.uint(4);
  if (version != kContainerVersion)
    throw VersionError("unsupported checkpoint version " + std::to_string(version));
  const auto n_sections = r.uint(4);
  std::vector<Section> sections;
  for (std::uint64_t i = 0; i < n_sections; ++i) {
    Section s;
    s.tag = r.raw(4);
    std::istringstream meta(r.raw(std::size_t(r.uint(4))));
    std::string line;
    while (std::getline(meta, line)) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw VersionError("malformed metadata line in '" + s.tag + "'");
      s.meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    const auto n = r.uint(8);
    if (n > r.remaining() / 8) throw VersionError("section '" + s.tag + "' value count overruns payload");
    s.values.resize(Eigen::Index(n));
    for (std::uint64_t k = 0; k < n; ++k) s.values[Eigen::Index(k)] = std::bit_cast<double>(r.uint(8));
    sections.push_back(std::move(s));
  }
  if (r.remaining() != 0) throw VersionError("trailing bytes after last section");
  return sections;
}

void write_container(const std::filesystem::path& path, const std::vector<Section>& sections) {
  const std::string bytes = encode_container(sections);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<Section> read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_container(ss.str());
}

const Section& find_section(const std::vector<Section>& sections, const std::string& tag) {
  for (const auto& s : sections)
    if (s.tag == tag) return s;
  throw VersionError("checkpoint has no '" + tag + "' section");
}

}  // namespace xtamer

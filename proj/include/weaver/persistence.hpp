#pragma once

#include <array>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "weaver/common.hpp"

namespace weaver {

// ---- SHA-256 (FIPS 180-4) --------------------------------------------------

namespace detail {

class Sha256 {
 public:
  Sha256() { reset(); }

  void update(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    total_ += len;
    while (len > 0) {
      const std::size_t take = std::min(len, std::size_t(64) - fill_);
      std::memcpy(buf_.data() + fill_, p, take);
      fill_ += take;
      p += take;
      len -= take;
      if (fill_ == 64) {
        process(buf_.data());
        fill_ = 0;
      }
    }
  }

  std::string hex_digest() {
    const std::uint64_t bits = total_ * 8;
    unsigned char pad = 0x80;
    update(&pad, 1);
    unsigned char zero = 0;
    while (fill_ != 56) update(&zero, 1);
    unsigned char lenb[8];
    for (int i = 0; i < 8; ++i) lenb[i] = static_cast<unsigned char>(bits >> (56 - 8 * i));
    // bypass total_ accounting for the trailer
    std::memcpy(buf_.data() + fill_, lenb, 8);
    process(buf_.data());
    static const char* hexc = "0123456789abcdef";
    std::string out;
    for (std::uint32_t h : state_)
      for (int i = 28; i >= 0; i -= 4) out += hexc[(h >> i) & 0xf];
    return out;
  }

 private:
  void reset() {
    state_ = {0x6a09e667u, 0xbb67ae85u, 0x3c6ef372u, 0xa54ff53au,
              0x510e527fu, 0x9b05688cu, 0x1f83d9abu, 0x5be0cd19u};
    fill_ = 0;
    total_ = 0;
  }

  static std::uint32_t rotr(std::uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

  void process(const unsigned char* block) {
    static constexpr std::uint32_t K[64] = {
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4,
        0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe,
        0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786, 0x0fc19dc6, 0x240ca1cc, 0x2de92c6f,
        0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7,
        0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc,
        0x53380d13, 0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
        0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116,
        0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a, 0x5b9cca4f, 0x682e6ff3,
        0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
        0xc67178f2};
    std::uint32_t w[64];
    for (int i = 0; i < 16; ++i)
      w[i] = (std::uint32_t(block[4 * i]) << 24) | (std::uint32_t(block[4 * i + 1]) << 16) |
             (std::uint32_t(block[4 * i + 2]) << 8) | std::uint32_t(block[4 * i + 3]);
    for (int i = 16; i < 64; ++i) {
      const std::uint32_t s0 = rotr(w[i - 15], 7) ^ rotr(w[i - 15], 18) ^ (w[i - 15] >> 3);
      const std::uint32_t s1 = rotr(w[i - 2], 17) ^ rotr(w[i - 2], 19) ^ (w[i - 2] >> 10);
      w[i] = w[i - 16] + s0 + w[i - 7] + s1;
    }
    auto s = state_;
    for (int i = 0; i < 64; ++i) {
      const std::uint32_t S1 = rotr(s[4], 6) ^ rotr(s[4], 11) ^ rotr(s[4], 25);
      const std::uint32_t ch = (s[4] & s[5]) ^ (~s[4] & s[6]);
      const std::uint32_t t1 = s[7] + S1 + ch + K[i] + w[i];
      const std::uint32_t S0 = rotr(s[0], 2) ^ rotr(s[0], 13) ^ rotr(s[0], 22);
      const std::uint32_t maj = (s[0] & s[1]) ^ (s[0] & s[2]) ^ (s[1] & s[2]);
      const std::uint32_t t2 = S0 + maj;
      s[7] = s[6]; s[6] = s[5]; s[5] = s[4]; s[4] = s[3] + t1;
      s[3] = s[2]; s[2] = s[1]; s[1] = s[0]; s[0] = t1 + t2;
    }
    for (int i = 0; i < 8; ++i) state_[i] += s[i];
  }

  std::array<std::uint32_t, 8> state_;
  std::array<unsigned char, 64> buf_;
  std::size_t fill_ = 0;
  std::uint64_t total_ = 0;
};

}  // namespace detail

inline std::string sha256_hex(const std::string& bytes) {
  detail::Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex_digest();
}

// ---- artifact envelope -----------------------------------------------------

inline constexpr int kFormatVersion = 1;

struct ArtifactBundle {
  int format_version = kFormatVersion;
  std::string kind;  // model | codemap | graph | report
  nlohmann::json payload;
};

/// Canonical bytes: nlohmann::json with sorted object keys, 2-space indent,
/// LF newlines, shortest-round-trip decimal floats.
inline std::string canonical_bytes(const ArtifactBundle& bundle) {
  nlohmann::json j;
  j["format_version"] = bundle.format_version;
  j["kind"] = bundle.kind;
  j["payload"] = bundle.payload;
  return j.dump(2) + "\n";
}

inline std::string fingerprint(const ArtifactBundle& bundle) {
  return sha256_hex(canonical_bytes(bundle));
}

/// Writes the bundle plus a `<path>.sha256` sidecar; returns the fingerprint.
inline std::string save(const ArtifactBundle& bundle, const std::string& path) {
  static const std::set<std::string> kinds = {"model", "codemap", "graph", "report"};
  if (!kinds.count(bundle.kind)) throw ConfigError("save: unknown artifact kind: " + bundle.kind);
  const std::string bytes = canonical_bytes(bundle);
  const std::string fp = sha256_hex(bytes);
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write artifact: " + path);
    out << bytes;
    if (!out) throw IoError("write failed: " + path);
  }
  {
    std::ofstream side(path + ".sha256", std::ios::binary);
    if (!side) throw IoError("cannot write sidecar: " + path + ".sha256");
    side << fp << "\n";
  }
  return fp;
}

inline ArtifactBundle load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open artifact: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!j.contains("format_version"))
    throw ParseError(path + ": missing format_version");
  const int ver = j.at("format_version").get<int>();
  if (ver != kFormatVersion)
    throw ParseError(path + ": unsupported format_version " + std::to_string(ver) +
                     ", expected " + std::to_string(kFormatVersion));
  ArtifactBundle bundle;
  bundle.format_version = ver;
  bundle.kind = j.at("kind").get<std::string>();
  bundle.payload = j.at("payload");

  std::ifstream side(path + ".sha256");
  if (side) {
    std::string expected;
    side >> expected;
    const std::string actual = sha256_hex(bytes);
    if (expected != actual)
      throw ParseError(path + ": fingerprint mismatch, sidecar " + expected + " vs content " +
                       actual);
  }
  return bundle;
}

}  // namespace weaver

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace backrunner {

// 256-bit unsigned machine word. Fixed width, unchecked: arithmetic wraps
// modulo 2^256, matching EVM semantics.
using Word = boost::multiprecision::uint256_t;
using SignedWord = boost::multiprecision::int256_t;
using WideWord = boost::multiprecision::uint512_t;

using Bytes = std::vector<uint8_t>;

inline const Word kWordMax = (Word(1) << 255) | ((Word(1) << 255) - 1);
inline const Word kSignBit = Word(1) << 255;
inline const Word kAddressMask = (Word(1) << 160) - 1;

// 20-byte account identifier.
struct Address {
  std::array<uint8_t, 20> bytes{};

  auto operator<=>(const Address&) const = default;

  bool is_zero() const {
    for (auto b : bytes)
      if (b != 0) return false;
    return true;
  }
};

inline Word to_word(const Address& a) {
  Word w = 0;
  for (auto b : a.bytes) w = (w << 8) | b;
  return w;
}

inline Address to_address(const Word& w) {
  Address a;
  Word v = w & kAddressMask;
  for (int i = 19; i >= 0; --i) {
    a.bytes[size_t(i)] = uint8_t(v & 0xff);
    v >>= 8;
  }
  return a;
}

inline Address make_address(uint64_t tail) {
  return to_address(Word(tail));
}

// Big-endian 32-byte encoding of a word.
inline std::array<uint8_t, 32> word_bytes(const Word& w) {
  std::array<uint8_t, 32> out{};
  Word v = w;
  for (int i = 31; i >= 0; --i) {
    out[size_t(i)] = uint8_t(v & 0xff);
    v >>= 8;
  }
  return out;
}

inline Word word_from_bytes(const uint8_t* data, size_t len) {
  Word w = 0;
  for (size_t i = 0; i < len && i < 32; ++i) w = (w << 8) | data[i];
  return w;
}

inline Word word_from_bytes(const Bytes& b) { return word_from_bytes(b.data(), b.size()); }

// Signed view for SLT/SGT/SDIV/SMOD.
inline SignedWord as_signed(const Word& w) {
  if (w & kSignBit) {
    // two's complement: w - 2^256
    WideWord wide = WideWord(w);
    WideWord modulus = WideWord(1) << 256;
    return SignedWord(SignedWord(wide) - SignedWord(modulus));
  }
  return SignedWord(w);
}

inline Word from_signed(const SignedWord& s) {
  if (s < 0) {
    WideWord modulus = WideWord(1) << 256;
    return Word(WideWord(s + SignedWord(modulus)));
  }
  return Word(s);
}

inline char hex_digit(unsigned v) { return v < 10 ? char('0' + v) : char('a' + v - 10); }

inline std::string to_hex(const Bytes& b, bool prefix = true) {
  std::string s;
  if (prefix) s = "0x";
  s.reserve(s.size() + b.size() * 2);
  for (auto byte : b) {
    s.push_back(hex_digit(byte >> 4));
    s.push_back(hex_digit(byte & 0xf));
  }
  return s;
}

inline std::string to_hex(const Address& a) {
  std::string s = "0x";
  for (auto byte : a.bytes) {
    s.push_back(hex_digit(byte >> 4));
    s.push_back(hex_digit(byte & 0xf));
  }
  return s;
}

inline std::string to_hex(const Word& w) {
  std::string s = "0x";
  bool started = false;
  auto wb = word_bytes(w);
  for (auto byte : wb) {
    if (!started && byte == 0) continue;
    if (!started && (byte >> 4) == 0) {
      s.push_back(hex_digit(byte & 0xf));
      started = true;
      continue;
    }
    s.push_back(hex_digit(byte >> 4));
    s.push_back(hex_digit(byte & 0xf));
    started = true;
  }
  if (!started) s.push_back('0');
  return s;
}

inline std::optional<unsigned> hex_value(char c) {
  if (c >= '0' && c <= '9') return unsigned(c - '0');
  if (c >= 'a' && c <= 'f') return unsigned(c - 'a' + 10);
  if (c >= 'A' && c <= 'F') return unsigned(c - 'A' + 10);
  return std::nullopt;
}

// Accepts lowercase/uppercase hex with optional 0x prefix.
inline std::optional<Bytes> from_hex(std::string_view s) {
  if (s.size() >= 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) s.remove_prefix(2);
  if (s.size() % 2 != 0) return std::nullopt;
  Bytes out;
  out.reserve(s.size() / 2);
  for (size_t i = 0; i < s.size(); i += 2) {
    auto hi = hex_value(s[i]);
    auto lo = hex_value(s[i + 1]);
    if (!hi || !lo) return std::nullopt;
    out.push_back(uint8_t((*hi << 4) | *lo));
  }
  return out;
}

// Accepts any digit count up to 64 (no even-length requirement).
inline std::optional<Word> word_from_hex(std::string_view s) {
  if (s.size() >= 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) s.remove_prefix(2);
  if (s.empty() || s.size() > 64) return std::nullopt;
  Word w = 0;
  for (char c : s) {
    auto v = hex_value(c);
    if (!v) return std::nullopt;
    w = (w << 4) | *v;
  }
  return w;
}

inline std::optional<Address> address_from_hex(std::string_view s) {
  auto b = from_hex(s);
  if (!b || b->size() != 20) return std::nullopt;
  Address a;
  std::memcpy(a.bytes.data(), b->data(), 20);
  return a;
}

// Deterministic 256-bit digest used for SHA3 opcode, code hashes and mapping
// slots. Not cryptographic; the simulator never checks signatures and only
// needs internal consistency and collision resistance at desk scale.
inline Word hash256(const uint8_t* data, size_t len) {
  uint64_t lane[4] = {0x6a09e667f3bcc908ULL, 0xbb67ae8584caa73bULL, 0x3c6ef372fe94f82bULL,
                      0xa54ff53a5f1d36f1ULL};
  auto mix = [](uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  };
  for (size_t i = 0; i < len; ++i) {
    size_t k = i & 3;
    lane[k] = mix(lane[k] + data[i] + 0x9e3779b97f4a7c15ULL * (uint64_t(i) + 1));
    lane[(k + 1) & 3] ^= lane[k];
  }
  lane[0] = mix(lane[0] + len);
  lane[1] = mix(lane[1] ^ lane[0]);
  lane[2] = mix(lane[2] + lane[1]);
  lane[3] = mix(lane[3] ^ lane[2]);
  Word w = 0;
  for (int k = 0; k < 4; ++k) w = (w << 64) | lane[k];
  return w;
}

inline Word hash256(const Bytes& b) { return hash256(b.data(), b.size()); }

inline Word hash_word(const Word& w) {
  auto b = word_bytes(w);
  return hash256(b.data(), b.size());
}

// Mapping-slot derivation used by the hand-assembled token contracts:
// slot = H(key . index), both 32 bytes, matching how they build it in memory.
inline Word mapping_slot(const Word& key, const Word& index) {
  uint8_t buf[64];
  auto kb = word_bytes(key);
  auto ib = word_bytes(index);
  std::memcpy(buf, kb.data(), 32);
  std::memcpy(buf + 32, ib.data(), 32);
  return hash256(buf, 64);
}

}  // namespace backrunner

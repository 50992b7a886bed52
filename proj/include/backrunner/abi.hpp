#pragma once

#include <cstdint>
#include <vector>

#include "words.hpp"

namespace backrunner::abi {

// Canonical 4-byte selectors. The simulator does not hash signatures; these
// are fixed constants shared by the hand-assembled contracts, the trait
// heuristics and the action pattern catalog.
namespace sel {
inline constexpr uint32_t kTransfer = 0xa9059cbb;      // transfer(address,uint256)
inline constexpr uint32_t kTransferFrom = 0x23b872dd;  // transferFrom(address,address,uint256)
inline constexpr uint32_t kApprove = 0x095ea7b3;       // approve(address,uint256)
inline constexpr uint32_t kAllowance = 0xdd62ed3e;     // allowance(address,address)
inline constexpr uint32_t kBalanceOf = 0x70a08231;     // balanceOf(address)
inline constexpr uint32_t kSwap = 0x022c0d9f;          // swap(uint256,uint256,address)
inline constexpr uint32_t kGetReserves = 0x0902f1ac;   // getReserves()
inline constexpr uint32_t kToken0 = 0x0dfe1681;        // token0()
inline constexpr uint32_t kToken1 = 0xd21220a7;        // token1()
inline constexpr uint32_t kOwner = 0x8da5cb5b;         // owner()
inline constexpr uint32_t kFlashloan = 0x5cffe9de;     // flashloan(address,address,uint256)
inline constexpr uint32_t kOnFlash = 0x0bf46e59;       // onFlash(address,uint256,uint256)
inline constexpr uint32_t kRepay = 0x371fd8e6;         // repay(uint256)
inline constexpr uint32_t kDebt = 0x0dca59c1;          // debt()
}  // namespace sel

inline void append_word(Bytes& out, const Word& w) {
  auto wb = word_bytes(w);
  out.insert(out.end(), wb.begin(), wb.end());
}

inline void append_selector(Bytes& out, uint32_t selector) {
  out.push_back(uint8_t(selector >> 24));
  out.push_back(uint8_t(selector >> 16));
  out.push_back(uint8_t(selector >> 8));
  out.push_back(uint8_t(selector));
}

inline Bytes make_calldata(uint32_t selector, const std::vector<Word>& args = {}) {
  Bytes out;
  out.reserve(4 + args.size() * 32);
  append_selector(out, selector);
  for (auto& a : args) append_word(out, a);
  return out;
}

inline uint32_t selector_of(const Bytes& calldata) {
  if (calldata.size() < 4) return 0;
  return (uint32_t(calldata[0]) << 24) | (uint32_t(calldata[1]) << 16) |
         (uint32_t(calldata[2]) << 8) | uint32_t(calldata[3]);
}

// Argument word at position i of a standard flat encoding, zero when absent.
inline Word arg_word(const Bytes& calldata, size_t i) {
  size_t off = 4 + i * 32;
  if (off >= calldata.size()) return 0;
  size_t len = std::min<size_t>(32, calldata.size() - off);
  Word w = word_from_bytes(calldata.data() + off, len);
  return w << (8 * (32 - len));
}

inline size_t arg_count(const Bytes& calldata) {
  return calldata.size() <= 4 ? 0 : (calldata.size() - 4 + 31) / 32;
}

}  // namespace backrunner::abi

#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "abi.hpp"
#include "minivm.hpp"
#include "words.hpp"

namespace backrunner::funcx {

struct ArgType {
  enum class Kind { UInt, Address, Bool, BytesDyn, Unknown };
  Kind kind = Kind::Unknown;
  unsigned width = 256;  // bits, UInt only

  bool operator==(const ArgType&) const = default;

  static ArgType uint_of(unsigned w) { return {Kind::UInt, w}; }
  static ArgType address() { return {Kind::Address, 160}; }
  static ArgType boolean() { return {Kind::Bool, 8}; }
  static ArgType bytes_dyn() { return {Kind::BytesDyn, 0}; }
  static ArgType unknown() { return {Kind::Unknown, 256}; }

  std::string to_string() const {
    switch (kind) {
      case Kind::UInt: return "uint" + std::to_string(width);
      case Kind::Address: return "address";
      case Kind::Bool: return "bool";
      case Kind::BytesDyn: return "bytes";
      case Kind::Unknown: return "word";
    }
    return "word";
  }
};

struct FunctionDesc {
  uint32_t selector = 0;
  uint64_t entry_pc = 0;
  std::vector<ArgType> args;
  bool is_fallback = false;
};

namespace detail {

struct Instr {
  uint64_t pc;
  uint8_t op;
  Word imm;  // push immediate
};

// Linear decode; stops at the first unsupported byte (trailing data).
inline std::vector<Instr> decode(const Bytes& code, bool* clean = nullptr) {
  std::vector<Instr> out;
  size_t i = 0;
  bool ok = true;
  while (i < code.size()) {
    uint8_t op = code[i];
    if (!minivm::is_supported(op)) {
      ok = false;
      break;
    }
    Instr ins{i, op, 0};
    if (minivm::is_push(op)) {
      size_t n = minivm::push_size(op);
      for (size_t k = 0; k < n; ++k) {
        uint8_t b = i + 1 + k < code.size() ? code[i + 1 + k] : 0;
        ins.imm = (ins.imm << 8) | b;
      }
      i += 1 + n;
    } else {
      i += 1;
    }
    out.push_back(ins);
  }
  if (clean) *clean = ok;
  return out;
}

inline bool is_jumpdest_at(const Bytes& code, uint64_t pc) {
  // must be a real JUMPDEST, not a push immediate byte
  for (size_t i = 0; i < code.size();) {
    if (i == pc) return code[i] == minivm::JUMPDEST;
    i += minivm::is_push(code[i]) ? 1 + minivm::push_size(code[i]) : 1;
  }
  return false;
}

}  // namespace detail

// Recovers callable functions from the dispatcher pattern
// `PUSH4 s; EQ; ...; PUSH dest; JUMPI`. Adds a fallback descriptor when the
// default dispatch path does not immediately revert.
inline std::vector<FunctionDesc> extract_funcs(const Bytes& code, std::string* diagnostic = nullptr) {
  std::vector<FunctionDesc> out;
  if (code.empty()) return out;

  bool clean = true;
  auto instrs = detail::decode(code, &clean);
  if (instrs.empty()) {
    if (diagnostic) *diagnostic = "undecodable code: unsupported leading opcode";
    return out;
  }

  size_t last_arm_end = 0;  // instruction index just past the last arm's JUMPI
  for (size_t i = 0; i < instrs.size(); ++i) {
    if (instrs[i].op != minivm::PUSH4) continue;
    uint32_t selector = uint32_t(instrs[i].imm);
    // EQ within the next few instructions
    size_t eq = 0;
    for (size_t j = i + 1; j < instrs.size() && j <= i + 4; ++j) {
      if (instrs[j].op == minivm::EQ) {
        eq = j;
        break;
      }
    }
    if (eq == 0) continue;
    // PUSH dest immediately followed by JUMPI
    for (size_t k = eq + 1; k + 1 < instrs.size() && k <= eq + 4; ++k) {
      if (minivm::is_push(instrs[k].op) && instrs[k + 1].op == minivm::JUMPI) {
        uint64_t dest = uint64_t(instrs[k].imm);
        if (!detail::is_jumpdest_at(code, dest)) break;
        bool dup = false;
        for (auto& f : out) dup = dup || (!f.is_fallback && f.selector == selector);
        if (!dup) {
          FunctionDesc f;
          f.selector = selector;
          f.entry_pc = dest;
          out.push_back(f);
          last_arm_end = k + 2;
        }
        break;
      }
    }
  }

  if (out.empty()) {
    // no dispatcher: the whole body is the default path
    FunctionDesc fb;
    fb.is_fallback = true;
    fb.entry_pc = 0;
    out.push_back(fb);
    return out;
  }

  // default path after the last arm: a fallback exists unless it reverts
  // right away (PUSHes feeding a REVERT, or a bare REVERT)
  bool fallback = false;
  uint64_t fb_pc = 0;
  for (size_t j = last_arm_end; j < instrs.size(); ++j) {
    uint8_t op = instrs[j].op;
    if (op == minivm::JUMPDEST) {
      fb_pc = instrs[j].pc;
      continue;
    }
    if (minivm::is_push(op) || op == minivm::POP) continue;
    if (op != minivm::REVERT) {
      fallback = true;
      fb_pc = fb_pc ? fb_pc : instrs[j].pc;
    }
    break;
  }
  if (fallback) {
    FunctionDesc fb;
    fb.is_fallback = true;
    fb.entry_pc = fb_pc;
    out.push_back(fb);
  }
  return out;
}

// Argument typing from one trace's calldata observations.
inline std::vector<ArgType> infer_args_from_trace(const minivm::ExecTrace& trace) {
  int64_t max_arg = -1;
  for (auto& off : trace.calldataload_offsets) {
    if (off >= 4 && (off - 4) % 32 == 0 && off < 4 + 32 * 64) {
      int64_t k = int64_t((off - 4) / 32);
      max_arg = std::max(max_arg, k);
    }
  }
  std::vector<ArgType> args(size_t(max_arg + 1), ArgType::unknown());
  for (auto& m : trace.arg_masks) {
    if (m.arg_index >= args.size()) continue;
    ArgType& t = args[m.arg_index];
    unsigned w = m.width_bits;
    if (w == 160) {
      t = ArgType::address();
    } else if (t.kind == ArgType::Kind::Unknown || (t.kind == ArgType::Kind::UInt && w < t.width)) {
      t = ArgType::uint_of(w);
    }
  }
  for (auto arg : trace.dyn_args) {
    if (arg < args.size()) args[arg] = ArgType::bytes_dyn();
  }
  return args;
}

// One default-input execution of f (selector-only calldata; absent words read
// as zero) and inspection of the observed calldata loads and masks.
inline std::vector<ArgType> infer_args(const Bytes& code, const FunctionDesc& f,
                                       const minivm::WorldState& world) {
  minivm::WorldState w = world;
  Address probe = make_address(0xf17e);
  Address host = make_address(0xf00d);
  // run against a scratch deployment so inference works from bare code
  w.touch(host).code = code;
  minivm::Message msg;
  msg.caller = probe;
  msg.origin = probe;
  msg.target = host;
  if (!f.is_fallback) msg.calldata = abi::make_calldata(f.selector);
  auto r = minivm::execute(w, msg);
  return infer_args_from_trace(r.trace);
}

}  // namespace backrunner::funcx

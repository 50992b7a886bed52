#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "words.hpp"

namespace backrunner::minivm {

enum Op : uint8_t {
  STOP = 0x00,
  ADD = 0x01,
  MUL = 0x02,
  SUB = 0x03,
  DIV = 0x04,
  SDIV = 0x05,
  MOD = 0x06,
  SMOD = 0x07,
  ADDMOD = 0x08,
  MULMOD = 0x09,
  EXP = 0x0a,
  SIGNEXTEND = 0x0b,
  LT = 0x10,
  GT = 0x11,
  SLT = 0x12,
  SGT = 0x13,
  EQ = 0x14,
  ISZERO = 0x15,
  AND = 0x16,
  OR = 0x17,
  XOR = 0x18,
  NOT = 0x19,
  BYTE = 0x1a,
  SHL = 0x1b,
  SHR = 0x1c,
  SAR = 0x1d,
  SHA3 = 0x20,
  ADDRESS = 0x30,
  BALANCE = 0x31,
  ORIGIN = 0x32,
  CALLER = 0x33,
  CALLVALUE = 0x34,
  CALLDATALOAD = 0x35,
  CALLDATASIZE = 0x36,
  CALLDATACOPY = 0x37,
  RETURNDATASIZE = 0x3d,
  RETURNDATACOPY = 0x3e,
  NUMBER = 0x43,
  TIMESTAMP = 0x42,
  POP = 0x50,
  MLOAD = 0x51,
  MSTORE = 0x52,
  MSTORE8 = 0x53,
  SLOAD = 0x54,
  SSTORE = 0x55,
  JUMP = 0x56,
  JUMPI = 0x57,
  PC = 0x58,
  GAS = 0x5a,
  JUMPDEST = 0x5b,
  PUSH1 = 0x60,
  PUSH4 = 0x63,
  PUSH20 = 0x73,
  PUSH32 = 0x7f,
  DUP1 = 0x80,
  SWAP1 = 0x90,
  LOG0 = 0xa0,
  LOG4 = 0xa4,
  CREATE = 0xf0,
  CALL = 0xf1,
  RETURN = 0xf3,
  DELEGATECALL = 0xf4,
  STATICCALL = 0xfa,
  REVERT = 0xfd,
  SELFDESTRUCT = 0xff,
};

// Frozen opcode subset. Anything not listed decodes as INVALID.
inline const std::vector<std::pair<std::string, uint8_t>>& supported_opcodes() {
  static const std::vector<std::pair<std::string, uint8_t>> table = [] {
    std::vector<std::pair<std::string, uint8_t>> t = {
        {"STOP", 0x00},   {"ADD", 0x01},          {"MUL", 0x02},
        {"SUB", 0x03},    {"DIV", 0x04},          {"SDIV", 0x05},
        {"MOD", 0x06},    {"SMOD", 0x07},         {"ADDMOD", 0x08},
        {"MULMOD", 0x09}, {"EXP", 0x0a},          {"SIGNEXTEND", 0x0b},
        {"LT", 0x10},     {"GT", 0x11},           {"SLT", 0x12},
        {"SGT", 0x13},    {"EQ", 0x14},           {"ISZERO", 0x15},
        {"AND", 0x16},    {"OR", 0x17},           {"XOR", 0x18},
        {"NOT", 0x19},    {"BYTE", 0x1a},         {"SHL", 0x1b},
        {"SHR", 0x1c},    {"SAR", 0x1d},          {"SHA3", 0x20},
        {"ADDRESS", 0x30},{"BALANCE", 0x31},      {"ORIGIN", 0x32},
        {"CALLER", 0x33}, {"CALLVALUE", 0x34},    {"CALLDATALOAD", 0x35},
        {"CALLDATASIZE", 0x36}, {"CALLDATACOPY", 0x37},
        {"RETURNDATASIZE", 0x3d}, {"RETURNDATACOPY", 0x3e},
        {"TIMESTAMP", 0x42}, {"NUMBER", 0x43},
        {"POP", 0x50},    {"MLOAD", 0x51},        {"MSTORE", 0x52},
        {"MSTORE8", 0x53},{"SLOAD", 0x54},        {"SSTORE", 0x55},
        {"JUMP", 0x56},   {"JUMPI", 0x57},        {"PC", 0x58},
        {"GAS", 0x5a},    {"JUMPDEST", 0x5b},
        {"CREATE", 0xf0}, {"CALL", 0xf1},         {"RETURN", 0xf3},
        {"DELEGATECALL", 0xf4}, {"STATICCALL", 0xfa},
        {"REVERT", 0xfd}, {"SELFDESTRUCT", 0xff},
    };
    for (int i = 0; i < 32; ++i) t.emplace_back("PUSH" + std::to_string(i + 1), uint8_t(0x60 + i));
    for (int i = 0; i < 16; ++i) t.emplace_back("DUP" + std::to_string(i + 1), uint8_t(0x80 + i));
    for (int i = 0; i < 16; ++i) t.emplace_back("SWAP" + std::to_string(i + 1), uint8_t(0x90 + i));
    for (int i = 0; i < 5; ++i) t.emplace_back("LOG" + std::to_string(i), uint8_t(0xa0 + i));
    return t;
  }();
  return table;
}

inline bool is_supported(uint8_t op) {
  static const std::set<uint8_t> bytes = [] {
    std::set<uint8_t> s;
    for (auto& [name, b] : supported_opcodes()) s.insert(b);
    return s;
  }();
  return bytes.count(op) > 0;
}

inline bool is_push(uint8_t op) { return op >= PUSH1 && op <= PUSH32; }
inline size_t push_size(uint8_t op) { return size_t(op) - PUSH1 + 1; }

struct Account {
  Bytes code;
  std::map<Word, Word> storage;  // unset keys read as zero
  Word balance = 0;
  uint64_t nonce = 0;
};

struct WorldState {
  std::map<Address, Account> accounts;
  uint64_t block_number = 0;
  uint64_t block_timestamp = 0;
  Word burned_fees = 0;

  const Account* find(const Address& a) const {
    auto it = accounts.find(a);
    return it == accounts.end() ? nullptr : &it->second;
  }
  Account& touch(const Address& a) { return accounts[a]; }
  Word balance_of(const Address& a) const {
    auto* acc = find(a);
    return acc ? acc->balance : Word(0);
  }
  Word storage_at(const Address& a, const Word& key) const {
    auto* acc = find(a);
    if (!acc) return 0;
    auto it = acc->storage.find(key);
    return it == acc->storage.end() ? Word(0) : it->second;
  }
  Word total_base() const {
    Word sum = burned_fees;
    for (auto& [addr, acc] : accounts) sum += acc.balance;
    return sum;
  }
};

struct Message {
  Address caller;
  Address origin;
  std::optional<Address> target;  // absent => contract creation
  Bytes calldata;                 // init code for creation
  Word value = 0;
  uint64_t gas_limit = 10'000'000;
};

struct BranchDecision {
  uint64_t occurrence = 0;  // Nth dynamically encountered top-frame JUMPI
  bool taken = false;       // direction to force
  auto operator<=>(const BranchDecision&) const = default;
};
using BranchOverrides = std::vector<BranchDecision>;

enum class Outcome { Success, Revert, OutOfGas };

struct ComparisonRecord {
  uint8_t opcode;
  Word lhs, rhs;
};

struct CallRecord {
  int depth = 0;
  uint8_t kind = CALL;  // CALL, STATICCALL, DELEGATECALL or CREATE
  Address caller;
  Address target;
  uint32_t selector = 0;  // first 4 calldata bytes, 0 if shorter
  Bytes args;             // full calldata
  Word value = 0;
  Bytes ret;
  bool success = false;
};

struct StorageWrite {
  Address addr;
  Word key, old_value, new_value;
};

struct JumpiRecord {
  uint64_t pc = 0;
  uint64_t occurrence = 0;
  bool taken = false;
  bool forced = false;
  Word condition = 0;
};

struct ArgMaskRecord {
  uint32_t arg_index = 0;
  uint32_t width_bits = 0;
};

struct ExecTrace {
  std::vector<std::vector<uint64_t>> pc_frames;  // [0] = top frame, then call order
  std::vector<ComparisonRecord> comparisons;
  std::vector<CallRecord> calls;
  std::map<Address, SignedWord> balance_deltas;
  std::vector<StorageWrite> storage_writes;
  std::vector<Address> created;
  std::vector<JumpiRecord> jumpis;        // top frame only
  std::vector<Word> calldataload_offsets;  // top frame only
  std::vector<ArgMaskRecord> arg_masks;    // top frame only
  std::vector<uint32_t> dyn_args;          // args used as calldata offsets (dynamic bytes)
  std::vector<Word> stack_hints;           // stack words sampled at call sites
  bool reverted = false;
  Bytes return_data;
  bool unused_overrides = false;
  uint64_t gas_used = 0;
  uint64_t steps = 0;
};

struct ExecResult {
  Outcome outcome = Outcome::Revert;
  ExecTrace trace;
  WorldState world;
};

struct VmConfig {
  uint64_t step_budget = 1'000'000;
  uint64_t call_surcharge = 100;  // flat gas per opcode is 1
  size_t max_memory = 1u << 24;
  int max_depth = 64;
};

inline Address derive_create_address(const Address& creator, uint64_t nonce) {
  uint8_t buf[28];
  std::memcpy(buf, creator.bytes.data(), 20);
  for (int i = 0; i < 8; ++i) buf[20 + i] = uint8_t(nonce >> (8 * (7 - i)));
  return to_address(hash256(buf, 28));
}

namespace detail {

struct StackSlot {
  Word v;
  int32_t arg = -1;  // calldata argument taint, top frame only
};

enum class FrameStatus { Success, Revert, Fail };

struct FrameResult {
  FrameStatus status = FrameStatus::Revert;
  Bytes output;
};

class Engine {
 public:
  Engine(const VmConfig& cfg, const BranchOverrides& overrides, ExecTrace& trace, uint64_t gas_limit)
      : cfg_(cfg), trace_(trace), gas_limit_(gas_limit) {
    for (auto& d : overrides) forced_[d.occurrence] = d.taken;
  }

  // Runs `code` in the context of `self`. Mutates `world` in place; caller
  // rolls back on non-success.
  FrameResult run(WorldState& world, const Address& self, const Bytes& code, const Message& msg,
                  int depth, bool is_static) {
    size_t frame_index = trace_.pc_frames.size();
    trace_.pc_frames.emplace_back();
    bool top = depth == 0;

    std::vector<StackSlot> stack;
    Bytes memory;
    Bytes return_data;
    uint64_t pc = 0;
    std::set<uint64_t> jumpdests;
    for (size_t i = 0; i < code.size();) {
      if (code[i] == JUMPDEST) jumpdests.insert(i);
      i += is_push(code[i]) ? 1 + push_size(code[i]) : 1;
    }

    auto fail = [&](bool as_revert, Bytes out = {}) {
      FrameResult r;
      r.status = as_revert ? FrameStatus::Revert : FrameStatus::Fail;
      r.output = std::move(out);
      return r;
    };

    while (true) {
      if (trace_.steps >= cfg_.step_budget || trace_.gas_used >= gas_limit_) {
        out_of_budget_ = true;
        return fail(false);
      }
      if (pc >= code.size()) {
        // running off the end of code is an implicit STOP
        return {FrameStatus::Success, {}};
      }
      uint8_t op = code[pc];
      trace_.pc_frames[frame_index].push_back(pc);
      trace_.steps++;
      trace_.gas_used++;

      if (!is_supported(op)) return fail(true);

      auto need = [&](size_t n) { return stack.size() >= n; };
      auto pop = [&]() {
        StackSlot s = stack.back();
        stack.pop_back();
        return s;
      };
      auto push = [&](Word v, int32_t arg = -1) { stack.push_back({std::move(v), arg}); };
      auto mem_ensure = [&](const Word& off, const Word& len) -> bool {
        if (len == 0) return true;
        if (off > cfg_.max_memory || len > cfg_.max_memory) return false;
        size_t end = size_t(off) + size_t(len);
        if (end > cfg_.max_memory) return false;
        if (memory.size() < end) memory.resize(((end + 31) / 32) * 32, 0);
        return true;
      };
      auto mem_read = [&](const Word& off, const Word& len) {
        Bytes out;
        out.resize(size_t(len));
        if (len != 0) std::memcpy(out.data(), memory.data() + size_t(off), size_t(len));
        return out;
      };

      if (is_push(op)) {
        size_t n = push_size(op);
        Word v = 0;
        for (size_t i = 0; i < n; ++i) {
          uint8_t b = pc + 1 + i < code.size() ? code[pc + 1 + i] : 0;
          v = (v << 8) | b;
        }
        if (stack.size() >= 1024) return fail(true);
        push(v);
        pc += 1 + n;
        continue;
      }
      if (op >= DUP1 && op <= DUP1 + 15) {
        size_t n = size_t(op - DUP1) + 1;
        if (!need(n) || stack.size() >= 1024) return fail(true);
        stack.push_back(stack[stack.size() - n]);
        pc++;
        continue;
      }
      if (op >= SWAP1 && op <= SWAP1 + 15) {
        size_t n = size_t(op - SWAP1) + 1;
        if (!need(n + 1)) return fail(true);
        std::swap(stack[stack.size() - 1], stack[stack.size() - 1 - n]);
        pc++;
        continue;
      }
      if (op >= LOG0 && op <= LOG4) {
        if (is_static) return fail(true);
        size_t topics = size_t(op - LOG0);
        if (!need(2 + topics)) return fail(true);
        Word off = pop().v, len = pop().v;
        for (size_t i = 0; i < topics; ++i) pop();
        if (!mem_ensure(off, len)) return fail(true);
        pc++;
        continue;
      }

      switch (op) {
        case STOP:
          return {FrameStatus::Success, {}};
        case ADD:
        case MUL:
        case SUB:
        case DIV:
        case SDIV:
        case MOD:
        case SMOD:
        case EXP:
        case SIGNEXTEND:
        case AND:
        case OR:
        case XOR:
        case BYTE:
        case SHL:
        case SHR:
        case SAR: {
          if (!need(2)) return fail(true);
          StackSlot a = pop(), b = pop();
          Word r = 0;
          int32_t taint = -1;
          switch (op) {
            case ADD:
              r = a.v + b.v;
              if (top) taint = a.arg >= 0 ? a.arg : b.arg;
              break;
            case MUL: r = a.v * b.v; break;
            case SUB: r = a.v - b.v; break;
            case DIV: r = b.v == 0 ? Word(0) : a.v / b.v; break;
            case SDIV: {
              if (b.v == 0) break;
              SignedWord sa = as_signed(a.v), sb = as_signed(b.v);
              r = from_signed(sa / sb);
              break;
            }
            case MOD: r = b.v == 0 ? Word(0) : a.v % b.v; break;
            case SMOD: {
              if (b.v == 0) break;
              SignedWord sa = as_signed(a.v), sb = as_signed(b.v);
              r = from_signed(sa % sb);
              break;
            }
            case EXP: {
              Word base = a.v, exp = b.v;
              r = 1;
              while (exp != 0) {
                if (exp & 1) r *= base;
                base *= base;
                exp >>= 1;
              }
              break;
            }
            case SIGNEXTEND: {
              if (a.v >= 31) {
                r = b.v;
              } else {
                unsigned bit = unsigned(a.v) * 8 + 7;
                Word mask = (Word(1) << (bit + 1)) - 1;
                if (b.v & (Word(1) << bit))
                  r = b.v | ~mask;
                else
                  r = b.v & mask;
              }
              break;
            }
            case AND: {
              r = a.v & b.v;
              // calldata-arg masking pattern: tainted value ANDed with a
              // 2^w - 1 constant pins the argument width
              auto mask_width = [](const Word& m) -> int {
                if (m == 0) return -1;
                Word x = m + 1;
                if ((x & (x - 1)) != 0 && x != 0) return -1;
                int w = 0;
                while (x > 1) {
                  x >>= 1;
                  w++;
                }
                return (w % 8 == 0 && w >= 8 && w <= 256) ? w : -1;
              };
              if (top) {
                if (a.arg >= 0 && b.arg < 0) {
                  int w = mask_width(b.v);
                  if (w > 0) trace_.arg_masks.push_back({uint32_t(a.arg), uint32_t(w)});
                  taint = a.arg;
                } else if (b.arg >= 0 && a.arg < 0) {
                  int w = mask_width(a.v);
                  if (w > 0) trace_.arg_masks.push_back({uint32_t(b.arg), uint32_t(w)});
                  taint = b.arg;
                }
              }
              break;
            }
            case OR: r = a.v | b.v; break;
            case XOR: r = a.v ^ b.v; break;
            case BYTE: r = a.v >= 32 ? Word(0) : Word((b.v >> (8 * (31 - unsigned(a.v)))) & 0xff); break;
            case SHL: r = a.v >= 256 ? Word(0) : Word(b.v << unsigned(a.v)); break;
            case SHR: r = a.v >= 256 ? Word(0) : Word(b.v >> unsigned(a.v)); break;
            case SAR: {
              SignedWord sb = as_signed(b.v);
              if (a.v >= 256)
                r = sb < 0 ? kWordMax : Word(0);
              else
                r = from_signed(sb >> unsigned(a.v));
              break;
            }
          }
          push(r, taint);
          pc++;
          break;
        }
        case ADDMOD:
        case MULMOD: {
          if (!need(3)) return fail(true);
          Word a = pop().v, b = pop().v, n = pop().v;
          if (n == 0) {
            push(0);
          } else {
            WideWord wide = op == ADDMOD ? WideWord(a) + WideWord(b) : WideWord(a) * WideWord(b);
            push(Word(wide % WideWord(n)));
          }
          pc++;
          break;
        }
        case LT:
        case GT:
        case SLT:
        case SGT:
        case EQ: {
          if (!need(2)) return fail(true);
          Word a = pop().v, b = pop().v;
          trace_.comparisons.push_back({op, a, b});
          bool r = false;
          switch (op) {
            case LT: r = a < b; break;
            case GT: r = a > b; break;
            case SLT: r = as_signed(a) < as_signed(b); break;
            case SGT: r = as_signed(a) > as_signed(b); break;
            case EQ: r = a == b; break;
          }
          push(r ? 1 : 0);
          pc++;
          break;
        }
        case ISZERO: {
          if (!need(1)) return fail(true);
          push(pop().v == 0 ? 1 : 0);
          pc++;
          break;
        }
        case NOT: {
          if (!need(1)) return fail(true);
          push(~pop().v);
          pc++;
          break;
        }
        case SHA3: {
          if (!need(2)) return fail(true);
          Word off = pop().v, len = pop().v;
          if (!mem_ensure(off, len)) return fail(true);
          Bytes data = mem_read(off, len);
          push(hash256(data));
          pc++;
          break;
        }
        case ADDRESS: push(to_word(self)); pc++; break;
        case BALANCE: {
          if (!need(1)) return fail(true);
          push(world.balance_of(to_address(pop().v)));
          pc++;
          break;
        }
        case ORIGIN: push(to_word(msg.origin)); pc++; break;
        case CALLER: push(to_word(msg.caller)); pc++; break;
        case CALLVALUE: push(msg.value); pc++; break;
        case CALLDATALOAD: {
          if (!need(1)) return fail(true);
          StackSlot off_slot = pop();
          Word off = off_slot.v;
          if (top && off_slot.arg >= 0) trace_.dyn_args.push_back(uint32_t(off_slot.arg));
          Word v = 0;
          for (unsigned i = 0; i < 32; ++i) {
            uint8_t b = 0;
            if (off <= msg.calldata.size()) {
              size_t idx = size_t(off) + i;
              if (idx < msg.calldata.size()) b = msg.calldata[idx];
            }
            v = (v << 8) | b;
          }
          int32_t taint = -1;
          if (top) {
            trace_.calldataload_offsets.push_back(off);
            if (off >= 4 && (off - 4) % 32 == 0) taint = int32_t((off - 4) / 32);
          }
          push(v, taint);
          pc++;
          break;
        }
        case CALLDATASIZE: push(Word(msg.calldata.size())); pc++; break;
        case CALLDATACOPY: {
          if (!need(3)) return fail(true);
          Word dst = pop().v, src = pop().v, len = pop().v;
          if (!mem_ensure(dst, len)) return fail(true);
          for (size_t i = 0; i < size_t(len); ++i) {
            size_t s = size_t(src) + i;
            memory[size_t(dst) + i] = s < msg.calldata.size() ? msg.calldata[s] : 0;
          }
          pc++;
          break;
        }
        case RETURNDATASIZE: push(Word(return_data.size())); pc++; break;
        case RETURNDATACOPY: {
          if (!need(3)) return fail(true);
          Word dst = pop().v, src = pop().v, len = pop().v;
          if (Word(src) + len > return_data.size()) return fail(true);
          if (!mem_ensure(dst, len)) return fail(true);
          for (size_t i = 0; i < size_t(len); ++i)
            memory[size_t(dst) + i] = return_data[size_t(src) + i];
          pc++;
          break;
        }
        case NUMBER: push(Word(world.block_number)); pc++; break;
        case TIMESTAMP: push(Word(world.block_timestamp)); pc++; break;
        case POP: {
          if (!need(1)) return fail(true);
          pop();
          pc++;
          break;
        }
        case MLOAD: {
          if (!need(1)) return fail(true);
          Word off = pop().v;
          if (!mem_ensure(off, 32)) return fail(true);
          push(word_from_bytes(memory.data() + size_t(off), 32));
          pc++;
          break;
        }
        case MSTORE: {
          if (!need(2)) return fail(true);
          Word off = pop().v, val = pop().v;
          if (!mem_ensure(off, 32)) return fail(true);
          auto wb = word_bytes(val);
          std::memcpy(memory.data() + size_t(off), wb.data(), 32);
          pc++;
          break;
        }
        case MSTORE8: {
          if (!need(2)) return fail(true);
          Word off = pop().v, val = pop().v;
          if (!mem_ensure(off, 1)) return fail(true);
          memory[size_t(off)] = uint8_t(val & 0xff);
          pc++;
          break;
        }
        case SLOAD: {
          if (!need(1)) return fail(true);
          push(world.storage_at(self, pop().v));
          pc++;
          break;
        }
        case SSTORE: {
          if (is_static || !need(2)) return fail(true);
          Word key = pop().v, val = pop().v;
          Word old = world.storage_at(self, key);
          trace_.storage_writes.push_back({self, key, old, val});
          if (val == 0)
            world.touch(self).storage.erase(key);
          else
            world.touch(self).storage[key] = val;
          pc++;
          break;
        }
        case JUMP: {
          if (!need(1)) return fail(true);
          Word dest = pop().v;
          if (dest > code.size() || !jumpdests.count(uint64_t(dest))) return fail(true);
          pc = uint64_t(dest);
          break;
        }
        case JUMPI: {
          if (!need(2)) return fail(true);
          Word dest = pop().v, cond = pop().v;
          bool taken = cond != 0;
          bool forced = false;
          if (top) {
            uint64_t occ = jumpi_count_++;
            auto it = forced_.find(occ);
            if (it != forced_.end()) {
              taken = it->second;
              forced = true;
              forced_.erase(it);
            }
            trace_.jumpis.push_back({pc, occ, taken, forced, cond});
          }
          if (taken) {
            if (dest > code.size() || !jumpdests.count(uint64_t(dest))) return fail(true);
            pc = uint64_t(dest);
          } else {
            pc++;
          }
          break;
        }
        case PC: push(Word(pc)); pc++; break;
        case GAS:
          push(gas_limit_ > trace_.gas_used ? Word(gas_limit_ - trace_.gas_used) : Word(0));
          pc++;
          break;
        case JUMPDEST: pc++; break;
        case CREATE: {
          if (is_static || !need(3)) return fail(true);
          if (depth >= cfg_.max_depth) return fail(true);
          Word value = pop().v, off = pop().v, len = pop().v;
          if (!mem_ensure(off, len)) return fail(true);
          Bytes init = mem_read(off, len);
          trace_.gas_used += cfg_.call_surcharge;
          if (world.balance_of(self) < value) {
            push(0);
            pc++;
            break;
          }
          Account& creator = world.touch(self);
          Address created = derive_create_address(self, creator.nonce);
          creator.nonce++;
          WorldState snapshot = world;
          world.touch(self).balance -= value;
          world.touch(created).balance += value;
          Message sub;
          sub.caller = self;
          sub.origin = msg.origin;
          sub.calldata = init;
          sub.value = value;
          CallRecord rec;
          rec.depth = depth + 1;
          rec.kind = CREATE;
          rec.caller = self;
          rec.target = created;
          rec.args = init;
          rec.value = value;
          size_t rec_index = trace_.calls.size();
          trace_.calls.push_back(rec);
          FrameResult fr = run(world, created, init, sub, depth + 1, false);
          if (fr.status == FrameStatus::Success) {
            world.touch(created).code = fr.output;
            trace_.created.push_back(created);
            trace_.calls[rec_index].success = true;
            push(to_word(created));
          } else {
            if (out_of_budget_) return fail(false);
            world = std::move(snapshot);
            push(0);
          }
          pc++;
          return_data.clear();
          break;
        }
        case CALL:
        case STATICCALL:
        case DELEGATECALL: {
          size_t nargs = op == CALL ? 7 : 6;
          if (!need(nargs)) return fail(true);
          if (depth >= cfg_.max_depth) return fail(true);
          // sample outgoing stack words as fuzzing hints
          for (size_t i = stack.size() > 8 ? stack.size() - 8 : 0; i < stack.size(); ++i)
            trace_.stack_hints.push_back(stack[i].v);
          pop();  // gas, ignored under the flat model
          Address callee = to_address(pop().v);
          Word value = op == CALL ? pop().v : Word(0);
          Word in_off = pop().v, in_len = pop().v, out_off = pop().v, out_len = pop().v;
          if (op == CALL && is_static && value != 0) return fail(true);
          if (!mem_ensure(in_off, in_len) || !mem_ensure(out_off, out_len)) return fail(true);
          Bytes input = mem_read(in_off, in_len);
          trace_.gas_used += cfg_.call_surcharge;

          Address code_addr = callee;
          Address ctx_addr = op == DELEGATECALL ? self : callee;
          Word ctx_value = op == DELEGATECALL ? msg.value : value;
          Address ctx_caller = op == DELEGATECALL ? msg.caller : self;

          CallRecord rec;
          rec.depth = depth + 1;
          rec.kind = op;
          rec.caller = ctx_caller;
          rec.target = callee;
          rec.selector = input.size() >= 4 ? (uint32_t(input[0]) << 24) | (uint32_t(input[1]) << 16) |
                                                 (uint32_t(input[2]) << 8) | uint32_t(input[3])
                                           : 0;
          rec.args = input;
          rec.value = value;
          size_t rec_index = trace_.calls.size();
          trace_.calls.push_back(rec);

          if (op == CALL && world.balance_of(self) < value) {
            push(0);
            return_data.clear();
            pc++;
            break;
          }

          WorldState snapshot = world;
          if (op == CALL && value != 0) {
            world.touch(self).balance -= value;
            world.touch(callee).balance += value;
          }

          const Account* target = world.find(code_addr);
          Bytes callee_code = target ? target->code : Bytes{};
          FrameResult fr;
          if (callee_code.empty()) {
            fr.status = FrameStatus::Success;  // plain value transfer
          } else {
            Message sub;
            sub.caller = ctx_caller;
            sub.origin = msg.origin;
            sub.target = ctx_addr;
            sub.calldata = input;
            sub.value = ctx_value;
            fr = run(world, ctx_addr, callee_code, sub, depth + 1,
                     is_static || op == STATICCALL);
          }
          if (fr.status == FrameStatus::Success) {
            trace_.calls[rec_index].success = true;
            trace_.calls[rec_index].ret = fr.output;
            return_data = fr.output;
            push(1);
          } else {
            if (out_of_budget_) return fail(false);
            world = std::move(snapshot);
            trace_.calls[rec_index].ret = fr.output;
            return_data = fr.output;
            push(0);
          }
          size_t copy_len = std::min(size_t(out_len), return_data.size());
          if (copy_len != 0) std::memcpy(memory.data() + size_t(out_off), return_data.data(), copy_len);
          pc++;
          break;
        }
        case RETURN:
        case REVERT: {
          if (!need(2)) return fail(true);
          Word off = pop().v, len = pop().v;
          if (!mem_ensure(off, len)) return fail(true);
          Bytes out = mem_read(off, len);
          if (op == RETURN) return {FrameStatus::Success, std::move(out)};
          return fail(true, std::move(out));
        }
        case SELFDESTRUCT: {
          if (is_static || !need(1)) return fail(true);
          Address heir = to_address(pop().v);
          Word bal = world.balance_of(self);
          world.touch(self).balance = 0;
          world.touch(heir).balance += bal;
          world.touch(self).code.clear();
          world.touch(self).storage.clear();
          return {FrameStatus::Success, {}};
        }
        default:
          return fail(true);
      }
    }
  }

  bool out_of_budget() const { return out_of_budget_; }
  bool overrides_left() const { return !forced_.empty(); }

 private:
  const VmConfig& cfg_;
  ExecTrace& trace_;
  uint64_t gas_limit_;
  std::map<uint64_t, bool> forced_;
  uint64_t jumpi_count_ = 0;
  bool out_of_budget_ = false;
};

}  // namespace detail

// Executes a message against a copy of `world`. With non-empty overrides the
// Nth dynamically encountered top-frame JUMPI takes the forced direction
// regardless of its condition. Nested frames always run concretely.
inline ExecResult execute(const WorldState& world, const Message& msg,
                          const BranchOverrides& overrides = {}, const VmConfig& cfg = {}) {
  ExecResult result;
  result.world = world;
  detail::Engine engine(cfg, overrides, result.trace, msg.gas_limit);

  WorldState work = world;
  Address target;
  Bytes code;
  if (msg.target) {
    target = *msg.target;
    auto* acc = work.find(target);
    code = acc ? acc->code : Bytes{};
  } else {
    Account& sender = work.touch(msg.caller);
    target = derive_create_address(msg.caller, sender.nonce);
    sender.nonce++;
    code = msg.calldata;
  }

  if (work.balance_of(msg.caller) < msg.value) {
    result.outcome = Outcome::Revert;
    result.trace.reverted = true;
    return result;
  }
  if (msg.value != 0) {
    work.touch(msg.caller).balance -= msg.value;
    work.touch(target).balance += msg.value;
  }

  detail::FrameResult fr;
  if (code.empty() && msg.target) {
    fr.status = detail::FrameStatus::Success;  // plain transfer
    result.trace.pc_frames.emplace_back();
  } else {
    Message frame_msg = msg;
    frame_msg.target = target;
    fr = engine.run(work, target, code, frame_msg, 0, false);
  }

  result.trace.unused_overrides = engine.overrides_left();
  result.trace.return_data = fr.output;

  if (fr.status == detail::FrameStatus::Success) {
    if (!msg.target) {
      work.touch(target).code = fr.output;
      result.trace.created.insert(result.trace.created.begin(), target);
    }
    result.outcome = Outcome::Success;
    result.world = std::move(work);
    for (auto& [addr, acc] : result.world.accounts) {
      SignedWord before = SignedWord(world.balance_of(addr));
      SignedWord after = SignedWord(acc.balance);
      if (before != after) result.trace.balance_deltas[addr] = after - before;
    }
  } else {
    result.outcome = engine.out_of_budget() ? Outcome::OutOfGas : Outcome::Revert;
    result.trace.reverted = true;
    result.world = world;  // revert restores the original state
  }
  return result;
}

}  // namespace backrunner::minivm

#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "abi.hpp"
#include "funcx.hpp"
#include "minivm.hpp"
#include "words.hpp"

namespace backrunner::prog {

// Argument of a reconstructed action: a literal, a slice of an earlier
// action's return data, or an unfilled hole.
struct ArgValue {
  enum class Kind { Constant, PriorReturn, Hole };
  Kind kind = Kind::Constant;
  Bytes constant;          // Constant: 32-byte word or raw bytes
  size_t src_action = 0;   // PriorReturn: strictly earlier action index
  size_t byte_off = 0;
  size_t byte_len = 32;
  size_t hole_index = 0;   // Hole

  static ArgValue constant_word(const Word& w) {
    ArgValue v;
    v.kind = Kind::Constant;
    auto wb = word_bytes(w);
    v.constant.assign(wb.begin(), wb.end());
    return v;
  }
  static ArgValue prior(size_t action, size_t off = 0, size_t len = 32) {
    ArgValue v;
    v.kind = Kind::PriorReturn;
    v.src_action = action;
    v.byte_off = off;
    v.byte_len = len;
    return v;
  }
  static ArgValue hole(size_t index) {
    ArgValue v;
    v.kind = Kind::Hole;
    v.hole_index = index;
    return v;
  }
  Word as_word() const { return word_from_bytes(constant); }
};

// One semantic step of a reconstructed attack.
struct Action {
  enum class Kind { Call, Flashloan, Swap, Transfer, Create };
  Kind kind = Kind::Call;
  Address target;  // callee; provider for Flashloan; pool for Swap; token for Transfer
  uint32_t selector = 0;
  std::vector<ArgValue> args;
  Word value = 0;
  // Flashloan extras
  Address fl_token;
  // Swap extras
  Address token_in, token_out;
  // Transfer extras
  Address from_addr, to_addr;
  // Create extras
  Bytes initcode;
  Address created_addr;  // address the observed creation landed at
};

struct ActionTrace {
  std::vector<Action> actions;
  std::set<Address> attacker_addresses;
  std::vector<Address> victim_set;  // ordered, subset of referenced addresses
  // address substitution applied at replay time; Create actions extend it
  // with observed-address -> replayed-address entries as they run
  std::map<Address, Address> remap;
};

// How a rule-based fill resolves at execution time. Rule fills are dynamic:
// they are recomputed against the live world when the program runs, so swap
// quotes and allowances track state changes made by earlier actions.
struct RuleFill {
  // Fixed: value structurally implied by the surrounding actions (loan
  // receiver, approval spender, the zero side of a swap); flat_amount holds it
  enum class Kind { None, FlashloanNeed, RepayWithFee, Allowance, SwapQuote, Fixed };
  Kind kind = Kind::None;
  Address token;
  Address owner, spender;       // Allowance
  Address pool;                 // SwapQuote
  bool out_is_token0 = false;   // SwapQuote: which side leaves the pool
  size_t ref_action = 0;        // action whose amount feeds the computation
  size_t ref_arg = 0;           // which argument of that action carries it
  Word flat_amount = 0;         // FlashloanNeed / RepayWithFee base amount
  Word fee_bps = 0;
};

struct Hole {
  enum class Source { None, Default, Rule, Fuzz };
  // hijack: calldata argument index; backrun: (action, arg) position
  size_t action_index = 0;
  size_t arg_index = 0;
  funcx::ArgType type = funcx::ArgType::unknown();
  std::optional<Bytes> filled;  // static fill, encoded under type
  RuleFill rule;                // dynamic fill when source == Rule
  Source source = Source::None;

  bool is_filled() const { return filled.has_value() || rule.kind != RuleFill::Kind::None; }
  Word filled_word() const { return filled ? word_from_bytes(*filled) : Word(0); }
  void fill_word(const Word& w, Source s) {
    auto wb = word_bytes(w);
    filled = Bytes(wb.begin(), wb.end());
    source = s;
  }
};

struct ProgramWithHoles {
  enum class Provenance { Hijack, Backrun };
  Provenance provenance = Provenance::Hijack;
  Address target;                // exploit contract (hijack provenance)
  funcx::FunctionDesc function;  // hijack provenance
  minivm::BranchOverrides decisions;
  std::vector<Hole> holes;
  std::vector<Address> sender_candidates;
  std::vector<Action> actions;   // backrun provenance
  std::map<Address, Address> remap;     // backrun provenance, see ActionTrace
  std::vector<uint64_t> realized_path;  // top-frame pc trace of the cloning run
  bool truncated = false;

  size_t unfilled_holes() const {
    size_t n = 0;
    for (auto& h : holes)
      if (!h.is_filled()) n++;
    return n;
  }
};

// Default whitehat identity used when no sender candidate applies.
inline Address default_whitehat() { return make_address(0x77AA77AA); }

}  // namespace backrunner::prog

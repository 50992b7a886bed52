#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chainsim.hpp"
#include "contracts.hpp"
#include "easm.hpp"

// Canned rescue scenarios: each bundles a deterministic world, a scripted
// attacker timeline and the facts a harness needs to judge the defense
// (who loses value, when, and where the rescue should land instead).
namespace backrunner::corpus {

// scenario-local function selectors
namespace sel {
inline constexpr uint32_t kReward = 0xab12cd34;     // reward(address)
inline constexpr uint32_t kGo = 0x60600001;         // go()
inline constexpr uint32_t kTrigger = 0x7f1c3e01;    // trigger(uint256)
inline constexpr uint32_t kAirdrop = 0xa1d20001;    // airdrop(uint256)
inline constexpr uint32_t kRedeemAll = 0x4ed33a01;  // redeemAll()
inline constexpr uint32_t kTake = 0x7a6e0001;       // take(address,uint256)
inline constexpr uint32_t kAggregate = 0x252dba42;  // aggregate(n, addr, sel, ...)
inline constexpr uint32_t kClaim = 0xc1a1a001;      // claim()
inline constexpr uint32_t kWhoami = 0x3019a001;     // whoami()
}  // namespace sel

// airdrop-token extra storage
inline constexpr uint64_t kAirdropCapSlot = 5;
inline constexpr uint64_t kAirdropFlagSlot = 6;  // one-shot latch
inline constexpr uint64_t kClaimFlagSlot = 7;    // one-shot latch of the claim victim

struct ScriptedTx {
  uint64_t tick = 0;
  chainsim::Tx tx;
};

struct Scenario {
  std::string name;
  std::string summary;
  minivm::WorldState world;
  chainsim::PriceBook book;
  std::vector<ScriptedTx> timeline;  // sorted by tick
  Address attacker;
  Address victim;         // account whose value the scripted attack takes
  Word victim_value = 0;  // its value at stake before the attack
  Address rescue_target;  // account the defense should realize value from
  uint64_t attack_tick = 0;
  uint64_t copycat_tick = 0;  // zero when the scenario has no copycat
  bool defensible = true;
  std::string expected_failure;  // non-defensible: note the report should carry
  std::map<std::string, Address> landmarks;
};

namespace detail {

using contracts::detail::arg;
using contracts::detail::caller;
using contracts::detail::emit_call;
using contracts::detail::map_slot;
using contracts::detail::ret_one;
using contracts::detail::self;
using easm::Assembler;

inline auto cw(const Word& v) {
  return [v](Assembler& a) { a.push(v, 32); };
}
inline auto ca(const Address& v) { return cw(to_word(v)); }
inline auto mload_at(uint64_t off) {
  return [off](Assembler& a) { a.push(off).op(minivm::MLOAD); };
}

// CALL(caller, value = whole base balance), then continue
inline void send_all_to_caller(Assembler& a) {
  using namespace minivm;
  a.push(0).push(0).push(0).push(0);
  a.op(ADDRESS).op(BALANCE);
  a.op(CALLER);
  a.op(GAS).op(CALL);
  a.op(ISZERO).jumpi("fail");
}

}  // namespace detail

// ---- runtime gadgets ----

// whoami() returns the caller; everything else reverts
inline Bytes echo_code() {
  using namespace minivm;
  easm::Assembler a;
  a.dispatcher({{sel::kWhoami, "w"}}).revert();
  a.label("w");
  a.op(CALLER).push(0).op(MSTORE).return_word();
  return a.assemble();
}

// pays its whole base balance to `payout` when the caller holds at least
// `threshold` of `token`
inline Bytes bounty_code(const Address& token, const Word& threshold) {
  using namespace detail;
  using namespace minivm;
  Assembler a;
  a.dispatcher({{sel::kReward, "r"}}).revert();
  a.label("r");  // reward(payout)
  emit_call(a, abi::sel::kBalanceOf, {caller()}, ca(token), 0x80, 32);
  a.op(ISZERO).jumpi("fail");
  a.push(0x80).op(MLOAD).push(threshold).op(GT).jumpi("fail");  // threshold > balance
  a.push(0).push(0).push(0).push(0);
  a.op(ADDRESS).op(BALANCE);
  a.load_arg(0);
  a.op(GAS).op(CALL);
  a.op(ISZERO).jumpi("fail");
  a.op(STOP);
  a.label("fail").revert();
  return a.assemble();
}

// redeemAll(): pulls the caller's full `wrapped` balance via allowance and
// pays base 1:1 from its own float
inline Bytes redeemer_code(const Address& wrapped) {
  using namespace detail;
  using namespace minivm;
  Assembler a;
  a.dispatcher({{sel::kRedeemAll, "r"}}).revert();
  a.label("r");
  emit_call(a, abi::sel::kBalanceOf, {caller()}, ca(wrapped), 0x80, 32);
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kTransferFrom, {caller(), self(), mload_at(0x80)}, ca(wrapped));
  a.op(ISZERO).jumpi("fail");
  a.push(0).push(0).push(0).push(0);
  a.push(0x80).op(MLOAD);
  a.op(CALLER);
  a.op(GAS).op(CALL);
  a.op(ISZERO).jumpi("fail");
  a.op(STOP);
  a.label("fail").revert();
  return a.assemble();
}

// take(from, amount): relays transferFrom(from, caller, amount) on `wrapped`,
// spending whatever allowance `from` granted this contract
inline Bytes take_code(const Address& wrapped) {
  using namespace detail;
  using namespace minivm;
  Assembler a;
  a.dispatcher({{sel::kTake, "t"}}).revert();
  a.label("t");
  emit_call(a, abi::sel::kTransferFrom, {arg(0), caller(), arg(1)}, ca(wrapped));
  a.op(ISZERO).jumpi("fail");
  a.op(STOP);
  a.label("fail").revert();
  return a.assemble();
}

// claim(): pays the whole base balance to the caller, unconditionally or
// (one_shot) only once ever
inline Bytes claim_code(bool one_shot) {
  using namespace detail;
  using namespace minivm;
  Assembler a;
  a.dispatcher({{sel::kClaim, "c"}}).revert();
  a.label("c");
  if (one_shot) {
    a.push(kClaimFlagSlot).op(SLOAD).jumpi("fail");
    a.push(1).push(kClaimFlagSlot).op(SSTORE);
  }
  send_all_to_caller(a);
  a.op(STOP);
  a.label("fail").revert();
  return a.assemble();
}

// standard token plus a capped, one-shot airdrop(amount) faucet
inline Bytes airdrop_token_code() {
  using namespace detail;
  using namespace minivm;
  return contracts::token_code({{sel::kAirdrop, "airdrop"}}, [](Assembler& a) {
    a.label("airdrop");  // airdrop(amount)
    a.push(kAirdropCapSlot).op(SLOAD).load_arg(0).op(GT).jumpi("fail");  // amount > cap
    a.push(kAirdropFlagSlot).op(SLOAD).jumpi("fail");                    // already used
    a.push(1).push(kAirdropFlagSlot).op(SSTORE);
    a.op(CALLER);
    map_slot(a, contracts::kBalanceIndex);
    a.op(DUP1).op(SLOAD).load_arg(0).op(ADD).op(SWAP1).op(SSTORE);
    ret_one(a);
  });
}

// aggregate(n, target1, selword1, ...): forwards n zero-argument calls, then
// sends the accumulated base balance back to the caller. The call list lives
// entirely in calldata; the code names no one.
inline Bytes launchpad_code() {
  using namespace detail;
  using namespace minivm;
  Assembler a;
  a.dispatcher({{sel::kAggregate, "g"}}).op(STOP);
  a.label("g");
  a.push(0).push(0x200).op(MSTORE);  // i = 0
  a.label("loop");
  a.push(0x200).op(MLOAD).load_arg(0).op(GT).jumpi("body");  // n > i
  a.jump("done");
  a.label("body");
  a.push(0x200).op(MLOAD).push(64).op(MUL).push(36).op(ADD);  // arg offset of target_i
  a.op(DUP1).op(CALLDATALOAD).push(0x220).op(MSTORE);         // save target
  a.push(32).op(ADD).op(CALLDATALOAD).push(0).op(MSTORE);     // selector word to mem[0]
  a.push(0).push(0).push(4).push(0).push(0);
  a.push(0x220).op(MLOAD);
  a.op(GAS).op(CALL);
  a.op(ISZERO).jumpi("fail");
  a.push(0x200).op(MLOAD).push(1).op(ADD).push(0x200).op(MSTORE);
  a.jump("loop");
  a.label("done");
  send_all_to_caller(a);
  a.op(STOP);
  a.label("fail").revert();
  return a.assemble();
}

// trigger(amount), guarded twice: caller must equal storage slot 0 and the
// hash of the origin must equal storage slot 1. Behind the gates: flashloan
// `amount` of `token` to self, claim the bounty to the caller, settle.
inline Bytes gated_exploit_code(const Address& provider, const Address& token,
                                const Address& victim) {
  using namespace detail;
  using namespace minivm;
  Assembler a;
  a.dispatcher({{sel::kTrigger, "t"}}).revert();
  a.label("t");
  a.op(CALLER).push(0).op(SLOAD).op(EQ).op(ISZERO).jumpi("fail");
  a.op(ORIGIN).push(0).op(MSTORE);
  a.push(32).push(0).op(SHA3);
  a.push(1).op(SLOAD).op(EQ).op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kFlashloan, {self(), ca(token), arg(0)}, ca(provider));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, sel::kReward, {caller()}, ca(victim));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kApprove, {ca(provider), arg(0)}, ca(token));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kRepay, {arg(0)}, ca(provider));
  a.op(ISZERO).jumpi("fail");
  a.op(STOP);
  a.label("fail").revert();
  return a.assemble();
}

// go(): airdrop -> deposit into the pool -> swap out `out_amount` of wrapped
// -> approve the redeemer -> redeem. Profit stays on this contract; its
// dispatcher accepts plain value transfers.
inline Bytes grok_orchestrator_code(const Address& token, const Address& lp,
                                    const Address& wrapped, const Address& redeemer,
                                    const Word& in_amount, const Word& out_amount) {
  using namespace detail;
  using namespace minivm;
  Assembler a;
  a.dispatcher({{sel::kGo, "g"}}).op(STOP);
  a.label("g");
  emit_call(a, sel::kAirdrop, {cw(in_amount)}, ca(token));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kTransfer, {ca(lp), cw(in_amount)}, ca(token));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kSwap, {cw(0), cw(out_amount), self()}, ca(lp));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kApprove, {ca(redeemer), cw(out_amount)}, ca(wrapped));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, sel::kRedeemAll, {}, ca(redeemer));
  a.op(ISZERO).jumpi("fail");
  a.op(STOP);
  a.label("fail").revert();
  return a.assemble();
}

// go(): flashloan-funded bounty claim plus a two-pool round trip to settle.
// Every address the sequence touches is either queried live (whoami, token0,
// balanceOf) or appears exactly once as a literal.
inline Bytes bearndao_orchestrator_code(const Address& echo, const Address& provider,
                                        const Address& token, const Address& wrapped,
                                        const Address& victim, const Address& lp1,
                                        const Address& lp2, const Word& loan, const Word& out1,
                                        const Word& out2, const Word& debt) {
  using namespace detail;
  using namespace minivm;
  Assembler a;
  a.dispatcher({{sel::kGo, "g"}}).op(STOP);
  a.label("g");
  emit_call(a, sel::kWhoami, {}, ca(echo), 0x80, 32);  // mem[0x80] = me
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kToken0, {}, ca(lp1), 0xA0, 32);  // mem[0xA0] = traded token
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kFlashloan, {mload_at(0x80), mload_at(0xA0), cw(loan)}, ca(provider));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, sel::kReward, {mload_at(0x80)}, ca(victim));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kBalanceOf, {mload_at(0x80)}, ca(token), 0xC0, 32);
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kTransfer, {ca(lp1), mload_at(0xC0)}, ca(token));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kSwap, {cw(0), cw(out1), mload_at(0x80)}, ca(lp1));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kBalanceOf, {mload_at(0x80)}, ca(wrapped), 0xC0, 32);
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kTransfer, {ca(lp2), mload_at(0xC0)}, ca(wrapped));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kSwap, {cw(out2), cw(0), mload_at(0x80)}, ca(lp2));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kApprove, {ca(provider), cw(debt)}, ca(token));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kRepay, {cw(debt)}, ca(provider));
  a.op(ISZERO).jumpi("fail");
  a.op(STOP);
  a.label("fail").revert();
  return a.assemble();
}

// go(): pull `amount` of the vault's wrapped tokens through the relay, then
// redeem them for base
inline Bytes drain_orchestrator_code(const Address& relay, const Address& vault,
                                     const Address& wrapped, const Address& redeemer,
                                     const Word& amount) {
  using namespace detail;
  using namespace minivm;
  Assembler a;
  a.dispatcher({{sel::kGo, "g"}}).op(STOP);
  a.label("g");
  emit_call(a, sel::kTake, {ca(vault), cw(amount)}, ca(relay));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, abi::sel::kApprove, {ca(redeemer), cw(amount)}, ca(wrapped));
  a.op(ISZERO).jumpi("fail");
  emit_call(a, sel::kRedeemAll, {}, ca(redeemer));
  a.op(ISZERO).jumpi("fail");
  a.op(STOP);
  a.label("fail").revert();
  return a.assemble();
}

// Deployment wrapper: the interpreter has no code-copy instruction, so the
// constructor writes the runtime into memory in 32-byte push chunks, applies
// the requested storage writes and returns the runtime.
inline Bytes deploy_bytecode(const Bytes& runtime,
                             const std::vector<std::pair<Word, Word>>& ctor_stores = {}) {
  using namespace minivm;
  easm::Assembler a;
  for (size_t off = 0; off < runtime.size(); off += 32) {
    Word chunk = 0;
    for (size_t i = 0; i < 32; ++i) {
      chunk <<= 8;
      if (off + i < runtime.size()) chunk |= runtime[off + i];
    }
    a.push(chunk, 32).push(off).op(MSTORE);
  }
  for (auto& [slot, value] : ctor_stores) a.push(value, 32).push(slot).op(SSTORE);
  a.push(runtime.size()).push(0).op(RETURN);
  return a.assemble();
}

namespace detail {

inline minivm::Message call_msg(const Address& from, const Address& to, Bytes calldata) {
  minivm::Message m;
  m.caller = from;
  m.origin = from;
  m.target = to;
  m.calldata = std::move(calldata);
  return m;
}

inline ScriptedTx scripted(uint64_t tick, minivm::Message msg, Word gas_price = 2) {
  ScriptedTx s;
  s.tick = tick;
  s.tx.msg = std::move(msg);
  s.tx.gas_price = gas_price;
  return s;
}

// ---- builders ----

// A deployed exploit with a spoofable owner gate and a hashed-origin gate in
// front of a flashloan-funded bounty drain. Deployed at tick 2, triggered by
// its owner at tick 10; the defense window is the gap between the two.
inline Scenario build_honeypot_gated() {
  Scenario s;
  s.name = "honeypot-gated";
  s.summary =
      "exploit contract with owner and origin-hash gates, deployed ahead of a "
      "flashloan-funded bounty drain";
  Address token = make_address(0x5101), provider = make_address(0x5102),
          victim = make_address(0x5103), attacker = make_address(0x51AA);
  contracts::deploy_token(s.world, token);
  contracts::deploy_provider(s.world, provider, token, 0, 800);
  s.world.touch(victim).code = bounty_code(token, 500);
  s.world.touch(victim).balance = 5000;
  s.world.touch(attacker).balance = 5'000'000;

  Bytes runtime = gated_exploit_code(provider, token, victim);
  Bytes initcode = deploy_bytecode(
      runtime, {{Word(0), to_word(attacker)}, {Word(1), hash_word(to_word(attacker))}});
  Address exploit = minivm::derive_create_address(attacker, 0);

  minivm::Message deploy;
  deploy.caller = attacker;
  deploy.origin = attacker;
  deploy.calldata = std::move(initcode);  // creation: no target
  s.timeline.push_back(scripted(2, std::move(deploy)));
  s.timeline.push_back(
      scripted(10, call_msg(attacker, exploit, abi::make_calldata(sel::kTrigger, {Word(800)}))));

  s.book.wrapped = token;
  s.attacker = attacker;
  s.victim = victim;
  s.victim_value = 5000;
  s.rescue_target = victim;
  s.attack_tick = 10;
  s.landmarks = {{"token", token},   {"provider", provider}, {"victim", victim},
                 {"exploit", exploit}, {"attacker", attacker}};
  return s;
}

// Two structurally identical token/pool pairs. The observed attack empties
// pair one; a copycat is scripted against pair two a few ticks later, so the
// defense must retarget the replay at the fork before then.
inline Scenario build_fork_pair() {
  Scenario s;
  s.name = "fork-pair";
  s.summary =
      "airdrop-funded pool drain with an identical forked deployment; the "
      "copycat against the fork is scripted a few ticks after the original";
  Address wrapped = make_address(0x5201), token1 = make_address(0x5202),
          token2 = make_address(0x5203), lp1 = make_address(0x5204), lp2 = make_address(0x5205),
          redeemer = make_address(0x5206), orch1 = make_address(0x5207),
          orch2 = make_address(0x5208), attacker = make_address(0x52AA),
          copycat = make_address(0x52BB);
  contracts::deploy_token(s.world, wrapped);
  s.world.touch(token1).code = airdrop_token_code();
  s.world.touch(token1).storage[kAirdropCapSlot] = 1000;
  s.world.touch(token2).code = airdrop_token_code();
  s.world.touch(token2).storage[kAirdropCapSlot] = 1000;
  contracts::deploy_lp(s.world, lp1, token1, wrapped, 1000, 5000);
  contracts::deploy_lp(s.world, lp2, token2, wrapped, 1000, 3000);
  s.world.touch(redeemer).code = redeemer_code(wrapped);
  s.world.touch(redeemer).balance = 10'000;
  s.world.touch(attacker).balance = 5'000'000;
  s.world.touch(copycat).balance = 5'000'000;

  Word out1 = *contracts::quote_swap_out(s.world, lp1, 500, /*out_is_token0=*/false);
  Word out2 = *contracts::quote_swap_out(s.world, lp2, 500, /*out_is_token0=*/false);
  s.world.touch(orch1).code = grok_orchestrator_code(token1, lp1, wrapped, redeemer, 500, out1);
  s.world.touch(orch2).code = grok_orchestrator_code(token2, lp2, wrapped, redeemer, 500, out2);

  s.timeline.push_back(scripted(2, call_msg(attacker, orch1, abi::make_calldata(sel::kGo))));
  s.timeline.push_back(scripted(8, call_msg(copycat, orch2, abi::make_calldata(sel::kGo))));

  s.book.wrapped = wrapped;
  s.book.pools = {{token1, lp1, true}, {token2, lp2, true}};
  s.attacker = attacker;
  s.victim = lp1;
  s.victim_value = chainsim::value_of(s.world, lp1, s.book);
  s.rescue_target = lp2;
  s.attack_tick = 2;
  s.copycat_tick = 8;
  s.landmarks = {{"wrapped", wrapped}, {"token1", token1},   {"token2", token2},
                 {"lp1", lp1},         {"lp2", lp2},         {"redeemer", redeemer},
                 {"orch1", orch1},     {"orch2", orch2},     {"attacker", attacker},
                 {"copycat", copycat}};
  return s;
}

// A relay spends a vault's standing allowance. The observed attack takes
// part of the balance; the straight replay over-asks and fails, so only a
// search over the amount argument recovers the remainder.
inline Scenario build_approval_drain() {
  Scenario s;
  s.name = "approval-drain";
  s.summary =
      "standing-allowance drain through a relay; the leftover balance is "
      "smaller than the observed amount, so the replay must shrink its ask";
  Address wrapped = make_address(0x5301), redeemer = make_address(0x5302),
          relay = make_address(0x5303), vault = make_address(0x5304), orch = make_address(0x5305),
          attacker = make_address(0x53AA);
  contracts::deploy_token(s.world, wrapped);
  s.world.touch(redeemer).code = redeemer_code(wrapped);
  s.world.touch(redeemer).balance = 5000;
  s.world.touch(relay).code = take_code(wrapped);
  s.world.touch(vault);  // keep the vault visible to account scans
  contracts::mint(s.world, wrapped, vault, 1000);
  contracts::set_allowance(s.world, wrapped, vault, relay, 1'000'000);
  s.world.touch(orch).code = drain_orchestrator_code(relay, vault, wrapped, redeemer, 600);
  s.world.touch(attacker).balance = 5'000'000;

  s.timeline.push_back(scripted(3, call_msg(attacker, orch, abi::make_calldata(sel::kGo))));

  s.book.wrapped = wrapped;
  s.attacker = attacker;
  s.victim = vault;
  s.victim_value = 1000;
  s.rescue_target = vault;
  s.attack_tick = 3;
  s.landmarks = {{"wrapped", wrapped}, {"redeemer", redeemer}, {"relay", relay},
                 {"vault", vault},     {"orch", orch},         {"attacker", attacker}};
  return s;
}

// The attack routes through a generic call aggregator whose victim address
// exists only in the attacker's calldata, and the victim pays exactly once
// per balance. Nothing remains to rescue and nothing to synthesize ahead of
// time: the expected defense outcome is a reported failure.
inline Scenario build_launchpad() {
  Scenario s;
  s.name = "launchpad";
  s.summary =
      "one-shot drain through a generic call aggregator; the victim appears "
      "only in calldata and is empty by the time any replay runs";
  Address pad = make_address(0x5401), victim = make_address(0x5402),
          attacker = make_address(0x54AA);
  s.world.touch(pad).code = launchpad_code();
  s.world.touch(victim).code = claim_code(/*one_shot=*/false);
  s.world.touch(victim).balance = 4000;
  s.world.touch(attacker).balance = 5'000'000;

  s.timeline.push_back(scripted(
      3, call_msg(attacker, pad,
                  abi::make_calldata(sel::kAggregate,
                                     {Word(1), to_word(victim), Word(sel::kClaim) << 224}))));

  s.attacker = attacker;
  s.victim = victim;
  s.victim_value = 4000;
  s.rescue_target = victim;
  s.attack_tick = 3;
  s.defensible = false;
  s.expected_failure = "no profitable program";
  s.landmarks = {{"pad", pad}, {"victim", victim}, {"attacker", attacker}};
  return s;
}

// The whole attack happens inside a constructor: the deployed code is empty
// and the victim's one-shot latch burns on the first claim, so neither the
// creation event nor the replayed action list yields a profitable program.
inline Scenario build_constructor_attack() {
  Scenario s;
  s.name = "constructor-attack";
  s.summary =
      "drain executed entirely inside a constructor against a one-shot "
      "victim; the deployed code is empty and the replay hits the burnt latch";
  Address victim = make_address(0x5501), attacker = make_address(0x55AA);
  s.world.touch(victim).code = claim_code(/*one_shot=*/true);
  s.world.touch(victim).balance = 4000;
  s.world.touch(attacker).balance = 5'000'000;

  using namespace minivm;
  easm::Assembler a;
  contracts::detail::emit_call(a, sel::kClaim, {}, detail::ca(victim));
  a.op(ISZERO).jumpi("fail");
  detail::send_all_to_caller(a);
  a.push(0).push(0).op(RETURN);
  a.label("fail").revert();

  minivm::Message deploy;
  deploy.caller = attacker;
  deploy.origin = attacker;
  deploy.calldata = a.assemble();
  s.timeline.push_back(scripted(3, std::move(deploy)));

  s.attacker = attacker;
  s.victim = victim;
  s.victim_value = 4000;
  s.rescue_target = victim;
  s.attack_tick = 3;
  s.defensible = false;
  s.expected_failure = "no profitable program";
  s.landmarks = {{"victim", victim},
                 {"attacker", attacker},
                 {"created", minivm::derive_create_address(attacker, 0)}};
  return s;
}

// Flashloan-funded bounty drain with a two-pool settlement round trip and a
// second, identical bounty contract. The orchestrator resolves almost every
// address live, so the replayed program carries ten literal holes of which
// nine close by rule.
inline Scenario build_bearndao() {
  Scenario s;
  s.name = "bearndao";
  s.summary =
      "flashloan-funded bounty drain settled through a two-pool round trip, "
      "with an identical second bounty left standing for the defense";
  Address echo = make_address(0x5601), token = make_address(0x5602),
          wrapped = make_address(0x5603), provider = make_address(0x5604),
          lp1 = make_address(0x5605), lp2 = make_address(0x5606), victim = make_address(0x5607),
          victim2 = make_address(0x5608), orch = make_address(0x5609),
          attacker = make_address(0x56AA);
  s.world.touch(echo).code = echo_code();
  contracts::deploy_token(s.world, token);
  contracts::deploy_token(s.world, wrapped);
  contracts::deploy_provider(s.world, provider, token, 0, 1000);
  contracts::deploy_lp(s.world, lp1, token, wrapped, 1000, 2000);
  contracts::deploy_lp(s.world, lp2, token, wrapped, 3000, 2000);
  s.world.touch(victim).code = bounty_code(token, 100);
  s.world.touch(victim).balance = 3000;
  s.world.touch(victim2).code = bounty_code(token, 100);
  s.world.touch(victim2).balance = 3000;
  contracts::mint(s.world, token, orch, 7);  // keeps live balances off round numbers
  s.world.touch(attacker).balance = 5'000'000;

  Word loan = 150;
  Word out1 = *contracts::quote_swap_out(s.world, lp1, loan + 7, /*out_is_token0=*/false);
  Word out2 = *contracts::quote_swap_out(s.world, lp2, out1, /*out_is_token0=*/true);
  s.world.touch(orch).code = bearndao_orchestrator_code(echo, provider, token, wrapped, victim,
                                                        lp1, lp2, loan, out1, out2, loan);

  s.timeline.push_back(scripted(3, call_msg(attacker, orch, abi::make_calldata(sel::kGo))));

  s.book.wrapped = wrapped;
  s.book.pools = {{token, lp1, true}};
  s.attacker = attacker;
  s.victim = victim;
  s.victim_value = 3000;
  s.rescue_target = victim2;
  s.attack_tick = 3;
  s.landmarks = {{"echo", echo},     {"token", token},     {"wrapped", wrapped},
                 {"provider", provider}, {"lp1", lp1},     {"lp2", lp2},
                 {"victim", victim}, {"victim2", victim2}, {"orch", orch},
                 {"attacker", attacker}};
  return s;
}

}  // namespace detail

inline std::vector<std::string> names() {
  return {"honeypot-gated", "fork-pair",  "approval-drain",
          "launchpad",      "constructor-attack", "bearndao"};
}

inline std::optional<Scenario> build(const std::string& name) {
  if (name == "honeypot-gated") return detail::build_honeypot_gated();
  if (name == "fork-pair") return detail::build_fork_pair();
  if (name == "approval-drain") return detail::build_approval_drain();
  if (name == "launchpad") return detail::build_launchpad();
  if (name == "constructor-attack") return detail::build_constructor_attack();
  if (name == "bearndao") return detail::build_bearndao();
  return std::nullopt;
}

// ---- serialization ----

inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["summary"] = s.summary;
  j["world"] = chainsim::world_to_json(s.world);
  j["book"]["wrapped"] = to_hex(s.book.wrapped);
  j["book"]["pools"] = nlohmann::json::array();
  for (auto& p : s.book.pools)
    j["book"]["pools"].push_back({{"token", to_hex(p.token)},
                                  {"lp", to_hex(p.lp)},
                                  {"token_is_token0", p.token_is_token0}});
  j["timeline"] = nlohmann::json::array();
  for (auto& st : s.timeline) {
    nlohmann::json t;
    t["tick"] = st.tick;
    t["gas_price"] = to_hex(st.tx.gas_price);
    t["private"] = st.tx.is_private;
    t["from"] = to_hex(st.tx.msg.caller);
    if (st.tx.msg.target) t["to"] = to_hex(*st.tx.msg.target);
    t["value"] = to_hex(st.tx.msg.value);
    t["calldata"] = to_hex(st.tx.msg.calldata);
    j["timeline"].push_back(std::move(t));
  }
  j["attacker"] = to_hex(s.attacker);
  j["victim"] = to_hex(s.victim);
  j["victim_value"] = to_hex(s.victim_value);
  j["rescue_target"] = to_hex(s.rescue_target);
  j["attack_tick"] = s.attack_tick;
  j["copycat_tick"] = s.copycat_tick;
  j["defensible"] = s.defensible;
  j["expected_failure"] = s.expected_failure;
  auto& lm = j["landmarks"] = nlohmann::json::object();
  for (auto& [k, v] : s.landmarks) lm[k] = to_hex(v);
  return j;
}

inline std::optional<Scenario> scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario s;
    s.name = j.value("name", std::string{});
    s.summary = j.value("summary", std::string{});
    auto w = chainsim::world_from_json(j.at("world"));
    if (!w) return std::nullopt;
    s.world = std::move(*w);
    auto addr = [](const nlohmann::json& node) -> std::optional<Address> {
      return address_from_hex(node.get<std::string>());
    };
    auto word = [](const nlohmann::json& node) -> std::optional<Word> {
      return word_from_hex(node.get<std::string>());
    };
    if (j.contains("book")) {
      auto a = addr(j.at("book").at("wrapped"));
      if (!a) return std::nullopt;
      s.book.wrapped = *a;
      if (j.at("book").contains("pools")) {
        for (auto& p : j.at("book").at("pools")) {
          auto t = addr(p.at("token")), lp = addr(p.at("lp"));
          if (!t || !lp) return std::nullopt;
          s.book.pools.push_back({*t, *lp, p.value("token_is_token0", true)});
        }
      }
    }
    const auto timeline = j.contains("timeline") ? j.at("timeline") : nlohmann::json::array();
    for (auto& t : timeline) {
      ScriptedTx st;
      st.tick = t.at("tick").get<uint64_t>();
      auto gp = word(t.at("gas_price"));
      auto from = addr(t.at("from"));
      auto value = word(t.at("value"));
      auto data = from_hex(t.at("calldata").get<std::string>());
      if (!gp || !from || !value || !data) return std::nullopt;
      st.tx.gas_price = *gp;
      st.tx.is_private = t.value("private", false);
      st.tx.msg.caller = *from;
      st.tx.msg.origin = *from;
      st.tx.msg.value = *value;
      st.tx.msg.calldata = std::move(*data);
      if (t.contains("to")) {
        auto to = addr(t.at("to"));
        if (!to) return std::nullopt;
        st.tx.msg.target = *to;
      }
      s.timeline.push_back(std::move(st));
    }
    auto field = [&](const char* key, Address& out) {
      if (auto a = addr(j.at(key))) {
        out = *a;
        return true;
      }
      return false;
    };
    if (!field("attacker", s.attacker) || !field("victim", s.victim) ||
        !field("rescue_target", s.rescue_target))
      return std::nullopt;
    auto vv = word(j.at("victim_value"));
    if (!vv) return std::nullopt;
    s.victim_value = *vv;
    s.attack_tick = j.value("attack_tick", uint64_t(0));
    s.copycat_tick = j.value("copycat_tick", uint64_t(0));
    s.defensible = j.value("defensible", true);
    s.expected_failure = j.value("expected_failure", std::string{});
    if (j.contains("landmarks")) {
      for (auto& [k, v] : j.at("landmarks").items()) {
        auto a = address_from_hex(v.get<std::string>());
        if (!a) return std::nullopt;
        s.landmarks[k] = *a;
      }
    }
    return s;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

}  // namespace backrunner::corpus

#pragma once

#include <functional>
#include <map>
#include <vector>

#include "abi.hpp"
#include "easm.hpp"
#include "minivm.hpp"
#include "words.hpp"

// Hand-assembled standard contracts: a fungible token, a constant-product
// pool and a flashloan provider. These are the building blocks of every
// simulated world; their storage layouts are part of the contract.
namespace backrunner::contracts {

// token storage: balances at H(holder . 1), allowances at H(spender . H(owner . 2))
inline constexpr uint64_t kBalanceIndex = 1;
inline constexpr uint64_t kAllowanceIndex = 2;

// pool storage slots
inline constexpr uint64_t kLpToken0Slot = 0;
inline constexpr uint64_t kLpToken1Slot = 1;
inline constexpr uint64_t kLpReserve0Slot = 2;
inline constexpr uint64_t kLpReserve1Slot = 3;
inline constexpr uint64_t kLpFeeBps = 30;  // 0.3% taken on input amounts

// provider storage slots
inline constexpr uint64_t kProviderFeeSlot = 0;    // fee in basis points
inline constexpr uint64_t kProviderTokenSlot = 1;  // lent token
inline constexpr uint64_t kProviderDebtSlot = 2;   // outstanding principal + fee

namespace detail {

using easm::Assembler;

// hash the mapping key on the stack with a constant index: H(key . index)
inline void map_slot(Assembler& a, const Word& index) {
  a.push(0).op(minivm::MSTORE);
  a.mstore_at(32, index);
  a.push(64).push(0).op(minivm::SHA3);
}

// allowance slot for (owner, spender), each produced by a pusher
inline void allowance_slot(Assembler& a, const std::function<void(Assembler&)>& push_owner,
                           const std::function<void(Assembler&)>& push_spender) {
  push_owner(a);
  map_slot(a, kAllowanceIndex);            // inner = H(owner . 2)
  a.push(32).op(minivm::MSTORE);           // mem[32] = inner
  push_spender(a);
  a.push(0).op(minivm::MSTORE);            // mem[0] = spender
  a.push(64).push(0).op(minivm::SHA3);     // H(spender . inner)
}

// selector word plus flat args assembled at memory 0, then CALL; leaves the
// success flag on the stack
inline void emit_call(Assembler& a, uint32_t selector,
                      const std::vector<std::function<void(Assembler&)>>& args,
                      const std::function<void(Assembler&)>& push_target, uint64_t ret_off = 0x60,
                      uint64_t ret_size = 0) {
  a.push(Word(selector), 4).push(224).op(minivm::SHL).push(0).op(minivm::MSTORE);
  for (size_t i = 0; i < args.size(); ++i) {
    args[i](a);
    a.push(4 + 32 * i).op(minivm::MSTORE);
  }
  a.push(ret_size).push(ret_off).push(4 + 32 * args.size()).push(0).push(0);
  push_target(a);
  a.op(minivm::GAS).op(minivm::CALL);
}

inline auto arg(size_t k) {
  return [k](Assembler& a) { a.load_arg(k); };
}
inline auto caller() {
  return [](Assembler& a) { a.op(minivm::CALLER); };
}
inline auto self() {
  return [](Assembler& a) { a.op(minivm::ADDRESS); };
}
inline auto sload(uint64_t slot) {
  return [slot](Assembler& a) { a.push(slot).op(minivm::SLOAD); };
}

inline void ret_one(Assembler& a) { a.mstore_at(0, 1).return_word(); }

}  // namespace detail

// Optional extra dispatcher arms let scenario tokens bolt on extra functions
// (their bodies may reuse the shared "fail" label) without forking the
// standard body; with no extras the bytecode is identical to the plain token.
inline Bytes token_code(const std::vector<std::pair<uint32_t, std::string>>& extra_arms = {},
                        const std::function<void(easm::Assembler&)>& extra_bodies = {}) {
  using namespace detail;
  using namespace minivm;
  Assembler a;
  std::vector<std::pair<uint32_t, std::string>> arms = {{abi::sel::kBalanceOf, "balanceOf"},
                                                        {abi::sel::kTransfer, "transfer"},
                                                        {abi::sel::kTransferFrom, "transferFrom"},
                                                        {abi::sel::kApprove, "approve"},
                                                        {abi::sel::kAllowance, "allowance"}};
  arms.insert(arms.end(), extra_arms.begin(), extra_arms.end());
  a.dispatcher(arms).revert();

  a.label("balanceOf");
  a.load_arg(0);
  map_slot(a, kBalanceIndex);
  a.op(SLOAD).push(0).op(MSTORE).return_word();

  a.label("transfer");  // transfer(to, amount)
  a.op(CALLER);
  map_slot(a, kBalanceIndex);
  a.op(DUP1).op(SLOAD);                           // [slotC, balC]
  a.op(DUP1).load_arg(1).op(SWAP1).op(LT).jumpi("fail");
  a.load_arg(1).op(SWAP1).op(SUB).op(SWAP1).op(SSTORE);
  a.load_arg(0);
  map_slot(a, kBalanceIndex);
  a.op(DUP1).op(SLOAD).load_arg(1).op(ADD).op(SWAP1).op(SSTORE);
  ret_one(a);

  a.label("transferFrom");  // transferFrom(from, to, amount)
  allowance_slot(a, arg(0), caller());
  a.op(DUP1).op(SLOAD);                           // [aslot, allow]
  a.load_arg(2).op(SWAP1).op(LT).jumpi("fail");   // allow < amount
  a.load_arg(0);
  map_slot(a, kBalanceIndex);
  a.op(DUP1).op(SLOAD);                           // [aslot, fslot, balF]
  a.op(DUP1).load_arg(2).op(SWAP1).op(LT).jumpi("fail");
  a.load_arg(2).op(SWAP1).op(SUB).op(SWAP1).op(SSTORE);
  a.op(DUP1).op(SLOAD).load_arg(2).op(SWAP1).op(SUB).op(SWAP1).op(SSTORE);
  a.load_arg(1);
  map_slot(a, kBalanceIndex);
  a.op(DUP1).op(SLOAD).load_arg(2).op(ADD).op(SWAP1).op(SSTORE);
  ret_one(a);

  a.label("approve");  // approve(spender, amount)
  allowance_slot(a, caller(), arg(0));
  a.load_arg(1).op(SWAP1).op(SSTORE);
  ret_one(a);

  a.label("allowance");  // allowance(owner, spender)
  allowance_slot(a, arg(0), arg(1));
  a.op(SLOAD).push(0).op(MSTORE).return_word();

  if (extra_bodies) extra_bodies(a);

  a.label("fail").revert();
  return a.assemble();
}

// Constant-product pool over (token0, token1). swap(out0, out1, to) sends the
// requested outputs, measures what came in by balance difference, enforces
// the fee-adjusted product invariant, then syncs reserves to live balances.
inline Bytes lp_code() {
  using namespace detail;
  using namespace minivm;
  // memory locals (scratch 0x00-0x80 is for slot hashing / call building)
  constexpr uint64_t B0 = 0x100, B1 = 0x120, T = 0x140;
  Assembler a;
  a.dispatcher({{abi::sel::kSwap, "swap"},
                {abi::sel::kGetReserves, "getReserves"},
                {abi::sel::kToken0, "token0"},
                {abi::sel::kToken1, "token1"}})
      .revert();

  a.label("swap");  // swap(out0, out1, to)
  a.load_arg(0).op(ISZERO).jumpi("skip0");
  emit_call(a, abi::sel::kTransfer, {arg(2), arg(0)}, sload(kLpToken0Slot));
  a.op(ISZERO).jumpi("fail");
  a.label("skip0");
  a.load_arg(1).op(ISZERO).jumpi("skip1");
  emit_call(a, abi::sel::kTransfer, {arg(2), arg(1)}, sload(kLpToken1Slot));
  a.op(ISZERO).jumpi("fail");
  a.label("skip1");

  emit_call(a, abi::sel::kBalanceOf, {self()}, sload(kLpToken0Slot), 0x80, 32);
  a.op(ISZERO).jumpi("fail");
  a.push(0x80).op(MLOAD).push(B0).op(MSTORE);
  emit_call(a, abi::sel::kBalanceOf, {self()}, sload(kLpToken1Slot), 0x80, 32);
  a.op(ISZERO).jumpi("fail");
  a.push(0x80).op(MLOAD).push(B1).op(MSTORE);

  // in_i = max(0, bal_i + out_i - reserve_i), branch-free via the flag product
  auto amount_in = [&](size_t out_arg, uint64_t bal_at, uint64_t reserve_slot) {
    a.push(bal_at).op(MLOAD).load_arg(out_arg).op(ADD);  // t = bal + out
    a.op(DUP1).push(reserve_slot).op(SLOAD).op(SWAP1).op(GT);  // [t, t>r]
    a.op(SWAP1).push(reserve_slot).op(SLOAD).op(SWAP1).op(SUB).op(MUL);
    a.push(T).op(MSTORE);
  };

  // adjusted = bal*10000 - in*fee; both sides fit well inside 256 bits at
  // desk-scale reserves
  auto adjusted = [&](size_t out_arg, uint64_t bal_at, uint64_t reserve_slot) {
    amount_in(out_arg, bal_at, reserve_slot);
    a.push(bal_at).op(MLOAD).push(10000).op(MUL);
    a.push(T).op(MLOAD).push(kLpFeeBps).op(MUL);
    a.op(SWAP1).op(SUB);
  };
  adjusted(0, B0, kLpReserve0Slot);
  adjusted(1, B1, kLpReserve1Slot);
  a.op(MUL);  // lhs = adj0 * adj1
  a.push(kLpReserve0Slot).op(SLOAD).push(kLpReserve1Slot).op(SLOAD).op(MUL);
  a.push(100000000).op(MUL);  // rhs = r0 * r1 * 10000^2
  a.op(GT).jumpi("fail");     // rhs > lhs: product invariant violated

  a.push(B0).op(MLOAD).push(kLpReserve0Slot).op(SSTORE);
  a.push(B1).op(MLOAD).push(kLpReserve1Slot).op(SSTORE);
  a.op(STOP);

  a.label("getReserves");
  a.push(kLpReserve0Slot).op(SLOAD).push(0).op(MSTORE);
  a.push(kLpReserve1Slot).op(SLOAD).push(32).op(MSTORE);
  a.push(64).push(0).op(RETURN);

  a.label("token0");
  a.push(kLpToken0Slot).op(SLOAD).push(0).op(MSTORE).return_word();
  a.label("token1");
  a.push(kLpToken1Slot).op(SLOAD).push(0).op(MSTORE).return_word();

  a.label("fail").revert();
  return a.assemble();
}

// Flashloan provider with deferred settlement: flashloan() hands tokens out
// and books principal + fee as debt; repay() pulls tokens back via an
// allowance and reduces the debt. Atomicity lives in the harness, which
// rejects any transaction that leaves a provider's debt slot nonzero.
inline Bytes provider_code() {
  using namespace detail;
  using namespace minivm;
  Assembler a;
  a.dispatcher({{abi::sel::kFlashloan, "flashloan"},
                {abi::sel::kRepay, "repay"},
                {abi::sel::kDebt, "debt"}})
      .revert();

  a.label("flashloan");  // flashloan(receiver, token, amount); lent token is fixed
  emit_call(a, abi::sel::kTransfer, {arg(0), arg(2)}, sload(kProviderTokenSlot));
  a.op(ISZERO).jumpi("fail");
  a.load_arg(2).op(DUP1).push(kProviderFeeSlot).op(SLOAD).op(MUL);
  a.push(10000).op(SWAP1).op(DIV).op(ADD);  // amount + amount*fee/10000
  a.push(kProviderDebtSlot).op(SLOAD).op(ADD).push(kProviderDebtSlot).op(SSTORE);
  ret_one(a);

  a.label("repay");  // repay(amount)
  a.push(kProviderDebtSlot).op(SLOAD).load_arg(0).op(GT).jumpi("fail");
  emit_call(a, abi::sel::kTransferFrom, {caller(), self(), arg(0)}, sload(kProviderTokenSlot));
  a.op(ISZERO).jumpi("fail");
  a.push(kProviderDebtSlot).op(SLOAD).load_arg(0).op(SWAP1).op(SUB);
  a.push(kProviderDebtSlot).op(SSTORE);
  ret_one(a);

  a.label("debt");
  a.push(kProviderDebtSlot).op(SLOAD).push(0).op(MSTORE).return_word();

  a.label("fail").revert();
  return a.assemble();
}

// Output amount the pool will allow for a given input, mirroring the swap
// body's fee-adjusted product check. Wide intermediates: reserve products
// scaled by 10000^2 exceed 256 bits long before desk-scale reserves do not.
inline std::optional<Word> quote_swap_out(const minivm::WorldState& w, const Address& pool,
                                          const Word& in, bool out_is_token0) {
  Word r0 = w.storage_at(pool, kLpReserve0Slot);
  Word r1 = w.storage_at(pool, kLpReserve1Slot);
  Word rin = out_is_token0 ? r1 : r0;
  Word rout = out_is_token0 ? r0 : r1;
  if (rin == 0 || rout == 0) return std::nullopt;
  WideWord eff = WideWord(in) * (10000 - kLpFeeBps);
  WideWord num = eff * WideWord(rout);
  WideWord den = WideWord(rin) * 10000 + eff;
  return Word(num / den);
}

// ---- world building helpers ----

inline Word balance_slot(const Address& holder) {
  return mapping_slot(to_word(holder), kBalanceIndex);
}

inline Word allowance_storage_slot(const Address& owner, const Address& spender) {
  return mapping_slot(to_word(spender), mapping_slot(to_word(owner), kAllowanceIndex));
}

inline void mint(minivm::WorldState& w, const Address& token, const Address& holder,
                 const Word& amount) {
  w.touch(token).storage[balance_slot(holder)] += amount;
}

inline Word token_balance(const minivm::WorldState& w, const Address& token,
                          const Address& holder) {
  return w.storage_at(token, balance_slot(holder));
}

inline void set_allowance(minivm::WorldState& w, const Address& token, const Address& owner,
                          const Address& spender, const Word& amount) {
  auto slot = allowance_storage_slot(owner, spender);
  if (amount == 0)
    w.touch(token).storage.erase(slot);
  else
    w.touch(token).storage[slot] = amount;
}

inline void deploy_token(minivm::WorldState& w, const Address& token) {
  w.touch(token).code = token_code();
}

inline void deploy_lp(minivm::WorldState& w, const Address& lp, const Address& token0,
                      const Address& token1, const Word& reserve0, const Word& reserve1) {
  auto& acc = w.touch(lp);
  acc.code = lp_code();
  acc.storage[kLpToken0Slot] = to_word(token0);
  acc.storage[kLpToken1Slot] = to_word(token1);
  acc.storage[kLpReserve0Slot] = reserve0;
  acc.storage[kLpReserve1Slot] = reserve1;
  mint(w, token0, lp, reserve0);
  mint(w, token1, lp, reserve1);
}

inline void deploy_provider(minivm::WorldState& w, const Address& provider, const Address& token,
                            const Word& fee_bps, const Word& liquidity) {
  auto& acc = w.touch(provider);
  acc.code = provider_code();
  acc.storage[kProviderFeeSlot] = fee_bps;
  acc.storage[kProviderTokenSlot] = to_word(token);
  mint(w, token, provider, liquidity);
}

}  // namespace backrunner::contracts

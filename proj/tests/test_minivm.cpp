#include <catch_amalgamated.hpp>

#include <random>

#include "backrunner/easm.hpp"
#include "backrunner/minivm.hpp"

using namespace backrunner;
using namespace backrunner::minivm;

namespace {

WorldState world_with(const Address& addr, const Bytes& code, Word balance = 0) {
  WorldState w;
  Account acc;
  acc.code = code;
  acc.balance = balance;
  w.accounts[addr] = acc;
  return w;
}

Message call_msg(const Address& from, const Address& to, Bytes calldata = {}, Word value = 0) {
  Message m;
  m.caller = from;
  m.origin = from;
  m.target = to;
  m.calldata = std::move(calldata);
  m.value = value;
  return m;
}

const Address kContract = make_address(0xc0);
const Address kUser = make_address(0x11);
const Address kOwner = make_address(0x22);

}  // namespace

TEST_CASE("straight-line constant return") {
  easm::Assembler a;
  a.push(0x2a).push(0).op(MSTORE).push(0x20).push(0).op(RETURN);
  auto w = world_with(kContract, a.assemble());
  auto r = execute(w, call_msg(kUser, kContract));
  REQUIRE(r.outcome == Outcome::Success);
  REQUIRE(r.trace.return_data.size() == 32);
  REQUIRE(word_from_bytes(r.trace.return_data) == 0x2a);
}

TEST_CASE("immediate revert restores world") {
  easm::Assembler a;
  a.push(0).push(0).op(REVERT);
  auto w = world_with(kContract, a.assemble(), 500);
  auto r = execute(w, call_msg(kUser, kContract));
  REQUIRE(r.outcome == Outcome::Revert);
  REQUIRE(r.world.balance_of(kContract) == 500);
  REQUIRE(r.world.accounts.size() == w.accounts.size());
}

TEST_CASE("caller gate flips under override") {
  // require(caller == owner); owner-only path returns 1
  easm::Assembler a;
  a.op(CALLER).push_addr(kOwner).op(EQ).jumpi("ok").revert();
  a.label("ok").mstore_at(0, 1).return_word();
  auto w = world_with(kContract, a.assemble());

  auto denied = execute(w, call_msg(kUser, kContract));
  REQUIRE(denied.outcome == Outcome::Revert);
  REQUIRE(denied.trace.jumpis.size() == 1);
  REQUIRE_FALSE(denied.trace.jumpis[0].taken);

  auto forced = execute(w, call_msg(kUser, kContract), {{0, true}});
  REQUIRE(forced.outcome == Outcome::Success);
  REQUIRE(word_from_bytes(forced.trace.return_data) == 1);
  REQUIRE(forced.trace.jumpis[0].forced);

  auto as_owner = execute(w, call_msg(kOwner, kContract));
  REQUIRE(as_owner.outcome == Outcome::Success);
}

TEST_CASE("supported opcode table") {
  auto& ops = supported_opcodes();
  bool has_jumpi = false, has_create2 = false;
  for (auto& [name, b] : ops) {
    if (name == "JUMPI") {
      has_jumpi = true;
      REQUIRE(b == 0x57);
    }
    if (b == 0xf5) has_create2 = true;
  }
  REQUIRE(has_jumpi);
  REQUIRE_FALSE(has_create2);
}

TEST_CASE("every listed opcode decodes") {
  // pad the stack, then run the opcode; it must be reached and recognized
  for (auto& [name, b] : supported_opcodes()) {
    easm::Assembler a;
    for (int i = 0; i < 17; ++i) a.push(1);
    size_t offset = a.size();
    a.op(b);
    auto w = world_with(kContract, a.assemble());
    auto r = execute(w, call_msg(kUser, kContract));
    bool reached = false;
    for (auto pc : r.trace.pc_frames[0])
      if (pc == offset) reached = true;
    INFO(name);
    REQUIRE(reached);
  }
}

TEST_CASE("determinism: identical inputs, identical results") {
  easm::Assembler a;
  a.op(CALLER).push(7).op(ADD).push(3).op(MUL).push(0).op(MSTORE).push(32).push(0).op(RETURN);
  auto w = world_with(kContract, a.assemble());
  auto m = call_msg(kUser, kContract, {0xde, 0xad});
  auto r1 = execute(w, m);
  auto r2 = execute(w, m);
  REQUIRE(r1.outcome == r2.outcome);
  REQUIRE(r1.trace.return_data == r2.trace.return_data);
  REQUIRE(r1.trace.pc_frames == r2.trace.pc_frames);
  REQUIRE(r1.trace.gas_used == r2.trace.gas_used);
}

TEST_CASE("base token conservation and value transfer") {
  easm::Assembler a;
  // forward half of received value to kOwner: CALL(gas, owner, value/2, 0,0,0,0)
  a.push(0).push(0).push(0).push(0);
  a.op(CALLVALUE).push(2).op("SWAP1").op(DIV);
  a.push_addr(kOwner).op(GAS).op(CALL).op(POP).op(STOP);
  auto w = world_with(kContract, a.assemble());
  w.touch(kUser).balance = 1000;
  Word before = w.total_base();

  auto r = execute(w, call_msg(kUser, kContract, {}, 100));
  REQUIRE(r.outcome == Outcome::Success);
  REQUIRE(r.world.total_base() == before);
  REQUIRE(r.world.balance_of(kOwner) == 50);
  REQUIRE(r.world.balance_of(kContract) == 50);
  REQUIRE(r.world.balance_of(kUser) == 900);
}

TEST_CASE("override soundness: empty overrides record concrete directions") {
  easm::Assembler a;
  // two JUMPIs driven by calldata words 0 and 1
  a.push(4).op(CALLDATALOAD).jumpi("a").label("a");
  a.push(36).op(CALLDATALOAD).jumpi("b").label("b").op(STOP);
  auto w = world_with(kContract, a.assemble());
  for (int c0 = 0; c0 <= 1; ++c0) {
    for (int c1 = 0; c1 <= 1; ++c1) {
      Bytes cd(4 + 64, 0);
      cd[4 + 31] = uint8_t(c0);
      cd[4 + 63] = uint8_t(c1);
      auto r = execute(w, call_msg(kUser, kContract, cd));
      REQUIRE(r.outcome == Outcome::Success);
      REQUIRE(r.trace.jumpis.size() == 2);
      REQUIRE(r.trace.jumpis[0].taken == (c0 != 0));
      REQUIRE(r.trace.jumpis[1].taken == (c1 != 0));
      REQUIRE((r.trace.jumpis[0].condition != 0) == (c0 != 0));
    }
  }
}

TEST_CASE("override index beyond encountered JUMPIs flags unused") {
  easm::Assembler a;
  a.op(STOP);
  auto w = world_with(kContract, a.assemble());
  auto r = execute(w, call_msg(kUser, kContract), {{3, true}});
  REQUIRE(r.outcome == Outcome::Success);
  REQUIRE(r.trace.unused_overrides);
}

TEST_CASE("invalid opcode reverts with trace up to failure") {
  Bytes code = {uint8_t(PUSH1), 0x01, 0xf5 /* CREATE2, unsupported */, uint8_t(STOP)};
  auto w = world_with(kContract, code);
  auto r = execute(w, call_msg(kUser, kContract));
  REQUIRE(r.outcome == Outcome::Revert);
  REQUIRE(r.trace.pc_frames[0] == std::vector<uint64_t>{0, 2});
}

TEST_CASE("step budget exhaustion is out-of-gas") {
  easm::Assembler a;
  a.label("loop").jump("loop");
  auto w = world_with(kContract, a.assemble());
  VmConfig cfg;
  cfg.step_budget = 1000;
  auto r = execute(w, call_msg(kUser, kContract), {}, cfg);
  REQUIRE(r.outcome == Outcome::OutOfGas);
  REQUIRE(r.world.balance_of(kContract) == w.balance_of(kContract));
}

TEST_CASE("forced branch into a loop hits the budget, world restored") {
  easm::Assembler a;
  a.push(1).jumpi("done").label("spin").jump("spin").label("done").op(STOP);
  auto w = world_with(kContract, a.assemble(), 77);
  VmConfig cfg;
  cfg.step_budget = 5000;
  auto r = execute(w, call_msg(kUser, kContract), {{0, false}}, cfg);
  REQUIRE(r.outcome == Outcome::OutOfGas);
  REQUIRE(r.world.balance_of(kContract) == 77);
}

TEST_CASE("nested call revert rolls back callee state only") {
  const Address inner = make_address(0xcc);
  // inner: SSTORE(1, 42) then revert
  easm::Assembler ia;
  ia.push(42).push(1).op(SSTORE).push(0).push(0).op(REVERT);
  // outer: SSTORE(5, 9); call inner; STOP (ignores failure)
  easm::Assembler oa;
  oa.push(9).push(5).op(SSTORE);
  oa.push(0).push(0).push(0).push(0).push(0).push_addr(inner).op(GAS).op(CALL).op(POP).op(STOP);
  auto w = world_with(kContract, oa.assemble());
  w.touch(inner).code = ia.assemble();

  auto r = execute(w, call_msg(kUser, kContract));
  REQUIRE(r.outcome == Outcome::Success);
  REQUIRE(r.world.storage_at(kContract, 5) == 9);
  REQUIRE(r.world.storage_at(inner, 1) == 0);
  REQUIRE(r.trace.calls.size() == 1);
  REQUIRE_FALSE(r.trace.calls[0].success);
}

TEST_CASE("calls from forced execution run un-forced in callee frames") {
  const Address inner = make_address(0xcd);
  easm::Assembler ia;  // inner has a JUMPI; returns 1 either way
  ia.push(1).jumpi("t").label("t").mstore_at(0, 1).return_word();
  easm::Assembler oa;
  oa.push(32).push(0).push(0).push(0).push(0).push_addr(inner).op(GAS).op(CALL).op(POP);
  oa.push(1).jumpi("x").label("x").op(STOP);
  auto w = world_with(kContract, oa.assemble());
  w.touch(inner).code = ia.assemble();

  // override occurrence 0: the callee's JUMPI must not consume it; the
  // top frame's own first JUMPI does
  auto r = execute(w, call_msg(kUser, kContract), {{0, false}});
  REQUIRE(r.outcome == Outcome::Success);
  REQUIRE(r.trace.jumpis.size() == 1);
  REQUIRE(r.trace.jumpis[0].forced);
  REQUIRE_FALSE(r.trace.jumpis[0].taken);
}

TEST_CASE("sha3 and storage writes are logged") {
  easm::Assembler a;
  a.push(0xab).push(0).op(MSTORE).push(32).push(0).op(SHA3).push(7).op(SSTORE).op(STOP);
  auto w = world_with(kContract, a.assemble());
  auto r = execute(w, call_msg(kUser, kContract));
  REQUIRE(r.outcome == Outcome::Success);
  REQUIRE(r.trace.storage_writes.size() == 1);
  REQUIRE(r.trace.storage_writes[0].key == 7);
  REQUIRE(r.trace.storage_writes[0].new_value == hash_word(0xab));
}

TEST_CASE("comparison operands are logged for hint harvesting") {
  easm::Assembler a;
  a.push(4).op(CALLDATALOAD).push(0x1234).op(EQ).jumpi("ok").revert();
  a.label("ok").op(STOP);
  auto w = world_with(kContract, a.assemble());
  Bytes cd(36, 0);
  auto r = execute(w, call_msg(kUser, kContract, cd));
  REQUIRE(r.outcome == Outcome::Revert);
  bool seen = false;
  for (auto& c : r.trace.comparisons)
    if (c.opcode == EQ && (c.lhs == 0x1234 || c.rhs == 0x1234)) seen = true;
  REQUIRE(seen);
}

TEST_CASE("create deploys returned code") {
  // init code: returns the 5-byte runtime "PUSH1 1 PUSH1 0 MSTORE..." -- use a
  // trivial runtime of STOP
  easm::Assembler init;
  init.push(Word(uint8_t(STOP)), 1).push(0).op(MSTORE8).push(1).push(0).op(RETURN);
  Bytes init_code = init.assemble();

  Message m;
  m.caller = kUser;
  m.origin = kUser;
  m.calldata = init_code;
  WorldState w;
  w.touch(kUser).balance = 10;
  auto r = execute(w, m);
  REQUIRE(r.outcome == Outcome::Success);
  REQUIRE(r.trace.created.size() == 1);
  auto* acc = r.world.find(r.trace.created[0]);
  REQUIRE(acc != nullptr);
  REQUIRE(acc->code == Bytes{uint8_t(STOP)});
}

TEST_CASE("property: random arithmetic programs are deterministic and conservative") {
  std::mt19937_64 rng(42);
  const uint8_t pool[] = {ADD, MUL, SUB, DIV, AND, OR, XOR, LT, GT, EQ, ISZERO, NOT, POP};
  for (int iter = 0; iter < 200; ++iter) {
    easm::Assembler a;
    int pushes = 4 + int(rng() % 6);
    for (int i = 0; i < pushes; ++i) a.push(Word(rng()));
    int ops = 1 + int(rng() % 8);
    for (int i = 0; i < ops; ++i) a.op(pool[rng() % sizeof(pool)]);
    a.op(STOP);
    auto w = world_with(kContract, a.assemble(), Word(rng() % 1000));
    w.touch(kUser).balance = 555;
    Word before = w.total_base();
    auto m = call_msg(kUser, kContract);
    auto r1 = execute(w, m);
    auto r2 = execute(w, m);
    REQUIRE(r1.outcome == r2.outcome);
    REQUIRE(r1.trace.pc_frames == r2.trace.pc_frames);
    REQUIRE(r1.world.total_base() == before);
  }
}

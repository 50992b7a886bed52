#include <catch_amalgamated.hpp>

#include "backrunner/backrun.hpp"
#include "backrunner/runner.hpp"
#include "scenes.hpp"

using namespace backrunner;
using namespace backrunner::minivm;

namespace {

using scenes::ca;
using scenes::kGo;
using Scene = scenes::BountyScene;
using contracts::detail::emit_call;
using contracts::detail::self;

Bytes small_initcode(const Bytes& runtime) {
  REQUIRE(runtime.size() <= 32);
  Word w = word_from_bytes(runtime.data(), runtime.size()) << (8 * (32 - runtime.size()));
  easm::Assembler a;
  a.push(w, 32).push(0).op(MSTORE).push(runtime.size()).push(0).op(RETURN);
  return a.assemble();
}

}  // namespace

TEST_CASE("reconstruction folds the orchestrator's calls into typed actions") {
  Scene s;
  auto r = backrun::reconstruct(s.w, s.attack_tx());
  REQUIRE(r.ok());
  auto& t = r.trace;
  REQUIRE(t.actions.size() == 4);
  REQUIRE(t.actions[0].kind == prog::Action::Kind::Flashloan);
  REQUIRE(t.actions[0].fl_token == s.token);
  REQUIRE(t.actions[0].args[0].as_word() == to_word(s.orchestrator));
  REQUIRE(t.actions[1].kind == prog::Action::Kind::Call);
  REQUIRE(t.actions[1].target == s.victim);
  REQUIRE(t.actions[2].selector == abi::sel::kApprove);
  REQUIRE(t.actions[3].selector == abi::sel::kRepay);
  REQUIRE(t.attacker_addresses == std::set<Address>{s.attacker, s.orchestrator});
  REQUIRE(t.victim_set == std::vector<Address>{s.provider, s.victim, s.token});
}

TEST_CASE("a reverting transaction is not an attack") {
  Scene s;
  auto tx = s.attack_tx();
  tx.calldata = abi::make_calldata(0xffffffff);  // no such entry point
  auto r = backrun::reconstruct(s.w, tx);
  REQUIRE(r.error == backrun::Error::NotAnAttack);
}

TEST_CASE("a transaction with no internal calls is itself the single action") {
  Scene s;
  contracts::mint(s.w, s.token, s.attacker, 50);
  Message tx;
  tx.caller = s.attacker;
  tx.origin = s.attacker;
  tx.target = s.token;
  tx.calldata = abi::make_calldata(abi::sel::kTransfer, {to_word(s.victim), 5});
  auto r = backrun::reconstruct(s.w, tx);
  REQUIRE(r.ok());
  REQUIRE(r.trace.actions.size() == 1);
  REQUIRE(r.trace.actions[0].kind == prog::Action::Kind::Transfer);
  REQUIRE(r.trace.actions[0].target == s.token);
  REQUIRE(r.trace.victim_set == std::vector<Address>{s.token});
}

TEST_CASE("arguments matching an earlier return become data-flow edges") {
  Scene s;
  Address x2 = make_address(0x7010);
  Address dst = make_address(0x7011);
  easm::Assembler a;
  a.dispatcher({{kGo, "g"}}).revert();
  a.label("g");
  emit_call(a, abi::sel::kBalanceOf, {self()}, ca(s.token), 0x80, 32);
  a.op(POP);
  emit_call(a, abi::sel::kTransfer, {ca(dst), [](easm::Assembler& x) { x.push(0x80).op(MLOAD); }},
            ca(s.token));
  a.op(ISZERO).jumpi("fail");
  a.op(STOP);
  a.label("fail").revert();
  s.w.touch(x2).code = a.assemble();
  contracts::mint(s.w, s.token, x2, 31337);

  Message tx;
  tx.caller = s.attacker;
  tx.origin = s.attacker;
  tx.target = x2;
  tx.calldata = abi::make_calldata(kGo);
  auto r = backrun::reconstruct(s.w, tx);
  REQUIRE(r.ok());
  REQUIRE(r.trace.actions.size() == 2);
  auto& amount = r.trace.actions[1].args[1];
  REQUIRE(amount.kind == prog::ArgValue::Kind::PriorReturn);
  REQUIRE(amount.src_action == 0);
  REQUIRE(amount.byte_off == 0);
}

TEST_CASE("redirected replay pays the whitehat instead of the attacker") {
  Scene s;
  const Address W = prog::default_whitehat();
  auto r = backrun::reconstruct(s.w, s.attack_tx());
  REQUIRE(r.ok());
  auto p = backrun::extract_holes(backrun::redirect_profit(r.trace, W));

  auto run = runner::run_actions(s.w, p.actions, p.holes, W, p.remap);
  REQUIRE(run.ok);
  REQUIRE(run.base_profit == 5000);
  REQUIRE(run.world.balance_of(W) == 5000);
  REQUIRE(run.world.balance_of(s.attacker) == 0);
  REQUIRE(run.world.balance_of(s.victim) == 0);
  // the loan went back: provider debt cleared, token supply where it started
  REQUIRE(run.world.storage_at(s.provider, contracts::kProviderDebtSlot) == 0);
  REQUIRE(contracts::token_balance(run.world, s.token, s.provider) == 1000);
}

TEST_CASE("an unrepaid flashloan rejects the whole sequence") {
  Scene s;
  const Address W = prog::default_whitehat();
  auto r = backrun::reconstruct(s.w, s.attack_tx());
  auto p = backrun::extract_holes(backrun::redirect_profit(r.trace, W));
  p.actions.resize(2);  // keep the loan and the bounty claim, drop the repayment
  auto run = runner::run_actions(s.w, p.actions, p.holes, W, p.remap);
  REQUIRE_FALSE(run.ok);
  REQUIRE(run.error == "unsettled flashloan debt");
  REQUIRE(run.world.balance_of(s.victim) == 5000);  // pre-state kept
}

TEST_CASE("replayed creations remap the observed deployment address") {
  Scene s;
  Address x3 = make_address(0x7020);
  // runtime: return 7
  easm::Assembler rt;
  rt.mstore_at(0, 7).return_word();
  Bytes init = small_initcode(rt.assemble());
  REQUIRE(init.size() <= 64);

  easm::Assembler a;
  a.dispatcher({{kGo, "g"}}).revert();
  a.label("g");
  // write initcode to memory, CREATE, then call whatever came back
  for (size_t off = 0; off < init.size(); off += 32) {
    size_t len = std::min<size_t>(32, init.size() - off);
    Word w = word_from_bytes(init.data() + off, len) << (8 * (32 - len));
    a.push(w, 32).push(off).op(MSTORE);
  }
  a.push(init.size()).push(0).push(0).op(CREATE);
  a.op(DUP1).op(ISZERO).jumpi("fail");
  a.push(0x200).op(MSTORE);
  a.push(0).push(0).push(0).push(0).push(0);
  a.push(0x200).op(MLOAD).op(GAS).op(CALL);
  a.op(ISZERO).jumpi("fail");
  a.op(STOP);
  a.label("fail").revert();
  s.w.touch(x3).code = a.assemble();

  Message tx;
  tx.caller = s.attacker;
  tx.origin = s.attacker;
  tx.target = x3;
  tx.calldata = abi::make_calldata(kGo);
  auto r = backrun::reconstruct(s.w, tx);
  REQUIRE(r.ok());
  REQUIRE(r.trace.actions.size() == 2);
  REQUIRE(r.trace.actions[0].kind == prog::Action::Kind::Create);
  Address observed = r.trace.actions[0].created_addr;
  REQUIRE(r.trace.actions[1].target == observed);

  const Address W = prog::default_whitehat();
  auto p = backrun::extract_holes(backrun::redirect_profit(r.trace, W));
  auto run = runner::run_actions(s.w, p.actions, p.holes, W, p.remap);
  REQUIRE(run.ok);
  // the deployment landed at the whitehat's own creation address and the
  // second action followed it there
  Address replayed = minivm::derive_create_address(W, 0);
  REQUIRE(replayed != observed);
  REQUIRE_FALSE(run.world.find(replayed)->code.empty());
  auto seven = word_bytes(Word(7));
  REQUIRE(run.returns[1] == Bytes(seven.begin(), seven.end()));
}

TEST_CASE("every literal opens into a hole that keeps its observed value") {
  Scene s;
  auto r = backrun::reconstruct(s.w, s.attack_tx());
  auto p = backrun::extract_holes(backrun::redirect_profit(r.trace, prog::default_whitehat()));
  REQUIRE(p.holes.size() == 7);  // 3 + 1 + 2 + 1 literals across the four calls
  for (auto& h : p.holes) {
    REQUIRE(h.source == prog::Hole::Source::Default);
    REQUIRE(h.is_filled());
  }
  // the bounty destination is recognized as an address-shaped hole
  auto& dest = p.holes[3];
  REQUIRE(dest.action_index == 1);
  REQUIRE(dest.type.kind == funcx::ArgType::Kind::Address);
  REQUIRE(p.unfilled_holes() == 0);
}

TEST_CASE("replacers substitute victims only when every relation survives") {
  WorldState w;
  Address base = make_address(0x7101), t1 = make_address(0x7102), t2 = make_address(0x7103);
  Address t3 = make_address(0x7104);
  Address lp1 = make_address(0x7105), lp2 = make_address(0x7106);
  for (auto& t : {base, t1, t2, t3}) contracts::deploy_token(w, t);
  contracts::deploy_lp(w, lp1, t1, base, 1000, 1000);
  contracts::deploy_lp(w, lp2, t2, base, 500, 2000);
  auto idx = traits::SimilarityIndex::build(w);

  prog::ActionTrace trace;
  trace.victim_set = {lp1, t1};
  auto maps = backrun::find_replacers(w, idx, trace);
  REQUIRE(maps.size() == 1);
  REQUIRE(maps[0].at(lp1) == lp2);
  REQUIRE(maps[0].at(t1) == t2);
}

TEST_CASE("replacer enumeration respects the cap and excludes identity") {
  WorldState w;
  std::vector<Address> tokens;
  for (uint64_t i = 0; i < 30; ++i) {
    tokens.push_back(make_address(0x7200 + i));
    contracts::deploy_token(w, tokens.back());
  }
  auto idx = traits::SimilarityIndex::build(w);
  prog::ActionTrace trace;
  trace.victim_set = {tokens[0]};

  auto all = backrun::find_replacers(w, idx, trace);
  REQUIRE(all.size() == 29);
  for (auto& m : all) REQUIRE(m.at(tokens[0]) != tokens[0]);
  auto capped = backrun::find_replacers(w, idx, trace, traits::TraitMode::Selectors, 5);
  REQUIRE(capped.size() == 5);
}

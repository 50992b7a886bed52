#include <catch_amalgamated.hpp>

#include <random>

#include "backrunner/backrun.hpp"
#include "backrunner/hijack.hpp"
#include "backrunner/rewrite.hpp"
#include "backrunner/runner.hpp"
#include "scenes.hpp"

using namespace backrunner;
using namespace backrunner::minivm;
using Scene = scenes::BountyScene;

namespace {

// quote recomputed from first principles with wide arithmetic
Word oracle_quote(const Word& in, const Word& rin, const Word& rout) {
  WideWord eff = WideWord(in) * 9970;
  return Word(eff * WideWord(rout) / (WideWord(rin) * 10000 + eff));
}

WorldState pool_world(const Address& ta, const Address& tb, const Address& lp, const Word& r0,
                      const Word& r1) {
  WorldState w;
  contracts::deploy_token(w, ta);
  contracts::deploy_token(w, tb);
  contracts::deploy_lp(w, lp, ta, tb, r0, r1);
  return w;
}

ExecResult call(const WorldState& w, const Address& from, const Address& to, const Bytes& data) {
  Message m;
  m.caller = from;
  m.origin = from;
  m.target = to;
  m.calldata = data;
  return execute(w, m);
}

}  // namespace

TEST_CASE("swap quote matches the closed form and sits exactly on the pool's boundary") {
  Address ta = make_address(0x8001), tb = make_address(0x8002), lp = make_address(0x8003);
  Address user = make_address(0x8004);
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 20; ++iter) {
    Word r0 = 1000 + rng() % 1'000'000;
    Word r1 = 1000 + rng() % 1'000'000;
    Word in = 1 + rng() % 50'000;
    auto w = pool_world(ta, tb, lp, r0, r1);
    contracts::mint(w, ta, user, in);

    auto q = rewrite::quote_v2_swap(w, lp, in, false);
    REQUIRE(q.has_value());
    REQUIRE(*q == oracle_quote(in, r0, r1));

    auto paid = call(w, user, ta, abi::make_calldata(abi::sel::kTransfer, {to_word(lp), in}));
    REQUIRE(paid.outcome == Outcome::Success);
    auto at_quote = call(paid.world, user, lp,
                         abi::make_calldata(abi::sel::kSwap, {0, *q, to_word(user)}));
    REQUIRE(at_quote.outcome == Outcome::Success);
    if (*q > 0) {
      auto above = call(paid.world, user, lp,
                        abi::make_calldata(abi::sel::kSwap, {0, *q + 1, to_word(user)}));
      REQUIRE(above.outcome == Outcome::Revert);
    }
  }
}

TEST_CASE("empty pools have no quote") {
  Address ta = make_address(0x8001), tb = make_address(0x8002), lp = make_address(0x8003);
  auto w = pool_world(ta, tb, lp, 0, 500);
  REQUIRE_FALSE(rewrite::quote_v2_swap(w, lp, 10, false).has_value());
}

TEST_CASE("loan planning is greedy by fee and reports shortfalls") {
  WorldState w;
  Address token = make_address(0x8101);
  Address p30 = make_address(0x8102), p10 = make_address(0x8103), p50 = make_address(0x8104);
  contracts::deploy_token(w, token);
  contracts::deploy_provider(w, p30, token, 30, 400);
  contracts::deploy_provider(w, p10, token, 10, 300);
  contracts::deploy_provider(w, p50, token, 50, 1000);

  auto plan = rewrite::plan_flashloans(w, token, 500);
  REQUIRE(plan.funded);
  REQUIRE(plan.legs.size() == 2);
  REQUIRE(plan.legs[0].provider == p10);
  REQUIRE(plan.legs[0].amount == 300);
  REQUIRE(plan.legs[1].provider == p30);
  REQUIRE(plan.legs[1].amount == 200);

  auto short_plan = rewrite::plan_flashloans(w, token, 2000);
  REQUIRE_FALSE(short_plan.funded);
  REQUIRE(rewrite::plan_flashloans(w, make_address(0x8105), 1).funded == false);
}

TEST_CASE("approval fill reads the live allowance") {
  WorldState w;
  Address token = make_address(0x8201), owner = make_address(0x8202),
          spender = make_address(0x8203);
  contracts::deploy_token(w, token);
  contracts::set_allowance(w, token, owner, spender, 4321);
  REQUIRE(rewrite::fill_approval(w, token, owner, spender) == Word(4321));
  REQUIRE(rewrite::fill_approval(w, token, spender, owner) == Word(0));
}

TEST_CASE("a drained provider is re-sourced, moving the repayment with it") {
  Scene s;
  auto r = backrun::reconstruct(s.w, s.attack_tx());
  REQUIRE(r.ok());
  const Address W = prog::default_whitehat();
  auto p = backrun::extract_holes(backrun::redirect_profit(r.trace, W));

  // between observation and replay, the original provider was emptied and a
  // fresh one appeared
  WorldState now = s.w;
  Address fresh = make_address(0x7006);
  now.touch(s.token).storage[contracts::balance_slot(s.provider)] = 50;
  contracts::deploy_provider(now, fresh, s.token, 0, 500);

  rewrite::RewriteStats stats;
  auto q = rewrite::rewrite_program(now, p, W, &stats);
  REQUIRE(stats.retargeted == 1);
  REQUIRE(q.actions[0].target == fresh);
  REQUIRE(q.actions[3].target == fresh);  // repay follows the loan

  auto run = runner::run_actions(now, q.actions, q.holes, W, q.remap);
  REQUIRE(run.ok);
  REQUIRE(run.base_profit == 5000);
  REQUIRE(run.world.storage_at(fresh, contracts::kProviderDebtSlot) == 0);
}

TEST_CASE("repayment rules track a fee raised after the attack was observed") {
  Scene s;
  auto r = backrun::reconstruct(s.w, s.attack_tx());
  const Address W = prog::default_whitehat();
  auto p = backrun::extract_holes(backrun::redirect_profit(r.trace, W));

  WorldState now = s.w;
  now.touch(s.provider).storage[contracts::kProviderFeeSlot] = 100;  // 1%
  contracts::mint(now, s.token, W, 10);  // headroom for the fee

  // verbatim replay under-repays and is rejected whole
  auto stale = runner::run_actions(now, p.actions, p.holes, W, p.remap);
  REQUIRE_FALSE(stale.ok);
  REQUIRE(stale.error == "unsettled flashloan debt");

  auto q = rewrite::rewrite_program(now, p, W);
  auto run = runner::run_actions(now, q.actions, q.holes, W, q.remap);
  REQUIRE(run.ok);
  REQUIRE(run.base_profit == 5000);
  REQUIRE(contracts::token_balance(run.world, s.token, s.provider) == 1001);
  REQUIRE(contracts::token_balance(run.world, s.token, W) == 9);
}

TEST_CASE("swap outputs are re-quoted against reserves at replay time") {
  Address ta = make_address(0x8301), tb = make_address(0x8302), lp = make_address(0x8303);
  const Address W = prog::default_whitehat();

  // the quote the attacker saw, against reserves that no longer hold
  Word stale_quote = *rewrite::quote_v2_swap(pool_world(ta, tb, lp, 1000, 5000), lp, 100, false);

  auto now = pool_world(ta, tb, lp, 1200, 4100);
  contracts::mint(now, ta, W, 100);

  prog::ActionTrace trace;
  trace.attacker_addresses = {W};
  trace.victim_set = {ta, lp};
  prog::Action dep;
  dep.kind = prog::Action::Kind::Transfer;
  dep.target = ta;
  dep.selector = abi::sel::kTransfer;
  dep.args = {prog::ArgValue::constant_word(to_word(lp)), prog::ArgValue::constant_word(100)};
  dep.from_addr = W;
  dep.to_addr = lp;
  prog::Action swp;
  swp.kind = prog::Action::Kind::Swap;
  swp.target = lp;
  swp.selector = abi::sel::kSwap;
  swp.args = {prog::ArgValue::constant_word(0), prog::ArgValue::constant_word(stale_quote),
              prog::ArgValue::constant_word(to_word(W))};
  swp.to_addr = W;
  trace.actions = {dep, swp};

  auto p = backrun::extract_holes(trace);
  auto stale = runner::run_actions(now, p.actions, p.holes, W);
  REQUIRE_FALSE(stale.ok);  // stale quote breaks the product check

  auto q = rewrite::rewrite_program(now, p, W);
  Word live_quote = *rewrite::quote_v2_swap(now, lp, 100, false);
  auto run = runner::run_actions(now, q.actions, q.holes, W);
  REQUIRE(run.ok);
  REQUIRE(contracts::token_balance(run.world, tb, W) == live_quote);
  REQUIRE(live_quote != stale_quote);
}

TEST_CASE("probing classifies a cloned loan-amount hole and fills it with the float") {
  WorldState w;
  Address tkn = make_address(0x8401), provider = make_address(0x8402),
          exploit = make_address(0x8403);
  contracts::deploy_token(w, tkn);
  contracts::deploy_provider(w, provider, tkn, 0, 2000);

  // exploit entry: owner gate, then flashloan(this, tkn, v0)
  easm::Assembler a;
  a.dispatcher({{0xcb0d9b88, "f"}}).revert();
  a.label("f");
  a.op(CALLER).push(0).op(SLOAD).op(EQ).jumpi("g").revert();
  a.label("g");
  scenes::emit_call(a, abi::sel::kFlashloan,
                    {scenes::self(), scenes::ca(tkn),
                     [](easm::Assembler& x) { x.load_arg(0); }},
                    scenes::ca(provider));
  a.op(POP).op(STOP);
  w.touch(exploit).code = a.assemble();
  w.touch(exploit).storage[0] = to_word(make_address(0xbeef));

  auto cloned = hijack::clone_exploit(w, exploit);
  bool classified = false;
  for (auto& p : cloned.programs) {
    size_t before = p.unfilled_holes();
    auto q = rewrite::rewrite_program(w, p);
    REQUIRE(q.unfilled_holes() <= before);  // filling is monotone
    for (auto& h : q.holes) {
      if (h.rule.kind == prog::RuleFill::Kind::FlashloanNeed) {
        REQUIRE(h.rule.flat_amount == 2000);
        REQUIRE(h.source == prog::Hole::Source::Rule);
        classified = true;
      }
    }
  }
  REQUIRE(classified);
}

TEST_CASE("rewriting twice never reopens holes") {
  Scene s;
  auto r = backrun::reconstruct(s.w, s.attack_tx());
  auto p = backrun::extract_holes(backrun::redirect_profit(r.trace, prog::default_whitehat()));
  auto once = rewrite::rewrite_program(s.w, p);
  auto twice = rewrite::rewrite_program(s.w, once);
  REQUIRE(twice.unfilled_holes() <= once.unfilled_holes());
  REQUIRE(once.unfilled_holes() <= p.unfilled_holes());
  REQUIRE(twice.holes.size() == p.holes.size());
}

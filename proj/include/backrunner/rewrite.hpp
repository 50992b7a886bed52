#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "runner.hpp"

namespace backrunner::rewrite {

// Exact output quote for the pool's fee-adjusted product check; empty pools
// have no quote.
inline std::optional<Word> quote_v2_swap(const minivm::WorldState& w, const Address& pool,
                                         const Word& in, bool out_is_token0) {
  return contracts::quote_swap_out(w, pool, in, out_is_token0);
}

// Live allowance as the token reports it, not as storage happens to look.
inline std::optional<Word> fill_approval(const minivm::WorldState& w, const Address& token,
                                         const Address& owner, const Address& spender) {
  return traits::detail::static_call_word(
      w, token, abi::make_calldata(abi::sel::kAllowance, {to_word(owner), to_word(spender)}));
}

struct FlashLeg {
  Address provider;
  Word amount = 0;
  Word fee_bps = 0;
};

struct FlashPlan {
  std::vector<FlashLeg> legs;
  bool funded = false;
};

// Greedy sourcing of `need` across providers of `token`, cheapest fee first;
// ties break on address so the plan is deterministic.
inline FlashPlan plan_flashloans(const minivm::WorldState& w, const Address& token,
                                 const Word& need) {
  FlashPlan plan;
  std::vector<std::pair<Word, Address>> cands;
  for (auto& [addr, acc] : w.accounts) {
    if (!runner::is_provider(acc)) continue;
    if (to_address(w.storage_at(addr, contracts::kProviderTokenSlot)) != token) continue;
    cands.push_back({w.storage_at(addr, contracts::kProviderFeeSlot), addr});
  }
  std::sort(cands.begin(), cands.end());
  Word left = need;
  for (auto& [fee, p] : cands) {
    if (left == 0) break;
    Word avail = contracts::token_balance(w, token, p);
    if (avail == 0) continue;
    Word take = std::min(avail, left);
    plan.legs.push_back({p, take, fee});
    left -= take;
  }
  plan.funded = left == 0;
  return plan;
}

struct RewriteStats {
  size_t rules_attached = 0;
  size_t retargeted = 0;
};

namespace detail {

inline prog::Hole* hole_at(prog::ProgramWithHoles& p, size_t action, size_t arg) {
  if (p.actions[action].args.size() <= arg) return nullptr;
  const auto& av = p.actions[action].args[arg];
  if (av.kind != prog::ArgValue::Kind::Hole) return nullptr;
  return av.hole_index < p.holes.size() ? &p.holes[av.hole_index] : nullptr;
}

inline Word default_word(prog::ProgramWithHoles& p, size_t action, size_t arg) {
  if (p.actions[action].args.size() <= arg) return 0;
  const auto& av = p.actions[action].args[arg];
  if (av.kind == prog::ArgValue::Kind::Constant) return av.as_word();
  if (av.kind == prog::ArgValue::Kind::Hole) {
    auto* h = hole_at(p, action, arg);
    if (h && h->filled) return h->filled_word();
  }
  return 0;
}

inline void attach(prog::Hole* h, prog::RuleFill rule, RewriteStats* stats) {
  if (!h) return;
  h->rule = std::move(rule);
  h->source = prog::Hole::Source::Rule;
  if (stats) stats->rules_attached++;
}

inline void attach_fixed(prog::Hole* h, const Word& value, RewriteStats* stats) {
  prog::RuleFill r;
  r.kind = prog::RuleFill::Kind::Fixed;
  r.flat_amount = value;
  attach(h, std::move(r), stats);
}

// Re-sourcing a loan moves three places in lockstep: the loan call itself,
// the later repayment call, and the spender argument of the approval between
// them.
inline void retarget_provider(prog::ProgramWithHoles& p, size_t loan_action, Address from,
                              const Address& to) {
  p.actions[loan_action].target = to;
  for (size_t i = loan_action + 1; i < p.actions.size(); ++i) {
    auto& act = p.actions[i];
    if (act.selector == abi::sel::kRepay && act.target == from) act.target = to;
    if (act.selector == abi::sel::kApprove && default_word(p, i, 0) == to_word(from)) {
      if (auto* h = hole_at(p, i, 0))
        h->fill_word(to_word(to), prog::Hole::Source::Rule);
      else if (act.args.size() > 0)
        act.args[0] = prog::ArgValue::constant_word(to_word(to));
    }
  }
}

inline void rewrite_backrun(const minivm::WorldState& w, prog::ProgramWithHoles& p,
                            const Address& sender, RewriteStats* stats) {
  // pass 1: make every loan fundable, re-sourcing drained providers. The
  // action skeleton is fixed, so only whole-loan moves apply: the cheapest
  // provider able to fund the full amount wins.
  for (size_t i = 0; i < p.actions.size(); ++i) {
    auto& act = p.actions[i];
    if (act.kind != prog::Action::Kind::Flashloan) continue;
    Word need = default_word(p, i, 2);
    if (contracts::token_balance(w, act.fl_token, act.target) >= need) continue;
    std::optional<std::pair<Word, Address>> best;
    for (auto& leg : plan_flashloans(w, act.fl_token, need).legs) {
      if (leg.amount != need) continue;  // greedy legs: only a full one qualifies
      if (!best || std::make_pair(leg.fee_bps, leg.provider) < *best)
        best = {leg.fee_bps, leg.provider};
    }
    if (!best) {
      // the cheapest plan splits the loan; look for any single full source
      for (auto& [addr, acc] : w.accounts) {
        if (!runner::is_provider(acc)) continue;
        if (to_address(w.storage_at(addr, contracts::kProviderTokenSlot)) != act.fl_token) continue;
        if (contracts::token_balance(w, act.fl_token, addr) < need) continue;
        auto key = std::make_pair(w.storage_at(addr, contracts::kProviderFeeSlot), addr);
        if (!best || key < *best) best = key;
      }
    }
    if (best && best->second != act.target) {
      retarget_provider(p, i, act.target, best->second);
      if (stats) stats->retargeted++;
    }
  }

  // pass 1b: loan receiver and token are structurally determined — tokens go
  // to whoever replays the sequence, and a provider lends exactly one token
  for (size_t i = 0; i < p.actions.size(); ++i) {
    auto& act = p.actions[i];
    if (act.kind != prog::Action::Kind::Flashloan) continue;
    if (auto* h = hole_at(p, i, 0)) attach_fixed(h, to_word(sender), stats);
    if (auto* h = hole_at(p, i, 1))
      attach_fixed(h, w.storage_at(act.target, contracts::kProviderTokenSlot), stats);
  }

  // pass 2: approval amounts
  for (size_t i = 0; i < p.actions.size(); ++i) {
    auto& act = p.actions[i];
    if (act.selector == abi::sel::kTransferFrom) {
      prog::RuleFill r;
      r.kind = prog::RuleFill::Kind::Allowance;
      r.token = act.target;
      r.owner = to_address(default_word(p, i, 0));
      r.spender = sender;
      attach(hole_at(p, i, 2), r, stats);
    }
    if (act.selector == abi::sel::kApprove) {
      Address spender = to_address(default_word(p, i, 0));
      for (size_t j = 0; j < i; ++j) {
        if (p.actions[j].kind == prog::Action::Kind::Flashloan && p.actions[j].target == spender) {
          prog::RuleFill r;
          r.kind = prog::RuleFill::Kind::RepayWithFee;
          r.ref_action = j;
          attach(hole_at(p, i, 1), r, stats);
          // the spender slot is pinned to the loan source it settles
          if (auto* h = hole_at(p, i, 0)) attach_fixed(h, to_word(spender), stats);
          break;
        }
      }
    }
  }

  // pass 3: repayment amounts track the booked debt, fee included
  for (size_t i = 0; i < p.actions.size(); ++i) {
    if (p.actions[i].selector != abi::sel::kRepay) continue;
    for (size_t j = i; j-- > 0;) {
      if (p.actions[j].kind == prog::Action::Kind::Flashloan &&
          p.actions[j].target == p.actions[i].target) {
        prog::RuleFill r;
        r.kind = prog::RuleFill::Kind::RepayWithFee;
        r.ref_action = j;
        attach(hole_at(p, i, 0), r, stats);
        break;
      }
    }
  }

  // pass 4: swap outputs become live quotes fed by the paired deposit
  for (size_t i = 0; i < p.actions.size(); ++i) {
    auto& act = p.actions[i];
    if (act.kind != prog::Action::Kind::Swap) continue;
    bool out_is_token0 = default_word(p, i, 0) != 0;
    size_t out_arg = out_is_token0 ? 0 : 1;
    for (size_t j = i; j-- > 0;) {
      auto& dep = p.actions[j];
      if (dep.kind != prog::Action::Kind::Transfer || dep.to_addr != act.target) continue;
      prog::RuleFill r;
      r.kind = prog::RuleFill::Kind::SwapQuote;
      r.pool = act.target;
      r.out_is_token0 = out_is_token0;
      r.ref_action = j;
      r.ref_arg = dep.selector == abi::sel::kTransferFrom ? 2 : 1;
      attach(hole_at(p, i, out_arg), r, stats);
      // the opposite output is zero by construction of a one-sided swap, and
      // the deposit's destination is the pool being swapped against
      if (auto* h = hole_at(p, i, 1 - out_arg)) attach_fixed(h, 0, stats);
      size_t to_arg = dep.selector == abi::sel::kTransferFrom ? 1 : 0;
      if (auto* h = hole_at(p, j, to_arg)) attach_fixed(h, to_word(act.target), stats);
      break;
    }
  }
}

// Sentinel probing: run the cloned path with a distinctive value in one hole
// and watch which call argument it surfaces in. A hole that flows into a
// loan amount is filled with everything the provider can lend.
inline void rewrite_hijack(const minivm::WorldState& w, prog::ProgramWithHoles& p,
                           const Address& sender, RewriteStats* stats) {
  static const Word kSentinel = hash_word(Word(0x5e117e1));
  size_t n = p.function.args.size();
  for (auto& h : p.holes) n = std::max(n, h.arg_index + 1);

  for (auto& h : p.holes) {
    if (h.is_filled()) continue;
    std::vector<Word> args(n, 0);
    for (auto& o : p.holes)
      if (o.filled) args[o.arg_index] = o.filled_word();
    args[h.arg_index] = kSentinel;

    minivm::Message m;
    m.caller = sender;
    m.origin = sender;
    m.target = p.target;
    if (!p.function.is_fallback) m.calldata = abi::make_calldata(p.function.selector, args);
    auto run = minivm::execute(w, m, p.decisions);

    for (auto& c : run.trace.calls) {
      if (c.selector == abi::sel::kFlashloan && abi::arg_word(c.args, 2) == kSentinel) {
        Address token = to_address(abi::arg_word(c.args, 1));
        if (token.is_zero())
          token = to_address(w.storage_at(c.target, contracts::kProviderTokenSlot));
        prog::RuleFill r;
        r.kind = prog::RuleFill::Kind::FlashloanNeed;
        r.flat_amount = contracts::token_balance(w, token, c.target);
        attach(&h, r, stats);
        break;
      }
    }
  }
}

}  // namespace detail

// Fill holes by rule. Only ever fills, never unfills, so the count of open
// holes is monotonically non-increasing.
inline prog::ProgramWithHoles rewrite_program(const minivm::WorldState& w,
                                              prog::ProgramWithHoles p,
                                              const Address& sender = prog::default_whitehat(),
                                              RewriteStats* stats = nullptr) {
  if (p.provenance == prog::ProgramWithHoles::Provenance::Backrun)
    detail::rewrite_backrun(w, p, sender, stats);
  else
    detail::rewrite_hijack(w, p, sender, stats);
  return p;
}

}  // namespace backrunner::rewrite

#pragma once

#include <map>
#include <string>
#include <vector>

#include "contracts.hpp"
#include "program.hpp"
#include "traits.hpp"

// Concrete replay of synthesized programs: no branch forcing, no feasibility
// assumptions. A program either runs to completion against the live world or
// the whole sequence is discarded.
namespace backrunner::runner {

struct RunResult {
  bool ok = false;
  std::string error;          // empty when ok
  minivm::WorldState world;   // post-state; pre-state when the run failed
  SignedWord base_profit = 0; // sender base-balance delta
  std::vector<Bytes> returns; // per action (created address for Create)
  std::vector<std::vector<Word>> resolved_args;
  std::vector<minivm::ExecTrace> traces;
  uint64_t execs = 0;
};

inline bool is_provider(const minivm::Account& acc) {
  static const Word kProviderHash = hash256(contracts::provider_code());
  return !acc.code.empty() && hash256(acc.code) == kProviderHash;
}

// Flashloan atomicity: every provider must end the sequence with zero booked
// debt, otherwise the whole run is rejected and the pre-state kept.
inline bool providers_settled(const minivm::WorldState& w) {
  for (auto& [addr, acc] : w.accounts)
    if (is_provider(acc) && w.storage_at(addr, contracts::kProviderDebtSlot) != 0) return false;
  return true;
}

inline SignedWord balance_delta(const Word& pre, const Word& post) {
  return post >= pre ? SignedWord(post - pre) : -SignedWord(pre - post);
}

// Evaluate a rule fill against the live world at the moment the consuming
// action runs; this is what keeps repayments and swap quotes in sync with
// state changed by earlier actions.
inline std::optional<Word> resolve_rule(const minivm::WorldState& w, const prog::RuleFill& r,
                                        const std::vector<prog::Action>& actions,
                                        const std::vector<std::vector<Word>>& resolved_args,
                                        const std::map<Address, Address>& remap) {
  using K = prog::RuleFill::Kind;
  auto rm = [&](const Address& a) {
    auto it = remap.find(a);
    return it == remap.end() ? a : it->second;
  };
  switch (r.kind) {
    case K::FlashloanNeed:
    case K::Fixed:
      return r.flat_amount;
    case K::RepayWithFee: {
      if (r.ref_action >= actions.size()) return std::nullopt;
      return w.storage_at(rm(actions[r.ref_action].target), contracts::kProviderDebtSlot);
    }
    case K::Allowance:
      return traits::detail::static_call_word(
          w, rm(r.token),
          abi::make_calldata(abi::sel::kAllowance, {to_word(rm(r.owner)), to_word(rm(r.spender))}));
    case K::SwapQuote: {
      Word in = r.flat_amount;
      if (r.ref_action < resolved_args.size() && r.ref_arg < resolved_args[r.ref_action].size())
        in = resolved_args[r.ref_action][r.ref_arg];
      return contracts::quote_swap_out(w, rm(r.pool), in, r.out_is_token0);
    }
    default:
      return std::nullopt;
  }
}

inline RunResult run_actions(const minivm::WorldState& pre,
                             const std::vector<prog::Action>& actions,
                             const std::vector<prog::Hole>& holes, const Address& sender,
                             std::map<Address, Address> remap = {},
                             const minivm::VmConfig& cfg = {}) {
  RunResult rr;
  rr.world = pre;
  const Word pre_bal = pre.balance_of(sender);
  auto rm = [&](const Address& a) {
    auto it = remap.find(a);
    return it == remap.end() ? a : it->second;
  };
  auto rm_word = [&](const Word& v) {
    if ((v >> 160) == 0) {
      auto it = remap.find(to_address(v));
      if (it != remap.end()) return to_word(it->second);
    }
    return v;
  };
  auto fail = [&](std::string why) {
    rr.error = std::move(why);
    rr.world = pre;
    return rr;
  };

  for (size_t ai = 0; ai < actions.size(); ++ai) {
    const auto& act = actions[ai];
    std::vector<Word> words;
    for (auto& av : act.args) {
      Word v = 0;
      switch (av.kind) {
        case prog::ArgValue::Kind::Constant:
          v = av.as_word();
          break;
        case prog::ArgValue::Kind::PriorReturn:
          if (av.src_action < rr.returns.size()) {
            const Bytes& ret = rr.returns[av.src_action];
            if (av.byte_off + av.byte_len <= ret.size())
              v = word_from_bytes(ret.data() + av.byte_off, av.byte_len);
          }
          break;
        case prog::ArgValue::Kind::Hole: {
          if (av.hole_index >= holes.size()) return fail("hole index out of range");
          const auto& h = holes[av.hole_index];
          if (h.rule.kind != prog::RuleFill::Kind::None) {
            auto rv = resolve_rule(rr.world, h.rule, actions, rr.resolved_args, remap);
            if (!rv) return fail("rule fill unresolvable at action " + std::to_string(ai));
            v = *rv;
          } else if (h.filled) {
            v = h.filled_word();
          }
          break;
        }
      }
      words.push_back(rm_word(v));
    }

    minivm::Message m;
    m.caller = sender;
    m.origin = sender;
    m.value = act.value;
    if (act.kind == prog::Action::Kind::Create) {
      m.calldata = act.initcode;
    } else {
      m.target = rm(act.target);
      if (act.selector != 0) m.calldata = abi::make_calldata(act.selector, words);
    }

    auto res = minivm::execute(rr.world, m, {}, cfg);
    rr.execs++;
    rr.traces.push_back(res.trace);
    rr.resolved_args.push_back(words);
    if (res.outcome != minivm::Outcome::Success)
      return fail("action " + std::to_string(ai) + " reverted");
    rr.world = std::move(res.world);

    if (act.kind == prog::Action::Kind::Create) {
      Address created = res.trace.created.empty() ? Address{} : res.trace.created.front();
      if (!act.created_addr.is_zero()) remap[act.created_addr] = created;
      auto wb = word_bytes(to_word(created));
      rr.returns.emplace_back(wb.begin(), wb.end());
    } else {
      rr.returns.push_back(res.trace.return_data);
    }
  }

  if (!providers_settled(rr.world)) return fail("unsettled flashloan debt");
  rr.ok = true;
  rr.base_profit = balance_delta(pre_bal, rr.world.balance_of(sender));
  return rr;
}

inline RunResult run_hijack(const minivm::WorldState& pre, const prog::ProgramWithHoles& p,
                            const Address& sender, const minivm::VmConfig& cfg = {}) {
  RunResult rr;
  rr.world = pre;
  minivm::Message m;
  m.caller = sender;
  m.origin = sender;
  m.target = p.target;
  if (!p.function.is_fallback) {
    size_t n = p.function.args.size();
    for (auto& h : p.holes) n = std::max(n, h.arg_index + 1);
    std::vector<Word> args(n, 0);
    for (auto& h : p.holes) {
      if (h.rule.kind != prog::RuleFill::Kind::None) {
        auto rv = resolve_rule(pre, h.rule, {}, {}, {});
        if (rv) args[h.arg_index] = *rv;
      } else if (h.filled) {
        args[h.arg_index] = h.filled_word();
      }
    }
    m.calldata = abi::make_calldata(p.function.selector, args);
  }
  auto res = minivm::execute(pre, m, {}, cfg);
  rr.execs = 1;
  rr.traces.push_back(res.trace);
  if (res.outcome != minivm::Outcome::Success) {
    rr.error = "reverted";
    return rr;
  }
  if (!providers_settled(res.world)) {
    rr.error = "unsettled flashloan debt";
    return rr;
  }
  rr.ok = true;
  rr.world = std::move(res.world);
  rr.returns.push_back(rr.traces[0].return_data);
  rr.base_profit = balance_delta(pre.balance_of(sender), rr.world.balance_of(sender));
  return rr;
}

inline RunResult run_program(const minivm::WorldState& pre, const prog::ProgramWithHoles& p,
                             const Address& sender, const minivm::VmConfig& cfg = {}) {
  if (p.provenance == prog::ProgramWithHoles::Provenance::Hijack)
    return run_hijack(pre, p, sender, cfg);
  return run_actions(pre, p.actions, p.holes, sender, p.remap, cfg);
}

}  // namespace backrunner::runner

#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <vector>

#include "minivm.hpp"
#include "program.hpp"
#include "traits.hpp"

namespace backrunner::backrun {

enum class Error { None, NotAnAttack };

struct ReconstructResult {
  Error error = Error::None;
  prog::ActionTrace trace;
  bool ok() const { return error == Error::None; }
};

namespace detail {

inline prog::Action::Kind kind_for(uint8_t call_kind, uint32_t selector) {
  if (call_kind == minivm::CREATE) return prog::Action::Kind::Create;
  switch (selector) {
    case abi::sel::kFlashloan: return prog::Action::Kind::Flashloan;
    case abi::sel::kSwap: return prog::Action::Kind::Swap;
    case abi::sel::kTransfer:
    case abi::sel::kTransferFrom: return prog::Action::Kind::Transfer;
    default: return prog::Action::Kind::Call;
  }
}

// Argument linkage: a calldata word that exactly reproduces a 32-byte-aligned
// word of an earlier action's return data becomes a data-flow edge rather
// than a literal.
inline prog::ArgValue link_arg(const Word& w, const std::vector<Bytes>& prior_returns) {
  if (w != 0) {
    for (size_t src = 0; src < prior_returns.size(); ++src) {
      const Bytes& ret = prior_returns[src];
      for (size_t off = 0; off + 32 <= ret.size(); off += 32) {
        if (word_from_bytes(ret.data() + off, 32) == w) return prog::ArgValue::prior(src, off, 32);
      }
    }
  }
  return prog::ArgValue::constant_word(w);
}

inline prog::Action action_from_call(const minivm::CallRecord& c,
                                     const std::vector<Bytes>& prior_returns) {
  prog::Action act;
  act.kind = kind_for(c.kind, c.selector);
  act.value = c.value;
  if (act.kind == prog::Action::Kind::Create) {
    act.initcode = c.args;
    act.created_addr = c.target;
    return act;
  }
  act.target = c.target;
  act.selector = c.selector;
  size_t nargs = c.args.size() > 4 ? (c.args.size() - 4) / 32 : 0;
  for (size_t i = 0; i < nargs; ++i)
    act.args.push_back(link_arg(abi::arg_word(c.args, i), prior_returns));
  switch (c.selector) {
    case abi::sel::kFlashloan:
      if (nargs >= 2) act.fl_token = to_address(abi::arg_word(c.args, 1));
      break;
    case abi::sel::kSwap:
      if (nargs >= 3) act.to_addr = to_address(abi::arg_word(c.args, 2));
      break;
    case abi::sel::kTransfer:
      act.from_addr = c.caller;
      if (nargs >= 1) act.to_addr = to_address(abi::arg_word(c.args, 0));
      break;
    case abi::sel::kTransferFrom:
      if (nargs >= 2) {
        act.from_addr = to_address(abi::arg_word(c.args, 0));
        act.to_addr = to_address(abi::arg_word(c.args, 1));
      }
      break;
    default:
      break;
  }
  return act;
}

}  // namespace detail

// Fold an observed attack transaction into a flat, sender-replayable action
// list. The transaction's own callee is treated as the attacker's orchestrator
// and its outgoing calls become the actions; a transaction that makes no
// internal calls is itself the single action. Reverted transactions carry no
// attack to copy.
inline ReconstructResult reconstruct(const minivm::WorldState& pre, const minivm::Message& tx) {
  ReconstructResult out;
  auto run = minivm::execute(pre, tx);
  if (run.outcome != minivm::Outcome::Success) {
    out.error = Error::NotAnAttack;
    return out;
  }

  auto& trace = out.trace;
  trace.attacker_addresses.insert(tx.origin);

  std::vector<const minivm::CallRecord*> level;
  for (auto& c : run.trace.calls)
    if (c.depth == 1) level.push_back(&c);

  std::vector<Bytes> returns;
  if (level.empty()) {
    if (!tx.target) {
      out.error = Error::NotAnAttack;  // plain creation with silent constructor
      return out;
    }
    minivm::CallRecord self;
    self.kind = minivm::CALL;
    self.caller = tx.caller;
    self.target = *tx.target;
    self.selector = abi::selector_of(tx.calldata);
    self.args = tx.calldata;
    self.value = tx.value;
    trace.actions.push_back(detail::action_from_call(self, returns));
  } else {
    if (tx.target) trace.attacker_addresses.insert(*tx.target);
    for (auto* c : level) {
      trace.actions.push_back(detail::action_from_call(*c, returns));
      if (c->kind == minivm::CREATE) {
        trace.attacker_addresses.insert(c->target);
        auto wb = word_bytes(to_word(c->target));
        returns.emplace_back(wb.begin(), wb.end());
      } else {
        returns.push_back(c->ret);
      }
    }
  }

  for (auto& act : trace.actions) {
    if (act.kind == prog::Action::Kind::Create) continue;
    if (trace.attacker_addresses.count(act.target)) continue;
    if (std::find(trace.victim_set.begin(), trace.victim_set.end(), act.target) ==
        trace.victim_set.end())
      trace.victim_set.push_back(act.target);
  }
  return out;
}

// Point every attacker-controlled address at ours. Replayed creations extend
// the map at run time, so later references to the observed deployment address
// follow the new one automatically.
inline prog::ActionTrace redirect_profit(prog::ActionTrace trace, const Address& whitehat) {
  for (auto& a : trace.attacker_addresses) trace.remap[a] = whitehat;
  return trace;
}

// Victim substitutions that preserve every pairwise relation, built as an
// incremental cross-product over trait-similar candidates. The all-identity
// mapping is excluded; distinct victims stay distinct.
inline std::vector<std::map<Address, Address>> find_replacers(
    const minivm::WorldState& world, const traits::SimilarityIndex& index,
    const prog::ActionTrace& trace, traits::TraitMode mode = traits::TraitMode::Selectors,
    size_t cap = 10'000) {
  const auto& victims = trace.victim_set;
  if (victims.empty()) return {};

  // pairwise relations of the original victim tuple, both directions
  std::map<std::pair<size_t, size_t>, traits::RelationSet> want;
  for (size_t i = 0; i < victims.size(); ++i)
    for (size_t j = 0; j < victims.size(); ++j)
      if (i != j) want[{i, j}] = traits::relation(world, victims[i], victims[j], &index);

  // full-relation equality, testing the cheap structural part before paying
  // for the per-pair token approval scan
  auto matches = [&](const Address& a, const Address& b, const traits::RelationSet& w) {
    traits::RelationSet w_static = w;
    bool w_appr = w_static.erase(traits::Relation::APPROVAL) > 0;
    if (traits::relation_static(world, a, b, &index) != w_static) return false;
    return traits::approves(world, a, b, &index) == w_appr;
  };

  std::vector<std::vector<Address>> partial{{}};
  for (size_t i = 0; i < victims.size(); ++i) {
    auto candidates = index.query_similar(victims[i], mode);
    std::vector<std::vector<Address>> next;
    for (auto& p : partial) {
      for (auto& cand : candidates) {
        bool ok = true;
        for (size_t j = 0; j < p.size() && ok; ++j) {
          if (p[j] == cand) ok = false;  // keep the tuple injective
          if (ok && !matches(cand, p[j], want[{i, j}])) ok = false;
          if (ok && !matches(p[j], cand, want[{j, i}])) ok = false;
        }
        if (!ok) continue;
        auto ext = p;
        ext.push_back(cand);
        next.push_back(std::move(ext));
        if (next.size() > cap) break;  // +1 slack: identity may still be dropped
      }
      if (next.size() > cap) break;
    }
    partial = std::move(next);
  }

  std::vector<std::map<Address, Address>> out;
  for (auto& p : partial) {
    bool identity = true;
    for (size_t i = 0; i < victims.size(); ++i)
      if (p[i] != victims[i]) identity = false;
    if (identity) continue;
    std::map<Address, Address> m;
    for (size_t i = 0; i < victims.size(); ++i) m[victims[i]] = p[i];
    out.push_back(std::move(m));
    if (out.size() >= cap) break;
  }
  return out;
}

// Open every literal argument into a hole, keeping the observed value as the
// default fill. Data-flow edges and the action skeleton stay fixed.
inline prog::ProgramWithHoles extract_holes(const prog::ActionTrace& trace) {
  prog::ProgramWithHoles p;
  p.provenance = prog::ProgramWithHoles::Provenance::Backrun;
  p.actions = trace.actions;
  p.remap = trace.remap;

  std::set<Address> known;
  known.insert(trace.attacker_addresses.begin(), trace.attacker_addresses.end());
  known.insert(trace.victim_set.begin(), trace.victim_set.end());
  for (auto& a : trace.actions) {
    known.insert(a.target);
    known.insert(a.created_addr);
  }

  for (size_t ai = 0; ai < p.actions.size(); ++ai) {
    auto& act = p.actions[ai];
    for (size_t k = 0; k < act.args.size(); ++k) {
      if (act.args[k].kind != prog::ArgValue::Kind::Constant) continue;
      prog::Hole h;
      h.action_index = ai;
      h.arg_index = k;
      Word v = act.args[k].as_word();
      bool addr_like = (v >> 160) == 0 && known.count(to_address(v));
      h.type = addr_like ? funcx::ArgType::address() : funcx::ArgType::uint_of(256);
      h.filled = act.args[k].constant;
      h.source = prog::Hole::Source::Default;
      act.args[k] = prog::ArgValue::hole(p.holes.size());
      p.holes.push_back(std::move(h));
    }
  }
  return p;
}

}  // namespace backrunner::backrun

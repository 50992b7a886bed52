#pragma once

#include <deque>
#include <map>
#include <vector>

#include "funcx.hpp"
#include "minivm.hpp"
#include "program.hpp"

namespace backrunner::hijack {

struct PathCaps {
  size_t max_paths = 4096;
  uint64_t step_budget = 1'000'000;
};

struct CloneResult {
  std::vector<prog::ProgramWithHoles> programs;
  bool truncated = false;
};

// Constants harvested from storage and code that might be the privileged
// sender, plus the configured whitehat appended last.
inline std::vector<Address> enumerate_senders(const minivm::WorldState& world,
                                              const Address& contract,
                                              const Address& whitehat = prog::default_whitehat()) {
  std::vector<Address> out;
  auto add = [&](const Address& a) {
    if (a.is_zero()) return;
    for (auto& e : out)
      if (e == a) return;
    out.push_back(a);
  };
  const auto* acc = world.find(contract);
  if (acc) {
    for (auto& [key, value] : acc->storage) {
      if ((value >> 160) == 0) add(to_address(value));
    }
    const Bytes& code = acc->code;
    for (size_t i = 0; i < code.size();) {
      uint8_t op = code[i];
      if (minivm::is_push(op)) {
        size_t n = minivm::push_size(op);
        if (n == 20 || n == 32) {
          size_t avail = std::min(n, code.size() - i - 1);
          Word v = word_from_bytes(code.data() + i + 1, avail);
          add(to_address(v & kAddressMask));  // low-20-byte tail
        }
        i += 1 + n;
      } else {
        i += 1;
      }
    }
  }
  add(whitehat);
  if (out.empty() || out.back() != whitehat) out.push_back(whitehat);
  return out;
}

namespace detail {

inline minivm::Message default_message(const Address& contract, const funcx::FunctionDesc& f,
                                       const Address& probe) {
  minivm::Message msg;
  msg.caller = probe;
  msg.origin = probe;
  msg.target = contract;
  if (!f.is_fallback) msg.calldata = abi::make_calldata(f.selector);
  return msg;
}

inline std::vector<funcx::ArgType> merge_args(std::vector<funcx::ArgType> base,
                                              const std::vector<funcx::ArgType>& extra) {
  if (extra.size() > base.size()) base.resize(extra.size(), funcx::ArgType::unknown());
  for (size_t i = 0; i < extra.size(); ++i) {
    if (base[i].kind == funcx::ArgType::Kind::Unknown) base[i] = extra[i];
  }
  return base;
}

}  // namespace detail

// Algorithm: frontier search over forced-branch decision prefixes, one
// default-input run per prefix. Each newly encountered top-frame JUMPI past
// the prefix spawns the flipped prefix; only the first dynamic occurrence of
// each JUMPI pc is flip-eligible, which bounds loops. Feasibility is never
// checked; programs are recorded even when the forced run reverts.
inline CloneResult clone_exploit(const minivm::WorldState& world, const Address& contract,
                                 const PathCaps& caps = {},
                                 const Address& whitehat = prog::default_whitehat()) {
  CloneResult result;
  const auto* acc = world.find(contract);
  if (!acc || acc->code.empty()) return result;
  const Bytes& code = acc->code;

  auto funcs = funcx::extract_funcs(code);
  auto senders = enumerate_senders(world, contract, whitehat);

  minivm::VmConfig cfg;
  cfg.step_budget = caps.step_budget;

  for (auto& f : funcs) {
    auto base_args = funcx::infer_args(code, f, world);

    std::deque<minivm::BranchOverrides> frontier;
    frontier.push_back({});
    std::set<std::vector<uint64_t>> seen_paths;

    while (!frontier.empty()) {
      if (result.programs.size() >= caps.max_paths) {
        result.truncated = true;
        break;
      }
      minivm::BranchOverrides prefix = frontier.front();
      frontier.pop_front();

      auto msg = detail::default_message(contract, f, whitehat);
      auto run = minivm::execute(world, msg, prefix, cfg);
      if (run.trace.unused_overrides) continue;  // forced point no longer reached

      const auto& path = run.trace.pc_frames.empty() ? std::vector<uint64_t>{}
                                                     : run.trace.pc_frames[0];
      bool fresh = seen_paths.insert(path).second;
      if (fresh) {
        prog::ProgramWithHoles p;
        p.provenance = prog::ProgramWithHoles::Provenance::Hijack;
        p.target = contract;
        p.function = f;
        p.decisions = prefix;
        p.sender_candidates = senders;
        p.realized_path = path;
        auto args = detail::merge_args(base_args, funcx::infer_args_from_trace(run.trace));
        p.function.args = args;
        for (size_t i = 0; i < args.size(); ++i) {
          prog::Hole h;
          h.arg_index = i;
          h.type = args[i];
          p.holes.push_back(h);
        }
        result.programs.push_back(std::move(p));
      }

      // extend: flip branches encountered past the prefix
      uint64_t bound = prefix.empty() ? 0 : prefix.back().occurrence + 1;
      std::set<uint64_t> seen_pcs;
      for (auto& j : run.trace.jumpis) {
        bool first_at_pc = seen_pcs.insert(j.pc).second;
        if (j.occurrence < bound || !first_at_pc) continue;
        minivm::BranchOverrides next = prefix;
        next.push_back({j.occurrence, !j.taken});
        frontier.push_back(std::move(next));
      }
    }
    if (result.programs.size() >= caps.max_paths) break;
  }

  // canonical order: selector, then decision vector
  std::stable_sort(result.programs.begin(), result.programs.end(), [](const auto& a, const auto& b) {
    auto ka = std::make_tuple(a.function.is_fallback, a.function.selector);
    auto kb = std::make_tuple(b.function.is_fallback, b.function.selector);
    if (ka != kb) return ka < kb;
    return a.decisions < b.decisions;
  });
  return result;
}

}  // namespace backrunner::hijack

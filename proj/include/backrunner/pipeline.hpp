#pragma once

#include <chrono>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "backrun.hpp"
#include "chainsim.hpp"
#include "corpus.hpp"
#include "fuzz.hpp"
#include "hijack.hpp"
#include "rewrite.hpp"

// End-to-end defense: watch blocks for exploit deployments and confirmed
// attacks, synthesize counter-programs, close their holes by rule, search the
// rest, and submit the best profitable rescue privately for the next block.
namespace backrunner::pipeline {

struct PipelineConfig {
  Address whitehat = prog::default_whitehat();
  unsigned workers = 1;
  uint64_t seed = 1;
  fuzz::FuzzBudget budget{20'000, 10'000};  // shared across an opportunity's programs
  hijack::PathCaps path_caps;
  size_t replacer_cap = 16;
  traits::TraitMode trait_mode = traits::TraitMode::Selectors;
  Word bundle_gas_price = 0;  // rescues ride the private lane; no tip at desk scale
  Word drop_threshold_bps = 500;  // single-transaction value drop that counts as an attack
  minivm::VmConfig vm;
};

struct Event {
  enum class Kind { ContractCreated, AttackConfirmed };
  Kind kind = Kind::ContractCreated;
  Address contract;         // ContractCreated: the deployment to hijack
  minivm::WorldState pre;   // AttackConfirmed: state the attack executed on
  minivm::Message attack;   // AttackConfirmed: the observed transaction
};

struct StageRecord {
  std::string stage;
  bool ok = true;
  std::string note;
  uint64_t execs = 0;
  uint64_t millis = 0;  // informational; excluded from canonical serialization
};

struct RescueReport {
  uint64_t opportunity_id = 0;
  std::string strategy;  // "hijack" | "backrun"
  size_t programs_generated = 0;
  size_t holes_before = 0;  // open holes of the chosen program before rule rewriting
  size_t holes_after = 0;   // and after
  SignedWord profit = 0;    // best found; zero when nothing profitable
  Address sender;
  size_t txs_submitted = 0;
  bool submitted = false;
  std::vector<StageRecord> stages;
};

// what to hand the chain, when anything at all
struct RescuePlan {
  std::vector<chainsim::Tx> txs;
  Word gas_price = 0;
};

struct PipelineOutcome {
  RescueReport report;
  RescuePlan plan;
};

namespace detail {

inline uint64_t now_ms() {
  return uint64_t(std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now().time_since_epoch())
                      .count());
}

inline size_t open_holes(const prog::ProgramWithHoles& p) {
  size_t n = 0;
  for (auto& h : p.holes)
    if (h.source != prog::Hole::Source::Rule) n++;
  return n;
}

inline Address remapped(const std::map<Address, Address>& remap, const Address& a) {
  auto it = remap.find(a);
  return it == remap.end() ? a : it->second;
}

// Concrete transactions for a searched program, arguments resolved against
// the world they will execute on. Returns nothing if the program no longer
// runs cleanly.
inline std::vector<chainsim::Tx> materialize_actions(const minivm::WorldState& w,
                                                     const prog::ProgramWithHoles& p,
                                                     const Address& sender, Word gas_price,
                                                     const minivm::VmConfig& vm) {
  auto rr = runner::run_actions(w, p.actions, p.holes, sender, p.remap, vm);
  if (!rr.ok || rr.base_profit <= 0) return {};
  std::vector<chainsim::Tx> txs;
  for (size_t i = 0; i < p.actions.size(); ++i) {
    const auto& act = p.actions[i];
    chainsim::Tx tx;
    tx.gas_price = gas_price;
    tx.is_private = true;
    tx.msg.caller = sender;
    tx.msg.origin = sender;
    tx.msg.value = act.value;
    if (act.kind == prog::Action::Kind::Create) {
      tx.msg.calldata = act.initcode;
    } else {
      tx.msg.target = remapped(p.remap, act.target);
      if (act.selector != 0) tx.msg.calldata = abi::make_calldata(act.selector, rr.resolved_args[i]);
    }
    txs.push_back(std::move(tx));
  }
  return txs;
}

inline std::vector<chainsim::Tx> materialize_hijack(const minivm::WorldState& w,
                                                    const prog::ProgramWithHoles& p,
                                                    const Address& sender, Word gas_price,
                                                    const minivm::VmConfig& vm) {
  auto rr = runner::run_hijack(w, p, sender, vm);
  if (!rr.ok || rr.base_profit <= 0) return {};
  chainsim::Tx tx;
  tx.gas_price = gas_price;
  tx.is_private = true;
  tx.msg.caller = sender;
  tx.msg.origin = sender;
  tx.msg.target = p.target;
  if (!p.function.is_fallback) {
    size_t n = p.function.args.size();
    for (auto& h : p.holes) n = std::max(n, h.arg_index + 1);
    std::vector<Word> args(n, 0);
    for (auto& h : p.holes) {
      if (h.rule.kind != prog::RuleFill::Kind::None) {
        if (auto rv = runner::resolve_rule(w, h.rule, {}, {}, {})) args[h.arg_index] = *rv;
      } else if (h.filled) {
        args[h.arg_index] = h.filled_word();
      }
    }
    tx.msg.calldata = abi::make_calldata(p.function.selector, args);
  }
  return {std::move(tx)};
}

// Search every program under a shared execution budget and keep the single
// best profitable candidate. Deterministic for one worker and a fixed seed.
struct SearchOutcome {
  fuzz::CampaignResult best;
  size_t winner = 0;  // index into the program list
  bool found = false;
  uint64_t execs = 0;
};

inline SearchOutcome search_programs(const minivm::WorldState& w,
                                     const std::vector<prog::ProgramWithHoles>& programs,
                                     const PipelineConfig& cfg) {
  SearchOutcome out;
  if (programs.empty()) return out;
  fuzz::FuzzConfig fc;
  fc.seed = cfg.seed;
  fc.workers = cfg.workers;
  fc.vm = cfg.vm;
  fc.budget.max_execs = std::max<uint64_t>(1, cfg.budget.max_execs / programs.size());
  fc.budget.max_millis = std::max<uint64_t>(1, cfg.budget.max_millis / programs.size());
  for (size_t i = 0; i < programs.size(); ++i) {
    auto res = fuzz::run_campaign(w, programs[i], fc);
    out.execs += res.execs;
    if (res.profitable && (!out.found || res.best_profit > out.best.best_profit)) {
      out.best = res;
      out.winner = i;
      out.found = true;
    }
  }
  return out;
}

inline void finish_stage(RescueReport& r, StageRecord rec, uint64_t t0) {
  rec.millis = now_ms() - t0;
  r.stages.push_back(std::move(rec));
}

inline PipelineOutcome run_hijack_opportunity(const minivm::WorldState& w, const Event& ev,
                                              const PipelineConfig& cfg) {
  PipelineOutcome out;
  auto& r = out.report;
  r.strategy = "hijack";

  uint64_t t0 = now_ms();
  auto clone = hijack::clone_exploit(w, ev.contract, cfg.path_caps, cfg.whitehat);
  r.programs_generated = clone.programs.size();
  finish_stage(r, {"clone", !clone.programs.empty(),
                   clone.programs.empty() ? "no programs" : std::to_string(clone.programs.size()),
                   0, 0},
               t0);
  if (clone.programs.empty()) return out;

  t0 = now_ms();
  std::vector<size_t> before;
  std::vector<prog::ProgramWithHoles> rewritten;
  for (auto& p : clone.programs) {
    before.push_back(open_holes(p));
    rewritten.push_back(rewrite::rewrite_program(w, p, cfg.whitehat));
  }
  finish_stage(r, {"rewrite", true, "", 0, 0}, t0);

  t0 = now_ms();
  auto found = search_programs(w, rewritten, cfg);
  finish_stage(r, {"search", found.found, found.found ? "" : "no profitable program",
                   found.execs, 0},
               t0);
  r.holes_before = before[found.winner];
  r.holes_after = open_holes(rewritten[found.winner]);
  if (!found.found || found.best.best_profit <= 0) return out;

  t0 = now_ms();
  auto txs = materialize_hijack(w, found.best.best, found.best.best_sender,
                                cfg.bundle_gas_price, cfg.vm);
  finish_stage(r, {"submit", !txs.empty(), txs.empty() ? "stale at submission" : "", 0, 0}, t0);
  if (txs.empty()) return out;

  r.profit = found.best.best_profit;
  r.sender = found.best.best_sender;
  r.txs_submitted = txs.size();
  r.submitted = true;
  out.plan.txs = std::move(txs);
  out.plan.gas_price = cfg.bundle_gas_price;
  return out;
}

inline PipelineOutcome run_backrun_opportunity(const minivm::WorldState& w, const Event& ev,
                                               const PipelineConfig& cfg) {
  PipelineOutcome out;
  auto& r = out.report;
  r.strategy = "backrun";

  uint64_t t0 = now_ms();
  auto rec = backrun::reconstruct(ev.pre, ev.attack);
  finish_stage(r, {"reconstruct", rec.ok(), rec.ok() ? "" : "not an attack", 0, 0}, t0);
  if (!rec.ok()) return out;
  auto base = backrun::redirect_profit(rec.trace, cfg.whitehat);

  t0 = now_ms();
  auto index = traits::SimilarityIndex::build(w);
  auto replacers = backrun::find_replacers(w, index, base, cfg.trait_mode, cfg.replacer_cap);
  finish_stage(r, {"replacers", true, std::to_string(replacers.size()), 0, 0}, t0);

  t0 = now_ms();
  std::vector<std::map<Address, Address>> variants{{}};
  variants.insert(variants.end(), replacers.begin(), replacers.end());
  std::vector<size_t> before;
  std::vector<prog::ProgramWithHoles> programs;
  for (auto& variant : variants) {
    auto trace = base;
    for (auto& [from, to] : variant) trace.remap[from] = to;
    auto p = backrun::extract_holes(trace);
    p.sender_candidates = {cfg.whitehat};
    before.push_back(open_holes(p));
    programs.push_back(rewrite::rewrite_program(w, std::move(p), cfg.whitehat));
  }
  r.programs_generated = programs.size();
  finish_stage(r, {"rewrite", true, std::to_string(programs.size()), 0, 0}, t0);

  t0 = now_ms();
  auto found = search_programs(w, programs, cfg);
  finish_stage(r, {"search", found.found, found.found ? "" : "no profitable program",
                   found.execs, 0},
               t0);
  r.holes_before = before[found.winner];
  r.holes_after = open_holes(programs[found.winner]);
  if (!found.found || found.best.best_profit <= 0) return out;

  t0 = now_ms();
  auto txs = materialize_actions(w, found.best.best, found.best.best_sender,
                                 cfg.bundle_gas_price, cfg.vm);
  finish_stage(r, {"submit", !txs.empty(), txs.empty() ? "stale at submission" : "", 0, 0}, t0);
  if (txs.empty()) return out;

  r.profit = found.best.best_profit;
  r.sender = found.best.best_sender;
  r.txs_submitted = txs.size();
  r.submitted = true;
  out.plan.txs = std::move(txs);
  out.plan.gas_price = cfg.bundle_gas_price;
  return out;
}

}  // namespace detail

// Handle one opportunity against the current world. Never plans a submission
// whose searched profit is zero or negative.
inline PipelineOutcome run_opportunity(const minivm::WorldState& world, const Event& ev,
                                       const PipelineConfig& cfg = {}) {
  auto out = ev.kind == Event::Kind::ContractCreated
                 ? detail::run_hijack_opportunity(world, ev, cfg)
                 : detail::run_backrun_opportunity(world, ev, cfg);
  return out;
}

// ---- block watching ----

// Replay a block's included transactions over the pre-block state and emit an
// event per exploit deployment and per single-transaction value drop beyond
// the threshold. Fees are ignored in the replay: they never move more than a
// sliver of any account's value at scenario scale.
inline std::vector<Event> scan_block(const minivm::WorldState& pre,
                                     const std::vector<chainsim::Tx>& txs,
                                     const chainsim::PriceBook& book,
                                     Word drop_threshold_bps = 500) {
  std::vector<Event> events;
  minivm::WorldState cursor = pre;
  for (auto& tx : txs) {
    auto res = minivm::execute(cursor, tx.msg);
    if (res.outcome != minivm::Outcome::Success) continue;

    if (!tx.msg.target && !res.trace.created.empty()) {
      Event ev;
      ev.kind = Event::Kind::ContractCreated;
      ev.contract = res.trace.created.front();
      events.push_back(std::move(ev));
    }

    for (auto& [addr, acc] : cursor.accounts) {
      Word was = chainsim::value_of(cursor, addr, book);
      if (was == 0) continue;
      Word now = chainsim::value_of(res.world, addr, book);
      if (now >= was) continue;
      if ((was - now) * 10'000 > was * drop_threshold_bps) {
        Event ev;
        ev.kind = Event::Kind::AttackConfirmed;
        ev.pre = cursor;
        ev.attack = tx.msg;
        events.push_back(std::move(ev));
        break;  // one event per transaction, however many accounts it hits
      }
    }
    cursor = std::move(res.world);
  }
  return events;
}

// ---- scenario runner ----

struct ScenarioRunResult {
  std::string scenario;
  std::vector<RescueReport> reports;
  minivm::WorldState final_world;
  SignedWord whitehat_profit = 0;
  size_t rescue_bundles = 0;
  uint64_t blocks = 0;
};

// Drive the scripted timeline through the chain with the defense attached:
// one block per tick, scripted transactions at their ticks, detection over
// every built block, rescues submitted for the following block.
inline ScenarioRunResult run_scenario(const corpus::Scenario& s, const PipelineConfig& cfg = {}) {
  ScenarioRunResult out;
  out.scenario = s.name;
  chainsim::Chain chain(s.world);
  const Word whitehat_start = s.world.balance_of(cfg.whitehat);

  std::map<uint64_t, std::vector<chainsim::Tx>> submitted;
  std::set<uint64_t> ours;
  uint64_t last_tick = 0;
  for (auto& st : s.timeline) last_tick = std::max(last_tick, st.tick);
  uint64_t opportunity = 0;

  for (uint64_t tick = 0; tick <= last_tick + 2; ++tick) {
    for (auto& st : s.timeline) {
      if (st.tick != tick) continue;
      uint64_t id = chain.submit(st.tx);
      submitted[id] = {st.tx};
    }

    minivm::WorldState pre = chain.world();
    auto blk = chain.build_block();
    out.blocks++;

    // included transactions in block order, skipping our own rescues
    std::vector<chainsim::Tx> watched;
    uint64_t seen = uint64_t(-1);
    for (auto& rcpt : blk.receipts) {
      if (!rcpt.included || ours.count(rcpt.id)) continue;
      if (rcpt.id == seen) continue;  // one lookup per submission id
      seen = rcpt.id;
      for (auto& tx : submitted[rcpt.id]) watched.push_back(tx);
    }

    for (auto& ev : scan_block(pre, watched, s.book, cfg.drop_threshold_bps)) {
      auto po = run_opportunity(chain.world(), ev, cfg);
      po.report.opportunity_id = ++opportunity;
      if (!po.plan.txs.empty()) {
        uint64_t id = chain.submit_bundle(po.plan.txs, po.plan.gas_price);
        ours.insert(id);
        submitted[id] = po.plan.txs;
        out.rescue_bundles++;
      }
      out.reports.push_back(std::move(po.report));
    }
  }

  out.final_world = chain.world();
  out.whitehat_profit =
      runner::balance_delta(whitehat_start, out.final_world.balance_of(cfg.whitehat));
  return out;
}

// ---- serialization ----

// Canonical form excludes wall-clock numbers so identical runs serialize
// identically; pass include_timings for human-facing output.
inline nlohmann::json report_to_json(const RescueReport& r, bool include_timings = false) {
  nlohmann::json j;
  j["opportunity_id"] = r.opportunity_id;
  j["strategy"] = r.strategy;
  j["programs_generated"] = r.programs_generated;
  j["holes_before"] = r.holes_before;
  j["holes_after"] = r.holes_after;
  j["profit"] = r.profit.str();
  j["sender"] = to_hex(r.sender);
  j["txs_submitted"] = r.txs_submitted;
  j["submitted"] = r.submitted;
  j["stages"] = nlohmann::json::array();
  for (auto& st : r.stages) {
    nlohmann::json sj{{"stage", st.stage}, {"ok", st.ok}, {"note", st.note}, {"execs", st.execs}};
    if (include_timings) sj["millis"] = st.millis;
    j["stages"].push_back(std::move(sj));
  }
  return j;
}

inline nlohmann::json result_to_json(const ScenarioRunResult& r, bool include_timings = false) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["blocks"] = r.blocks;
  j["rescue_bundles"] = r.rescue_bundles;
  j["whitehat_profit"] = r.whitehat_profit.str();
  j["reports"] = nlohmann::json::array();
  for (auto& rep : r.reports) j["reports"].push_back(report_to_json(rep, include_timings));
  return j;
}

}  // namespace backrunner::pipeline

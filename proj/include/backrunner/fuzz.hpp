#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <mutex>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "runner.hpp"

namespace backrunner::fuzz {

// Fitness assigned to runs that do not complete; any completed run outranks it.
inline SignedWord revert_penalty() { return -(SignedWord(1) << 127); }

// Power schedule: fresh corpus entries get a small fixed budget, proven ones
// may spend up to a slowly growing cap tied to the pool size. An entry's
// factor is halved every time a full budget produces nothing new.
inline uint64_t schedule_energy(double entry_factor, size_t pool_size) {
  double cap = 100.0 * std::log2(double(std::max<size_t>(2, pool_size)));
  double e = std::min(32.0 * entry_factor, cap);
  return e < 1.0 ? 1 : uint64_t(e);
}

// Bounded FIFO of interesting words: comparison operands seen during runs,
// code immediates and storage values of the contracts involved.
class HintPool {
 public:
  explicit HintPool(size_t cap = 512) : cap_(cap) {}

  void add(const Word& w) {
    if (seen_.count(w)) return;
    seen_.insert(w);
    fifo_.push_back(w);
    if (fifo_.size() > cap_) {
      seen_.erase(fifo_.front());
      fifo_.pop_front();
    }
  }

  size_t size() const { return fifo_.size(); }
  bool empty() const { return fifo_.empty(); }
  bool contains(const Word& w) const { return seen_.count(w) != 0; }
  const Word& at(size_t i) const { return fifo_[i]; }

  void harvest_trace(const minivm::ExecTrace& t) {
    for (auto& c : t.comparisons) {
      add(c.lhs);
      add(c.rhs);
    }
  }

  void harvest_account(const minivm::WorldState& w, const Address& a) {
    const auto* acc = w.find(a);
    if (!acc) return;
    for (auto& [k, v] : acc->storage) add(v);
    const Bytes& code = acc->code;
    for (size_t i = 0; i < code.size();) {
      uint8_t op = code[i];
      if (minivm::is_push(op)) {
        size_t n = minivm::push_size(op);
        size_t avail = std::min(n, code.size() - i - 1);
        add(word_from_bytes(code.data() + i + 1, avail));
        i += 1 + n;
      } else {
        i += 1;
      }
    }
  }

 private:
  size_t cap_;
  std::deque<Word> fifo_;
  std::set<Word> seen_;
};

struct FuzzBudget {
  uint64_t max_execs = 20'000;
  uint64_t max_millis = 5'000;
};

struct FuzzConfig {
  uint64_t seed = 1;
  unsigned workers = 1;
  FuzzBudget budget;
  minivm::VmConfig vm;
};

struct CampaignResult {
  prog::ProgramWithHoles best;
  Address best_sender;
  SignedWord best_profit = revert_penalty();
  bool profitable = false;
  uint64_t execs = 0;
  size_t corpus_size = 0;
};

namespace detail {

inline Word type_mask(const funcx::ArgType& t) {
  unsigned w = t.width == 0 || t.width > 256 ? 256 : t.width;
  if (t.kind == funcx::ArgType::Kind::Address) w = 160;
  if (t.kind == funcx::ArgType::Kind::Bool) return 1;
  return w == 256 ? kWordMax : (Word(1) << w) - 1;
}

inline Word random_word(std::mt19937_64& rng) {
  Word w = 0;
  for (int i = 0; i < 4; ++i) w = (w << 64) | rng();
  return w;
}

// holes a campaign may touch: everything not already solved by a rule
inline std::vector<size_t> mutable_holes(const prog::ProgramWithHoles& p) {
  std::vector<size_t> out;
  for (size_t i = 0; i < p.holes.size(); ++i)
    if (p.holes[i].rule.kind == prog::RuleFill::Kind::None) out.push_back(i);
  return out;
}

inline void mutate(prog::ProgramWithHoles& p, std::mt19937_64& rng, const HintPool& hints) {
  auto targets = mutable_holes(p);

  // structural arm: duplicate one action of a reconstructed sequence, kept
  // rare and index-safe (appends shift nothing, prepends only pure calls)
  bool structural = p.provenance == prog::ProgramWithHoles::Provenance::Backrun &&
                    !p.actions.empty() && rng() % 16 == 0;
  if (structural) {
    size_t j = rng() % p.actions.size();
    const auto& src = p.actions[j];
    bool pure = true;
    for (auto& a : src.args)
      if (a.kind == prog::ArgValue::Kind::PriorReturn) pure = false;
    if (src.kind == prog::Action::Kind::Create) pure = false;
    if (pure && rng() % 2 == 0) {
      prog::Action copy = src;
      for (auto& a : copy.args) {
        // duplicated holes resolve to the same fill; keep indices shared
        (void)a;
      }
      p.actions.insert(p.actions.begin(), copy);
      for (auto& act : p.actions)
        for (auto& a : act.args)
          if (a.kind == prog::ArgValue::Kind::PriorReturn) a.src_action++;
      for (auto& h : p.holes)
        if (h.rule.kind != prog::RuleFill::Kind::None) h.rule.ref_action++;
      return;
    }
    if (pure) {
      p.actions.push_back(src);
      return;
    }
    // fall through to a value mutation
  }

  if (targets.empty()) return;
  size_t hi = targets[rng() % targets.size()];
  auto& h = p.holes[hi];
  Word mask = type_mask(h.type);
  Word cur = h.filled ? h.filled_word() : Word(0);
  Word next = cur;
  switch (rng() % 4) {
    case 0:  // fresh value bounded by the argument type
      next = random_word(rng) & mask;
      break;
    case 1:  // substitute a harvested hint
      if (!hints.empty()) next = hints.at(rng() % hints.size()) & mask;
      break;
    case 2: {  // havoc one byte inside the type width
      unsigned bytes = 1;
      for (Word m = mask; m > 0xff; m >>= 8) bytes++;
      unsigned pos = rng() % bytes;
      next = (cur ^ (Word(rng() & 0xff) << (8 * pos))) & mask;
      break;
    }
    default: {  // small arithmetic nudge
      Word delta = 1 + rng() % 16;
      next = (rng() % 2 ? cur + delta : cur - delta) & mask;
      break;
    }
  }
  h.fill_word(next, prog::Hole::Source::Fuzz);
}

struct Coverage {
  std::set<std::pair<uint64_t, uint64_t>> edges;
  std::set<std::pair<Address, Word>> write_keys;

  // true when the run contributed a new edge or a new written slot
  bool absorb(const std::vector<minivm::ExecTrace>& traces) {
    bool fresh = false;
    for (auto& t : traces) {
      for (auto& frame : t.pc_frames)
        for (size_t i = 1; i < frame.size(); ++i)
          fresh |= edges.insert({frame[i - 1], frame[i]}).second;
      for (auto& sw : t.storage_writes) fresh |= write_keys.insert({sw.addr, sw.key}).second;
    }
    return fresh;
  }
};

struct Entry {
  prog::ProgramWithHoles program;
  double factor = 1.0;
};

struct Shared {
  std::mutex mu;
  std::vector<Entry> corpus;
  Coverage cov;
  HintPool hints;
  CampaignResult result;
  std::atomic<uint64_t> execs{0};
  size_t cursor = 0;
};

struct Evaluation {
  SignedWord profit = 0;
  Address sender;
  std::vector<minivm::ExecTrace> traces;
};

inline Evaluation evaluate(const minivm::WorldState& world, const prog::ProgramWithHoles& p,
                           const minivm::VmConfig& vm, uint64_t& execs) {
  Evaluation ev;
  ev.profit = revert_penalty();
  std::vector<Address> senders = p.sender_candidates;
  if (senders.empty()) senders.push_back(prog::default_whitehat());
  for (auto& s : senders) {
    auto run = runner::run_program(world, p, s, vm);
    execs += std::max<uint64_t>(1, run.execs);
    for (auto& t : run.traces) ev.traces.push_back(t);
    if (run.ok && (ev.profit == revert_penalty() || run.base_profit > ev.profit)) {
      ev.profit = run.base_profit;
      ev.sender = s;
    }
  }
  if (ev.profit == revert_penalty() && !senders.empty()) ev.sender = senders.front();
  return ev;
}

}  // namespace detail

// Coverage- and profit-guided search over a program's open holes. Budget is
// both an execution-count cap (the determinism anchor for a single worker)
// and a wall-clock guard.
inline CampaignResult run_campaign(const minivm::WorldState& world,
                                   const prog::ProgramWithHoles& seed_program,
                                   const FuzzConfig& cfg = {}) {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + std::chrono::milliseconds(cfg.budget.max_millis);

  detail::Shared sh;
  sh.hints.harvest_account(world, seed_program.target);
  for (auto& a : seed_program.actions) sh.hints.harvest_account(world, a.target);
  for (auto& [addr, acc] : world.accounts) sh.hints.harvest_account(world, addr);

  // seed entry: the program as handed over, unfilled holes defaulting to zero
  {
    uint64_t execs = 0;
    auto ev = detail::evaluate(world, seed_program, cfg.vm, execs);
    sh.execs += execs;
    sh.cov.absorb(ev.traces);
    for (auto& t : ev.traces) sh.hints.harvest_trace(t);
    sh.corpus.push_back({seed_program, 1.0});
    sh.result.best = seed_program;
    sh.result.best_sender = ev.sender;
    sh.result.best_profit = ev.profit;
  }

  auto worker = [&](unsigned wid) {
    std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + wid);
    while (sh.execs.load() < cfg.budget.max_execs && clock::now() < deadline) {
      detail::Entry snapshot;
      size_t pool, picked;
      {
        std::lock_guard<std::mutex> lk(sh.mu);
        picked = sh.cursor++ % sh.corpus.size();
        snapshot = sh.corpus[picked];
        pool = sh.corpus.size();
      }
      uint64_t energy = schedule_energy(snapshot.factor, pool);
      bool productive = false;
      for (uint64_t i = 0; i < energy && sh.execs.load() < cfg.budget.max_execs; ++i) {
        auto candidate = snapshot.program;
        {
          std::lock_guard<std::mutex> lk(sh.mu);
          detail::mutate(candidate, rng, sh.hints);
        }
        uint64_t execs = 0;
        auto ev = detail::evaluate(world, candidate, cfg.vm, execs);
        sh.execs += execs;
        std::lock_guard<std::mutex> lk(sh.mu);
        for (auto& t : ev.traces) sh.hints.harvest_trace(t);
        bool new_cov = sh.cov.absorb(ev.traces);
        bool new_best = ev.profit != revert_penalty() && ev.profit > sh.result.best_profit;
        if (new_best || sh.result.best_profit == revert_penalty()) {
          if (ev.profit > sh.result.best_profit) {
            sh.result.best = candidate;
            sh.result.best_sender = ev.sender;
            sh.result.best_profit = ev.profit;
          }
        }
        if (new_cov || new_best) {
          sh.corpus.push_back({std::move(candidate), 1.0});
          productive = true;
        }
      }
      if (!productive) {
        std::lock_guard<std::mutex> lk(sh.mu);
        sh.corpus[picked].factor /= 2;
      }
    }
  };

  if (cfg.workers <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < cfg.workers; ++i) pool.emplace_back(worker, i);
    for (auto& t : pool) t.join();
  }

  sh.result.execs = sh.execs.load();
  sh.result.corpus_size = sh.corpus.size();
  sh.result.profitable = sh.result.best_profit != revert_penalty() && sh.result.best_profit > 0;
  return sh.result;
}

}  // namespace backrunner::fuzz

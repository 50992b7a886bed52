#pragma once

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "contracts.hpp"
#include "minivm.hpp"
#include "runner.hpp"

namespace backrunner::chainsim {

// ---- transactions, mempool, blocks ----

struct Tx {
  minivm::Message msg;
  Word gas_price = 0;
  bool is_private = false;  // private txs bypass the public mempool view
};

struct Receipt {
  uint64_t id = 0;
  bool included = false;
  minivm::Outcome outcome = minivm::Outcome::Revert;
  uint64_t gas_used = 0;
  Word fee = 0;
};

struct BlockResult {
  uint64_t number = 0;
  std::vector<Receipt> receipts;      // per submitted item, inclusion order first
  std::vector<uint64_t> dropped;      // ids rejected (reverts, unsettled debt, fees)
  Word burned = 0;
  Word tips = 0;
};

struct ChainConfig {
  Word burn_bps = 8000;  // share of fees destroyed, the rest tips the builder
  Address builder = make_address(0xB111De7);
  uint64_t seconds_per_block = 12;
  minivm::VmConfig vm;
};

// Single-builder chain: everything pending is ordered by gas price at each
// block boundary. Bundles are atomic: all of their transactions land in
// order, or none do; flashloan settlement is judged across the whole bundle.
class Chain {
 public:
  explicit Chain(minivm::WorldState genesis, ChainConfig cfg = {})
      : world_(std::move(genesis)), cfg_(cfg) {}

  uint64_t submit(Tx tx) {
    Item it;
    it.id = next_id_++;
    it.gas_price = tx.gas_price;
    it.is_private = tx.is_private;
    it.txs.push_back(std::move(tx));
    it.is_bundle = false;
    pool_.push_back(std::move(it));
    return pool_.back().id;
  }

  uint64_t submit_bundle(std::vector<Tx> txs, Word gas_price) {
    Item it;
    it.id = next_id_++;
    it.gas_price = gas_price;
    it.is_private = true;  // bundles ride the private lane
    it.txs = std::move(txs);
    it.is_bundle = true;
    pool_.push_back(std::move(it));
    return pool_.back().id;
  }

  // what a mempool observer sees: public singles only, submission order
  std::vector<const Tx*> visible_pending() const {
    std::vector<const Tx*> out;
    for (auto& it : pool_)
      if (!it.is_bundle && !it.is_private) out.push_back(&it.txs[0]);
    return out;
  }

  size_t pending_count() const { return pool_.size(); }

  BlockResult build_block() {
    BlockResult blk;
    world_.block_number++;
    world_.block_timestamp += cfg_.seconds_per_block;
    blk.number = world_.block_number;

    std::stable_sort(pool_.begin(), pool_.end(), [](const Item& a, const Item& b) {
      if (a.gas_price != b.gas_price) return a.gas_price > b.gas_price;
      return a.id < b.id;
    });

    for (auto& item : pool_) {
      minivm::WorldState scratch = world_;
      std::vector<Receipt> rs;
      Word total_fee = 0;
      bool ok = true;
      for (auto& tx : item.txs) {
        auto res = minivm::execute(scratch, tx.msg, {}, cfg_.vm);
        Receipt r;
        r.id = item.id;
        r.outcome = res.outcome;
        r.gas_used = res.trace.gas_used;
        r.fee = Word(res.trace.gas_used) * item.gas_price;
        total_fee += r.fee;
        rs.push_back(r);
        if (res.outcome != minivm::Outcome::Success) {
          ok = false;
          break;
        }
        scratch = std::move(res.world);
        if (!item.is_bundle && !runner::providers_settled(scratch)) {
          ok = false;
          break;
        }
      }
      if (ok && item.is_bundle && !runner::providers_settled(scratch)) ok = false;
      // fees come out of the first sender's post-execution balance
      const Address payer = item.txs.front().msg.caller;
      if (ok && scratch.balance_of(payer) < total_fee) ok = false;
      if (!ok) {
        blk.dropped.push_back(item.id);
        continue;
      }
      scratch.touch(payer).balance -= total_fee;
      Word burn = total_fee * cfg_.burn_bps / 10000;
      scratch.burned_fees += burn;
      scratch.touch(cfg_.builder).balance += total_fee - burn;
      blk.burned += burn;
      blk.tips += total_fee - burn;
      for (auto& r : rs) {
        r.included = true;
        blk.receipts.push_back(r);
      }
      world_ = std::move(scratch);
    }
    pool_.clear();
    return blk;
  }

  const minivm::WorldState& world() const { return world_; }
  minivm::WorldState& world() { return world_; }

 private:
  struct Item {
    uint64_t id = 0;
    Word gas_price = 0;
    bool is_private = false;
    bool is_bundle = false;
    std::vector<Tx> txs;
  };

  minivm::WorldState world_;
  ChainConfig cfg_;
  std::vector<Item> pool_;
  uint64_t next_id_ = 1;
};

// ---- portfolio valuation ----

// How token holdings are priced: a wrapped-base token converts one to one,
// everything else is marked at what one pool would pay for the whole balance.
struct PriceBook {
  Address wrapped;  // zero when the world has no wrapped base token
  struct Pool {
    Address token;
    Address lp;
    bool token_is_token0 = true;
  };
  std::vector<Pool> pools;
};

inline Word value_of(const minivm::WorldState& w, const Address& holder, const PriceBook& book) {
  Word v = w.balance_of(holder);
  if (!book.wrapped.is_zero()) v += contracts::token_balance(w, book.wrapped, holder);
  for (auto& p : book.pools) {
    Word bal = contracts::token_balance(w, p.token, holder);
    if (bal == 0) continue;
    auto q = contracts::quote_swap_out(w, p.lp, bal, /*out_is_token0=*/!p.token_is_token0);
    if (q) v += *q;
  }
  return v;
}

// ---- priority-fee auction over a rescue opportunity ----

struct Bot {
  Word cap = 0;              // highest price this bidder can still profit at
  bool uses_private = true;  // private bids never show in the mempool view
};

struct BidSimConfig {
  Word rescuable = 3'000'000;  // value of the opportunity, in gwei
  uint64_t gas_used = 40;
  Word floor_price = 10;
  Word burn_bps = 8000;
  std::vector<Bot> bots;  // empty: five bidders at 80% of breakeven, one at 100%

  Word breakeven() const { return rescuable / gas_used; }
  std::vector<Bot> effective_bots() const {
    if (!bots.empty()) return bots;
    std::vector<Bot> out(5, Bot{breakeven() * 8 / 10, false});
    out.push_back(Bot{breakeven(), true});
    return out;
  }
};

struct BidRecord {
  uint64_t time_ms = 0;
  size_t bot = 0;
  Word price = 0;
  bool visible = false;
};

struct BidResult {
  std::vector<BidRecord> log;
  size_t winner = size_t(-1);
  Word winner_price = 0;
  Word fee = 0;
  Word burned = 0;
  Word tip = 0;
  SignedWord winner_profit = 0;
  double rescued_fraction = 0;  // winner's net take as a share of the prize
};

// One bid per millisecond tick: the strongest bidder not currently leading
// raises by 5% (at least one unit) while that still clears its own cap. The
// auction ends when nobody can respond; the leader pays its final price.
inline BidResult simulate_bidding(const BidSimConfig& cfg) {
  BidResult res;
  auto bots = cfg.effective_bots();
  auto bump = [&](const Word& p) { return std::max(p + 1, p * 21 / 20); };

  size_t leader = size_t(-1);
  Word price = 0;
  for (uint64_t ms = 1;; ++ms) {
    size_t challenger = size_t(-1);
    Word next = leader == size_t(-1) ? cfg.floor_price : bump(price);
    for (size_t i = 0; i < bots.size(); ++i) {
      if (i == leader || bots[i].cap < next) continue;
      if (challenger == size_t(-1) || bots[i].cap > bots[challenger].cap) challenger = i;
    }
    if (challenger == size_t(-1)) break;
    leader = challenger;
    price = next;
    res.log.push_back({ms, challenger, price, !bots[challenger].uses_private});
  }

  if (leader != size_t(-1)) {
    res.winner = leader;
    res.winner_price = price;
    res.fee = price * cfg.gas_used;
    res.burned = res.fee * cfg.burn_bps / 10000;
    res.tip = res.fee - res.burned;
    res.winner_profit = runner::balance_delta(res.fee, cfg.rescuable);
    if (res.winner_profit > 0 && cfg.rescuable > 0)
      res.rescued_fraction = double(Word(res.winner_profit)) / double(cfg.rescuable);
  }
  return res;
}

inline std::string bid_log_csv(const BidResult& r) {
  std::ostringstream out;
  out << "time_ms,bot,gas_price\n";
  for (auto& b : r.log) out << b.time_ms << ',' << b.bot << ',' << b.price << '\n';
  return out.str();
}

// ---- world serialization ----

inline nlohmann::json world_to_json(const minivm::WorldState& w) {
  nlohmann::json j;
  j["block_number"] = w.block_number;
  j["timestamp"] = w.block_timestamp;
  j["burned_fees"] = to_hex(w.burned_fees);
  auto& accounts = j["accounts"] = nlohmann::json::object();
  for (auto& [addr, acc] : w.accounts) {
    nlohmann::json a;
    a["balance"] = to_hex(acc.balance);
    a["nonce"] = acc.nonce;
    a["code"] = to_hex(acc.code);
    auto& st = a["storage"] = nlohmann::json::object();
    for (auto& [k, v] : acc.storage) st[to_hex(k)] = to_hex(v);
    accounts[to_hex(addr)] = std::move(a);
  }
  return j;
}

inline std::optional<minivm::WorldState> world_from_json(const nlohmann::json& j) {
  minivm::WorldState w;
  auto word = [](const nlohmann::json& node, const char* key) -> std::optional<Word> {
    if (!node.contains(key)) return Word(0);
    return word_from_hex(node.at(key).get<std::string>());
  };
  try {
    w.block_number = j.value("block_number", uint64_t(0));
    w.block_timestamp = j.value("timestamp", uint64_t(0));
    auto burned = word(j, "burned_fees");
    if (!burned) return std::nullopt;
    w.burned_fees = *burned;
    if (j.contains("accounts")) {
      for (auto& [key, a] : j.at("accounts").items()) {
        auto addr = address_from_hex(key);
        if (!addr) return std::nullopt;
        auto& acc = w.touch(*addr);
        auto bal = word(a, "balance");
        auto code = from_hex(a.value("code", std::string("0x")));
        if (!bal || !code) return std::nullopt;
        acc.balance = *bal;
        acc.nonce = a.value("nonce", uint64_t(0));
        acc.code = std::move(*code);
        if (a.contains("storage")) {
          for (auto& [k, v] : a.at("storage").items()) {
            auto slot = word_from_hex(k);
            auto val = word_from_hex(v.get<std::string>());
            if (!slot || !val) return std::nullopt;
            acc.storage[*slot] = *val;
          }
        }
      }
    }
  } catch (const std::exception&) {
    return std::nullopt;
  }
  return w;
}

}  // namespace backrunner::chainsim

#include <catch_amalgamated.hpp>

#include "backrunner/chainsim.hpp"
#include "scenes.hpp"

using namespace backrunner;
using namespace backrunner::minivm;

namespace {

// fallback contract: slot0 = slot0 * 256 + first calldata byte lane, so the
// final storage value spells out inclusion order
Bytes recorder_code() {
  easm::Assembler a;
  a.push(0).op(CALLDATALOAD);
  a.push(0).op(SLOAD);
  a.push(256).op(MUL);
  a.op(ADD);
  a.push(0).op(SSTORE);
  a.op(STOP);
  return a.assemble();
}

Message raw_call(const Address& from, const Address& to, const Word& payload) {
  Message m;
  m.caller = from;
  m.origin = from;
  m.target = to;
  auto b = word_bytes(payload);
  m.calldata = Bytes(b.begin(), b.end());
  return m;
}

Message abi_call(const Address& from, const Address& to, uint32_t sel,
                 std::vector<Word> args = {}) {
  Message m;
  m.caller = from;
  m.origin = from;
  m.target = to;
  m.calldata = abi::make_calldata(sel, args);
  return m;
}

struct LoanWorld {
  WorldState w;
  Address token = make_address(0x7101);
  Address provider = make_address(0x7102);
  Address sender = make_address(0x7110);

  LoanWorld() {
    contracts::deploy_token(w, token);
    contracts::deploy_provider(w, provider, token, 0, 1000);
    w.touch(sender).balance = 1'000'000;
  }

  std::vector<chainsim::Tx> loan_bundle(bool with_repay) const {
    std::vector<chainsim::Tx> txs;
    txs.push_back({abi_call(sender, provider, abi::sel::kFlashloan,
                            {to_word(sender), to_word(token), 400}),
                   0, true});
    txs.push_back({abi_call(sender, token, abi::sel::kApprove, {to_word(provider), 400}), 0, true});
    if (with_repay)
      txs.push_back({abi_call(sender, provider, abi::sel::kRepay, {400}), 0, true});
    return txs;
  }
};

}  // namespace

TEST_CASE("blocks order transactions by gas price, ties by arrival") {
  WorldState w;
  Address rec = make_address(0x7201);
  Address s = make_address(0x7202);
  w.touch(rec).code = recorder_code();
  w.touch(s).balance = 1'000'000;

  chainsim::Chain chain(w);
  chain.submit({raw_call(s, rec, 1), 5, false});
  chain.submit({raw_call(s, rec, 2), 20, false});
  chain.submit({raw_call(s, rec, 3), 10, false});
  chain.submit({raw_call(s, rec, 4), 10, false});  // same price, later id

  auto blk = chain.build_block();
  REQUIRE(blk.receipts.size() == 4);
  REQUIRE(blk.dropped.empty());
  // 2 first (price 20), then 3 and 4 (price 10, arrival order), then 1
  REQUIRE(chain.world().storage_at(rec, 0) == Word(0x02030401));
}

TEST_CASE("a block advances number and timestamp") {
  chainsim::Chain chain(WorldState{});
  REQUIRE(chain.world().block_number == 0);
  auto b1 = chain.build_block();
  auto b2 = chain.build_block();
  REQUIRE(b1.number == 1);
  REQUIRE(b2.number == 2);
  REQUIRE(chain.world().block_timestamp == 24);
}

TEST_CASE("reverting transactions are dropped, not included") {
  WorldState w;
  Address dead = make_address(0x7301);
  Address s = make_address(0x7302);
  easm::Assembler a;
  a.revert();
  w.touch(dead).code = a.assemble();
  w.touch(s).balance = 1000;

  chainsim::Chain chain(w);
  auto id = chain.submit({raw_call(s, dead, 0), 10, false});
  auto blk = chain.build_block();
  REQUIRE(blk.receipts.empty());
  REQUIRE(blk.dropped == std::vector<uint64_t>{id});
  REQUIRE(chain.world().balance_of(s) == 1000);  // dropped txs pay nothing
}

TEST_CASE("unsettled flashloan debt drops a lone transaction") {
  LoanWorld lw;
  chainsim::Chain chain(lw.w);
  auto id = chain.submit({abi_call(lw.sender, lw.provider, abi::sel::kFlashloan,
                                   {to_word(lw.sender), to_word(lw.token), 400}),
                          10, false});
  auto blk = chain.build_block();
  REQUIRE(blk.dropped == std::vector<uint64_t>{id});
  REQUIRE(contracts::token_balance(chain.world(), lw.token, lw.provider) == 1000);
}

TEST_CASE("a bundle may carry debt across its transactions") {
  LoanWorld lw;
  chainsim::Chain chain(lw.w);
  chain.submit_bundle(lw.loan_bundle(true), 10);
  auto blk = chain.build_block();
  REQUIRE(blk.dropped.empty());
  REQUIRE(blk.receipts.size() == 3);
  REQUIRE(chain.world().storage_at(lw.provider, contracts::kProviderDebtSlot) == 0);
  REQUIRE(contracts::token_balance(chain.world(), lw.token, lw.provider) == 1000);
}

TEST_CASE("a bundle that never repays is dropped whole") {
  LoanWorld lw;
  chainsim::Chain chain(lw.w);
  auto id = chain.submit_bundle(lw.loan_bundle(false), 10);
  auto blk = chain.build_block();
  REQUIRE(blk.receipts.empty());
  REQUIRE(blk.dropped == std::vector<uint64_t>{id});
  // nothing from the partial execution leaked into the chain state
  REQUIRE(contracts::token_balance(chain.world(), lw.token, lw.provider) == 1000);
  REQUIRE(contracts::token_balance(chain.world(), lw.token, lw.sender) == 0);
  REQUIRE(chain.world().balance_of(lw.sender) == 1'000'000);
}

TEST_CASE("fees split 80/20 between burn and builder tip") {
  WorldState w;
  Address rec = make_address(0x7401);
  Address s = make_address(0x7402);
  w.touch(rec).code = recorder_code();
  w.touch(s).balance = 1'000'000;

  chainsim::ChainConfig cfg;
  chainsim::Chain chain(w, cfg);
  chain.submit({raw_call(s, rec, 7), 100, false});
  auto blk = chain.build_block();
  REQUIRE(blk.receipts.size() == 1);
  Word fee = blk.receipts[0].fee;
  REQUIRE(fee == Word(blk.receipts[0].gas_used) * 100);
  REQUIRE(fee > 0);
  REQUIRE(blk.burned == fee * 8000 / 10000);
  REQUIRE(blk.tips == fee - blk.burned);
  REQUIRE(chain.world().burned_fees == blk.burned);
  REQUIRE(chain.world().balance_of(cfg.builder) == blk.tips);
  REQUIRE(chain.world().balance_of(s) == Word(1'000'000) - fee);
}

TEST_CASE("a sender that cannot pay its fee is dropped") {
  WorldState w;
  Address rec = make_address(0x7501);
  Address s = make_address(0x7502);  // penniless
  w.touch(rec).code = recorder_code();

  chainsim::Chain chain(w);
  auto id = chain.submit({raw_call(s, rec, 1), 1'000'000, false});
  auto blk = chain.build_block();
  REQUIRE(blk.dropped == std::vector<uint64_t>{id});
  REQUIRE(chain.world().storage_at(rec, 0) == 0);
}

TEST_CASE("only public single transactions show in the mempool view") {
  LoanWorld lw;
  chainsim::Chain chain(lw.w);
  auto pub = raw_call(lw.sender, lw.token, 0);
  chain.submit({pub, 5, false});
  chain.submit({raw_call(lw.sender, lw.token, 1), 5, true});  // private single
  chain.submit_bundle(lw.loan_bundle(true), 5);
  REQUIRE(chain.pending_count() == 3);
  auto vis = chain.visible_pending();
  REQUIRE(vis.size() == 1);
  REQUIRE(vis[0]->msg.calldata == pub.calldata);
}

TEST_CASE("portfolio value marks token balances at their pool quote") {
  WorldState w;
  Address base = make_address(0x7601);   // wrapped base token
  Address tok = make_address(0x7602);
  Address lp = make_address(0x7603);
  Address holder = make_address(0x7604);
  contracts::deploy_token(w, base);
  contracts::deploy_token(w, tok);
  contracts::deploy_lp(w, lp, tok, base, 1000, 4000);  // tok is token0
  contracts::mint(w, base, holder, 70);
  contracts::mint(w, tok, holder, 250);
  w.touch(holder).balance = 12;

  chainsim::PriceBook book;
  book.wrapped = base;
  book.pools.push_back({tok, lp, /*token_is_token0=*/true});

  Word quote = *contracts::quote_swap_out(w, lp, 250, /*out_is_token0=*/false);
  REQUIRE(chainsim::value_of(w, holder, book) == Word(12) + 70 + quote);

  // an empty position contributes nothing and asks for no quote
  Address nobody = make_address(0x7605);
  REQUIRE(chainsim::value_of(w, nobody, book) == 0);
}

TEST_CASE("bid escalation: the deepest-pocketed bot wins near its cap") {
  chainsim::BidSimConfig cfg;  // 3,000,000 rescuable / 40 gas = 75,000 breakeven
  auto r = chainsim::simulate_bidding(cfg);

  REQUIRE(r.winner == 5);  // the one bot willing to go to breakeven
  REQUIRE(r.log.size() >= 150);
  REQUIRE(r.log.size() <= 250);
  // price escalates from 10 into the tens of thousands: the winner's last
  // bid sits within one 5% step of the 60,000 cap the rival crowd shares
  REQUIRE(r.winner_price >= 57'000);
  REQUIRE(r.winner_price <= 63'000);
  REQUIRE(r.winner_price * 21 / 20 > 60'000);
  REQUIRE(r.log.front().price == 10);

  // prices strictly escalate and the leader never outbids itself
  for (size_t i = 1; i < r.log.size(); ++i) {
    REQUIRE(r.log[i].price > r.log[i - 1].price);
    REQUIRE(r.log[i].bot != r.log[i - 1].bot);
  }
  REQUIRE(r.log.back().bot == 5);

  REQUIRE(r.fee == r.winner_price * 40);
  REQUIRE(r.burned == r.fee * 8000 / 10000);
  REQUIRE(r.tip == r.fee - r.burned);
  REQUIRE(r.winner_profit == SignedWord(Word(3'000'000) - r.fee));
  REQUIRE(r.winner_profit > 0);
  // the bidding war eats most of the prize; roughly a fifth survives
  REQUIRE(r.rescued_fraction > 0.15);
  REQUIRE(r.rescued_fraction < 0.30);
}

TEST_CASE("an uncontested bot pays the floor and keeps nearly everything") {
  chainsim::BidSimConfig cfg;
  cfg.bots = {{75'000, true}};
  auto r = chainsim::simulate_bidding(cfg);
  REQUIRE(r.log.size() == 1);
  REQUIRE(r.winner_price == 10);
  REQUIRE(r.rescued_fraction > 0.99);
}

TEST_CASE("rescued fraction never rises as the winning price climbs") {
  double prev = 2.0;
  for (Word floor : {Word(10), Word(100), Word(5'000), Word(30'000), Word(74'000)}) {
    chainsim::BidSimConfig cfg;
    cfg.floor_price = floor;
    cfg.bots = {{75'000, true}};  // alone, so the floor is the winning price
    auto r = chainsim::simulate_bidding(cfg);
    REQUIRE(r.rescued_fraction <= prev);
    prev = r.rescued_fraction;
  }
}

TEST_CASE("bid log exports as time_ms,bot,gas_price csv") {
  chainsim::BidSimConfig cfg;
  cfg.bots = {{55, false}, {200, true}};
  cfg.floor_price = 50;
  auto r = chainsim::simulate_bidding(cfg);
  // bot 1 opens at the floor, bot 0 stretches to 52, bot 1 closes at 54
  REQUIRE(r.winner == 1);
  REQUIRE(r.winner_price == 54);
  REQUIRE(r.log[1].visible);        // bot 0 bids in the open
  REQUIRE_FALSE(r.log[0].visible);  // bot 1 rides the private lane
  REQUIRE(chainsim::bid_log_csv(r) ==
          "time_ms,bot,gas_price\n"
          "1,1,50\n"
          "2,0,52\n"
          "3,1,54\n");
}

TEST_CASE("no bidder clears the floor: no winner, empty log") {
  chainsim::BidSimConfig cfg;
  cfg.bots = {{5, false}};
  auto r = chainsim::simulate_bidding(cfg);
  REQUIRE(r.log.empty());
  REQUIRE(r.winner == size_t(-1));
  REQUIRE(r.fee == 0);
}

TEST_CASE("world state round-trips through json") {
  scenes::BountyScene s;
  s.w.block_number = 41;
  s.w.block_timestamp = 1234;
  s.w.burned_fees = 999;
  s.w.touch(s.attacker).nonce = 3;

  auto j = chainsim::world_to_json(s.w);
  auto back = chainsim::world_from_json(j);
  REQUIRE(back.has_value());
  REQUIRE(back->block_number == 41);
  REQUIRE(back->block_timestamp == 1234);
  REQUIRE(back->burned_fees == 999);
  REQUIRE(back->accounts.size() == s.w.accounts.size());
  for (auto& [addr, acc] : s.w.accounts) {
    const auto* got = back->find(addr);
    REQUIRE(got != nullptr);
    REQUIRE(got->balance == acc.balance);
    REQUIRE(got->nonce == acc.nonce);
    REQUIRE(got->code == acc.code);
    REQUIRE(got->storage == acc.storage);
  }
  // and the serialized form is stable
  REQUIRE(chainsim::world_to_json(*back) == j);
}

TEST_CASE("malformed world json is rejected") {
  nlohmann::json j;
  j["accounts"]["not-an-address"]["balance"] = "0x1";
  REQUIRE_FALSE(chainsim::world_from_json(j).has_value());

  nlohmann::json j2;
  j2["accounts"][to_hex(make_address(1))]["balance"] = "0xzz";
  REQUIRE_FALSE(chainsim::world_from_json(j2).has_value());
}

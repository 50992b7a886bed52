#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "abi.hpp"
#include "funcx.hpp"
#include "minivm.hpp"
#include "words.hpp"

namespace backrunner::traits {

enum class Relation { LP_OF, TOKEN0_OF, TOKEN1_OF, APPROVAL, OWNER_OF };
using RelationSet = std::set<Relation>;

enum class TraitMode { Codehash, Selectors };

struct TraitRecord {
  Address address;
  Word codehash;
  std::set<uint32_t> selectors;
  bool is_token = false;
  bool is_lp = false;
};

inline TraitRecord compute_traits(const minivm::WorldState& world, const Address& addr) {
  TraitRecord rec;
  rec.address = addr;
  const auto* acc = world.find(addr);
  const Bytes empty;
  const Bytes& code = acc ? acc->code : empty;
  rec.codehash = hash256(code);
  for (auto& f : funcx::extract_funcs(code))
    if (!f.is_fallback) rec.selectors.insert(f.selector);
  rec.is_token = rec.selectors.count(abi::sel::kTransfer) && rec.selectors.count(abi::sel::kBalanceOf);
  rec.is_lp = rec.selectors.count(abi::sel::kSwap) && rec.selectors.count(abi::sel::kGetReserves);
  return rec;
}

namespace detail {

inline Word selector_key(const std::set<uint32_t>& selectors) {
  Bytes buf;
  for (auto s : selectors) abi::append_selector(buf, s);
  return hash256(buf);
}

// static view call returning one word, zero on failure. Trait probes are
// self-contained views (the callee only reads its own storage), so the call
// runs against a one-account copy of the world; this keeps index builds and
// pairwise relation scans linear in the callee, not in the world.
inline std::optional<Word> static_call_word(const minivm::WorldState& world, const Address& target,
                                            const Bytes& calldata) {
  minivm::WorldState pruned;
  if (const auto* acc = world.find(target)) pruned.accounts[target] = *acc;
  minivm::Message msg;
  msg.caller = make_address(0x57A7);
  msg.origin = msg.caller;
  msg.target = target;
  msg.calldata = calldata;
  auto r = minivm::execute(pruned, msg);
  if (r.outcome != minivm::Outcome::Success || r.trace.return_data.size() < 32) return std::nullopt;
  return word_from_bytes(r.trace.return_data.data(), 32);
}

}  // namespace detail

// Built once over a world, then immutable; concurrent reads are safe.
class SimilarityIndex {
 public:
  static SimilarityIndex build(const minivm::WorldState& world) {
    SimilarityIndex idx;
    for (auto& [addr, acc] : world.accounts) {
      auto rec = compute_traits(world, addr);
      idx.records_[addr] = rec;
      idx.by_codehash_[rec.codehash].push_back(addr);
      idx.by_selectors_[detail::selector_key(rec.selectors)].push_back(addr);
    }
    return idx;
  }

  std::vector<Address> query_similar(const Address& addr, TraitMode mode) const {
    auto it = records_.find(addr);
    if (it == records_.end()) return {addr};
    if (mode == TraitMode::Codehash) {
      auto bucket = by_codehash_.find(it->second.codehash);
      return bucket->second;
    }
    auto bucket = by_selectors_.find(detail::selector_key(it->second.selectors));
    return bucket->second;
  }

  const TraitRecord* find(const Address& addr) const {
    auto it = records_.find(addr);
    return it == records_.end() ? nullptr : &it->second;
  }

  std::vector<Address> token_addresses() const {
    std::vector<Address> out;
    for (auto& [addr, rec] : records_)
      if (rec.is_token) out.push_back(addr);
    return out;
  }

  size_t size() const { return records_.size(); }

  // Single-file snapshot: versioned header plus length-prefixed records in
  // address order. Full rewrite on save.
  bool save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return false;
    auto put_u32 = [&](uint32_t v) {
      for (int i = 3; i >= 0; --i) out.put(char(v >> (8 * i)));
    };
    out.write("BRTI", 4);
    put_u32(1);  // version
    put_u32(uint32_t(records_.size()));
    for (auto& [addr, rec] : records_) {
      out.write(reinterpret_cast<const char*>(addr.bytes.data()), 20);
      auto ch = word_bytes(rec.codehash);
      out.write(reinterpret_cast<const char*>(ch.data()), 32);
      out.put(char((rec.is_token ? 1 : 0) | (rec.is_lp ? 2 : 0)));
      put_u32(uint32_t(rec.selectors.size()));
      for (auto s : rec.selectors) put_u32(s);
    }
    return bool(out);
  }

  static std::optional<SimilarityIndex> load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "BRTI") return std::nullopt;
    auto get_u32 = [&]() {
      uint32_t v = 0;
      for (int i = 0; i < 4; ++i) v = (v << 8) | uint8_t(in.get());
      return v;
    };
    if (get_u32() != 1) return std::nullopt;
    uint32_t count = get_u32();
    SimilarityIndex idx;
    for (uint32_t i = 0; i < count && in; ++i) {
      TraitRecord rec;
      in.read(reinterpret_cast<char*>(rec.address.bytes.data()), 20);
      uint8_t ch[32];
      in.read(reinterpret_cast<char*>(ch), 32);
      rec.codehash = word_from_bytes(ch, 32);
      uint8_t flags = uint8_t(in.get());
      rec.is_token = flags & 1;
      rec.is_lp = flags & 2;
      uint32_t nsel = get_u32();
      for (uint32_t k = 0; k < nsel; ++k) rec.selectors.insert(get_u32());
      idx.records_[rec.address] = rec;
      idx.by_codehash_[rec.codehash].push_back(rec.address);
      idx.by_selectors_[detail::selector_key(rec.selectors)].push_back(rec.address);
    }
    if (!in) return std::nullopt;
    return idx;
  }

 private:
  std::map<Address, TraitRecord> records_;
  std::map<Word, std::vector<Address>> by_codehash_;
  std::map<Word, std::vector<Address>> by_selectors_;
};

// Directional relation rules r(a, b). The catalog is closed: liquidity-pool
// pairing (by the pool's token0/token1 storage slots 0 and 1), token
// approvals (live allowance view call on indexed tokens) and ownership (owner
// view call when the contract exposes one).
// Everything but APPROVAL: pool pairing from storage plus the owner view.
// Cheap relative to the approval scan, so callers filtering many candidate
// pairs can test this part first and only pay for `approves` on survivors.
inline RelationSet relation_static(const minivm::WorldState& world, const Address& a,
                                   const Address& b, const SimilarityIndex* index = nullptr) {
  RelationSet rel;
  auto a_rec = index && index->find(a) ? *index->find(a) : compute_traits(world, a);

  if (a_rec.is_lp) {
    if (to_address(world.storage_at(a, 0)) == b) {
      rel.insert(Relation::LP_OF);
      rel.insert(Relation::TOKEN0_OF);
    }
    if (to_address(world.storage_at(a, 1)) == b) {
      rel.insert(Relation::LP_OF);
      rel.insert(Relation::TOKEN1_OF);
    }
  }

  if (a_rec.selectors.count(abi::sel::kOwner)) {
    auto v = detail::static_call_word(world, a, abi::make_calldata(abi::sel::kOwner));
    if (v && to_address(*v) == b && !b.is_zero()) rel.insert(Relation::OWNER_OF);
  }
  return rel;
}

// APPROVAL in r(owner, spender): any indexed token reports allowance > 0
inline bool approves(const minivm::WorldState& world, const Address& a, const Address& b,
                     const SimilarityIndex* index = nullptr) {
  std::vector<Address> tokens;
  if (index) {
    tokens = index->token_addresses();
  } else {
    for (auto& [addr, acc] : world.accounts)
      if (compute_traits(world, addr).is_token) tokens.push_back(addr);
  }
  for (auto& token : tokens) {
    auto v = detail::static_call_word(
        world, token, abi::make_calldata(abi::sel::kAllowance, {to_word(a), to_word(b)}));
    if (v && *v > 0) return true;
  }
  return false;
}

inline RelationSet relation(const minivm::WorldState& world, const Address& a, const Address& b,
                            const SimilarityIndex* index = nullptr) {
  RelationSet rel = relation_static(world, a, b, index);
  if (approves(world, a, b, index)) rel.insert(Relation::APPROVAL);
  return rel;
}

}  // namespace backrunner::traits

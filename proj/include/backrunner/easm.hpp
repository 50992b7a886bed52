#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "minivm.hpp"
#include "words.hpp"

namespace backrunner::easm {

// Two-pass assembler for the interpreter's opcode subset. Labels assemble as
// PUSH2 immediates so offsets stay stable between passes.
class Assembler {
 public:
  Assembler& op(uint8_t opcode) {
    items_.push_back({Kind::Op, opcode, 0, 0, {}});
    return *this;
  }

  Assembler& op(const std::string& mnemonic) { return op(byte_for(mnemonic)); }

  // PUSH with the smallest width that fits, or an explicit width in bytes.
  Assembler& push(const Word& value, int width = -1) {
    int w = width;
    if (w < 0) {
      w = 1;
      Word v = value >> 8;
      while (v != 0) {
        v >>= 8;
        w++;
      }
    }
    if (w < 1 || w > 32) throw std::invalid_argument("push width");
    items_.push_back({Kind::Push, uint8_t(minivm::PUSH1 + w - 1), value, 0, {}});
    return *this;
  }

  Assembler& push_addr(const Address& a) { return push(to_word(a), 20); }

  Assembler& push_label(const std::string& name) {
    items_.push_back({Kind::PushLabel, uint8_t(minivm::PUSH1 + 1), 0, 0, name});
    return *this;
  }

  Assembler& label(const std::string& name) {
    items_.push_back({Kind::Label, minivm::JUMPDEST, 0, 0, name});
    return *this;
  }

  Assembler& raw(const Bytes& bytes) {
    items_.push_back({Kind::Raw, 0, 0, 0, {}, bytes});
    return *this;
  }

  // Standard selector dispatcher prologue. Falls through past the arms when
  // nothing matches; follow with either a fallback body or revert().
  Assembler& dispatcher(const std::vector<std::pair<uint32_t, std::string>>& arms) {
    push(0).op(minivm::CALLDATALOAD).push(224).op(minivm::SHR);
    for (auto& [selector, target] : arms)
      op(minivm::DUP1).push(Word(selector), 4).op(minivm::EQ).jumpi(target);
    op(minivm::POP);
    return *this;
  }

  // load flat calldata argument k onto the stack
  Assembler& load_arg(size_t k) { return push(4 + 32 * k).op(minivm::CALLDATALOAD); }

  // jump / jumpi to a label
  Assembler& jump(const std::string& name) { return push_label(name).op(minivm::JUMP); }
  Assembler& jumpi(const std::string& name) { return push_label(name).op(minivm::JUMPI); }

  // revert with empty data
  Assembler& revert() { return push(0).push(0).op(minivm::REVERT); }

  // mstore value at a fixed memory offset
  Assembler& mstore_at(uint64_t offset, const Word& value) {
    return push(value).push(offset).op(minivm::MSTORE);
  }

  // return one word from memory offset 0
  Assembler& return_word() { return push(32).push(0).op(minivm::RETURN); }

  size_t size() const {
    size_t n = 0;
    for (auto& it : items_) n += item_size(it);
    return n;
  }

  Bytes assemble() const {
    std::map<std::string, uint64_t> offsets;
    uint64_t pc = 0;
    for (auto& it : items_) {
      if (it.kind == Kind::Label) {
        if (offsets.count(it.name)) throw std::invalid_argument("duplicate label " + it.name);
        offsets[it.name] = pc;
      }
      pc += item_size(it);
    }
    Bytes out;
    out.reserve(pc);
    for (auto& it : items_) {
      switch (it.kind) {
        case Kind::Op:
          out.push_back(it.opcode);
          break;
        case Kind::Label:
          out.push_back(minivm::JUMPDEST);
          break;
        case Kind::Push: {
          out.push_back(it.opcode);
          size_t w = minivm::push_size(it.opcode);
          auto wb = word_bytes(it.value);
          out.insert(out.end(), wb.end() - ptrdiff_t(w), wb.end());
          break;
        }
        case Kind::PushLabel: {
          auto found = offsets.find(it.name);
          if (found == offsets.end()) throw std::invalid_argument("unknown label " + it.name);
          out.push_back(uint8_t(minivm::PUSH1 + 1));
          out.push_back(uint8_t(found->second >> 8));
          out.push_back(uint8_t(found->second & 0xff));
          break;
        }
        case Kind::Raw:
          out.insert(out.end(), it.bytes.begin(), it.bytes.end());
          break;
      }
    }
    return out;
  }

  static uint8_t byte_for(const std::string& mnemonic) {
    for (auto& [name, b] : minivm::supported_opcodes())
      if (name == mnemonic) return b;
    throw std::invalid_argument("unknown mnemonic " + mnemonic);
  }

 private:
  enum class Kind { Op, Push, PushLabel, Label, Raw };
  struct Item {
    Kind kind;
    uint8_t opcode;
    Word value;
    uint64_t pad;
    std::string name;
    Bytes bytes;
  };

  static size_t item_size(const Item& it) {
    switch (it.kind) {
      case Kind::Op:
      case Kind::Label:
        return 1;
      case Kind::Push:
        return 1 + minivm::push_size(it.opcode);
      case Kind::PushLabel:
        return 3;
      case Kind::Raw:
        return it.bytes.size();
    }
    return 0;
  }

  std::vector<Item> items_;
};

}  // namespace backrunner::easm

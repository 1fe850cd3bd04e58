#include "excall/state.hpp"

#include "excall/codec.hpp"
#include "excall/crypto.hpp"

namespace excall {

Word WorldState::get_storage(const Address& contract, const Word& key) const {
    auto c = storage_.find(contract);
    if (c == storage_.end()) return Word{};
    auto k = c->second.find(key);
    if (k == c->second.end()) return Word{};
    return k->second;
}

void WorldState::set_storage(const Address& contract, const Word& key,
                             const Word& value) {
    if (word_is_zero(value)) {
        auto c = storage_.find(contract);
        if (c != storage_.end()) {
            c->second.erase(key);
            if (c->second.empty()) storage_.erase(c);
        }
        return;
    }
    storage_[contract][key] = value;
}

uint64_t WorldState::account_nonce(const Address& sender) const {
    auto it = nonces_.find(sender);
    return it == nonces_.end() ? 0 : it->second;
}

void WorldState::set_account_nonce(const Address& sender, uint64_t nonce) {
    nonces_[sender] = nonce;
}

const ContractProgram* WorldState::program(const Address& contract) const {
    auto it = programs_.find(contract);
    return it == programs_.end() ? nullptr : &it->second;
}

void WorldState::deploy(const Address& contract, ContractProgram program) {
    programs_[contract] = std::move(program);
}

Digest WorldState::state_root() const {
    // std::map iteration gives the canonical sorted order.
    Encoder e;
    e.u32(static_cast<uint32_t>(storage_.size()));
    for (const auto& [addr, slots] : storage_) {
        e.raw(addr);
        e.u32(static_cast<uint32_t>(slots.size()));
        for (const auto& [k, v] : slots) {
            e.raw(k);
            e.raw(v);
        }
    }
    e.u32(static_cast<uint32_t>(nonces_.size()));
    for (const auto& [addr, n] : nonces_) {
        e.raw(addr);
        e.u64(n);
    }
    e.u32(static_cast<uint32_t>(programs_.size()));
    for (const auto& [addr, p] : programs_) {
        e.raw(addr);
        encode_into(e, p);
    }
    return crypto::hash_bytes(e.bytes());
}

Address contract_address(const Address& sender, uint64_t account_nonce) {
    Encoder e;
    e.raw(sender);
    e.u64(account_nonce);
    Digest d = crypto::hash_bytes(e.bytes());
    Address a;
    std::memcpy(a.data(), d.data(), 20);
    return a;
}

}  // namespace excall

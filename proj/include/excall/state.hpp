#pragma once

#include "excall/types.hpp"
#include "excall/vm.hpp"

namespace excall {

// Full replicated state: contract storage, account nonces, deployed code.
class WorldState {
public:
    Word get_storage(const Address& contract, const Word& key) const;
    void set_storage(const Address& contract, const Word& key,
                     const Word& value);

    uint64_t account_nonce(const Address& sender) const;
    void set_account_nonce(const Address& sender, uint64_t nonce);

    const ContractProgram* program(const Address& contract) const;
    void deploy(const Address& contract, ContractProgram program);

    Digest state_root() const;

    // Integer read of a storage word (low 8 bytes), for queries.
    uint64_t storage_u64(const Address& contract, const Word& key) const {
        return word_to_u64(get_storage(contract, key));
    }

private:
    std::map<Address, std::map<Word, Word>> storage_;
    std::map<Address, uint64_t> nonces_;
    std::map<Address, ContractProgram> programs_;
};

// vm::Storage view over one contract's slice of a WorldState.
class ContractStorage final : public vm::Storage {
public:
    ContractStorage(WorldState& ws, const Address& contract)
        : ws_(ws), contract_(contract) {}
    Word get(const Word& key) const override {
        return ws_.get_storage(contract_, key);
    }
    void set(const Word& key, const Word& value) override {
        ws_.set_storage(contract_, key, value);
    }

private:
    WorldState& ws_;
    Address contract_;
};

Address contract_address(const Address& sender, uint64_t account_nonce);

}  // namespace excall

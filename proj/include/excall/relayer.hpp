#pragma once

#include "excall/chain.hpp"
#include "excall/oracle.hpp"

namespace excall::oracle {

// The standard-oracle baseline: watches BetPlaced events and answers each
// with a continueBetOracle callback transaction in a later block.
class Relayer {
public:
    struct Options {
        Address contract{};
        // Outcome source: local seeded stream, or the oracle service URL.
        std::optional<std::string> service_url;
        double win_probability = 0.5;
        uint64_t rng_seed = 1;
        std::string cursor_path;  // empty = no persistence
    };

    Relayer(Node& node, crypto::KeyPair keypair, Options options);

    // Scans newly applied blocks and submits one callback per event.
    // Returns the number of callbacks submitted.
    size_t poll();

    Address address() const { return address_; }
    uint64_t answered() const { return answered_; }
    // Digests of submitted callback txs, keyed by (punter, oracle ref).
    const std::map<std::pair<Address, uint64_t>, Digest>& callbacks() const {
        return callbacks_;
    }
    uint64_t cursor() const { return cursor_; }
    uint64_t local_draws() const { return stream_.draws(); }
    uint64_t local_wins() const { return stream_.wins(); }

private:
    bool outcome_for(uint64_t ref);
    void persist_cursor() const;
    void load_cursor();

    Node& node_;
    crypto::KeyPair keypair_;
    Address address_{};
    Options opt_;
    uint64_t cursor_ = 1;  // next block number to scan
    uint64_t account_nonce_ = 0;
    uint64_t answered_ = 0;
    OutcomeStream stream_;
    std::map<std::pair<Address, uint64_t>, Digest> callbacks_;
};

}  // namespace excall::oracle

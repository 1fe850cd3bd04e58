#pragma once

#include <mutex>

#include "excall/codec.hpp"
#include "excall/crypto.hpp"
#include "excall/state.hpp"
#include "excall/vm.hpp"

namespace excall {

struct ChainConfig {
    uint64_t block_period_ms = 500;
    std::vector<PublicKey> sealers;  // round-robin by block number
    // URI prefix -> trusted oracle key; longest matching prefix wins.
    std::map<std::string, PublicKey> pinned_oracle_keys;
    uint64_t step_limit = 100000;
    uint32_t max_excalls_per_tx = 8;
    uint64_t excall_timeout_ms = 2000;
    uint32_t max_txs_per_block = 256;

    std::vector<Address> sealer_addresses() const;
    Digest config_digest() const;
    const PublicKey* pinned_key_for(const std::string& uri) const;
};

enum class RejectReason {
    StaleNonce,
    DuplicateNonce,
    InvalidAttachedCall,
    BadParent,
    BadNumber,
    BadTimestamp,
    WrongSealerTurn,
    BadSeal,
    TxRootMismatch,
    IntentRootMismatch,
    MalformedExtension,
    DuplicateExtensionEntry,
    NonceMismatch,
    UnknownOraclePublicKey,
    InvalidTupleSignature,
    UriMismatch,
    ExtraExtensionEntry,
    StateRootMismatch,
};

const char* to_string(RejectReason r);

struct Rejection {
    RejectReason reason;
    std::string detail;
};

class Mempool {
public:
    std::optional<Rejection> submit(const Transaction& tx,
                                    uint64_t state_nonce);
    // Removes and returns up to max_txs dispatchable transactions:
    // consecutive nonces starting at each sender's current state nonce,
    // senders served in first-arrival order.
    std::vector<Transaction> take_ready(const WorldState& ws,
                                        uint32_t max_txs);
    size_t size() const;

private:
    mutable std::mutex mu_;
    std::map<Address, std::map<uint64_t, Transaction>> queues_;
    std::vector<Address> arrival_order_;
};

enum class NodeRole { SEALER, VERIFIER };

// One proof-of-authority node: state, mempool, block pipeline, log.
class Node {
public:
    Node(ChainConfig config, NodeRole role,
         std::optional<crypto::KeyPair> sealer_key = std::nullopt,
         vm::ExcallPort* port = nullptr);

    static Block make_genesis(const ChainConfig& config);

    // --- sealer pipeline ---
    std::optional<Rejection> submit_tx(const Transaction& tx);
    Block build_block(uint64_t now_ms);   // unsealed, with intentions fixed
    void finalize_excalls(Block& block);  // performs calls, sets state_root
    void seal_block(Block& block) const;
    static bool verify_seal(const Block& block, const ChainConfig& config);
    // Runs the whole pipeline when a slot is due and it is our turn.
    std::optional<Block> produce(uint64_t now_ms);

    // --- verifier path ---
    std::optional<Rejection> verify_block(const Block& block) const;
    void apply_block(const Block& block);  // caller verified first
    std::optional<Rejection> receive(const Block& block);

    // --- queries ---
    const BlockHeader& head() const { return head_; }
    Digest head_digest() const { return head_digest_; }
    uint64_t height() const { return head_.number; }
    std::optional<std::pair<uint64_t, Receipt>> receipt(
        const Digest& tx_digest) const;
    std::vector<std::pair<uint64_t, EventLog>> events_by_topic(
        const Word& topic, uint64_t from_block) const;
    Word storage_word(const Address& contract, const Word& key) const;
    uint64_t storage_u64(const Address& contract, const Word& key) const;
    const WorldState& state() const { return state_; }
    const ChainConfig& config() const { return config_; }
    vm::ExcallPort* port() const { return port_; }
    Address sealer_address() const;
    size_t mempool_size() const { return mempool_.size(); }

    // --- block log ---
    void set_log_path(const std::string& path);  // append-only
    static std::vector<Block> read_log(const std::string& path);
    // Verifies and applies every block of a log in order.
    std::optional<Rejection> replay(const std::vector<Block>& blocks);

private:
    struct TxOutcome {
        Receipt receipt;
        std::vector<VerifiableExternalCall> performed;
        uint32_t consumed = 0;
        std::vector<std::string> intended;  // DRY_RUN discovery
    };

    TxOutcome run_tx(WorldState& ws, const Transaction& tx, uint32_t tx_index,
                     const Digest& intent_hash, vm::ExecMode mode,
                     const std::vector<VerifiableExternalCall>& recorded,
                     const vm::BlockEnv& env) const;

    std::vector<Intention> discover_intentions(
        const WorldState& parent_state, const std::vector<Transaction>& txs,
        uint64_t number, uint64_t timestamp) const;

    void append_log(const Block& block) const;

    ChainConfig config_;
    NodeRole role_;
    std::optional<crypto::KeyPair> sealer_key_;
    vm::ExcallPort* port_ = nullptr;

    WorldState state_;
    BlockHeader head_;
    Digest head_digest_{};
    Mempool mempool_;

    std::map<Digest, std::pair<uint64_t, Receipt>> receipts_;
    std::vector<std::pair<uint64_t, EventLog>> events_;

    // Receipts computed during finalization, reused when the sealer
    // applies its own block (FINALIZE and VERIFY statuses can differ for
    // no-response calls).
    Digest pending_digest_{};
    std::vector<Receipt> pending_receipts_;

    std::string log_path_;
    mutable std::mutex mu_;
};

// Builders for common transactions.
Transaction make_deploy_tx(const Address& sender, uint64_t account_nonce,
                           const ContractProgram& program,
                           const Bytes& init_args = {});
Transaction make_call_tx(const Address& sender, uint64_t account_nonce,
                         const Address& target, std::string_view function,
                         const std::vector<Word>& args = {});

}  // namespace excall

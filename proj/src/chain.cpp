#include "excall/chain.hpp"

#include <algorithm>
#include <fstream>

namespace excall {

const char* to_string(RejectReason r) {
    switch (r) {
        case RejectReason::StaleNonce: return "StaleNonce";
        case RejectReason::DuplicateNonce: return "DuplicateNonce";
        case RejectReason::InvalidAttachedCall: return "InvalidAttachedCall";
        case RejectReason::BadParent: return "BadParent";
        case RejectReason::BadNumber: return "BadNumber";
        case RejectReason::BadTimestamp: return "BadTimestamp";
        case RejectReason::WrongSealerTurn: return "WrongSealerTurn";
        case RejectReason::BadSeal: return "BadSeal";
        case RejectReason::TxRootMismatch: return "TxRootMismatch";
        case RejectReason::IntentRootMismatch: return "IntentRootMismatch";
        case RejectReason::MalformedExtension: return "MalformedExtension";
        case RejectReason::DuplicateExtensionEntry:
            return "DuplicateExtensionEntry";
        case RejectReason::NonceMismatch: return "NonceMismatch";
        case RejectReason::UnknownOraclePublicKey:
            return "UnknownOraclePublicKey";
        case RejectReason::InvalidTupleSignature:
            return "InvalidTupleSignature";
        case RejectReason::UriMismatch: return "UriMismatch";
        case RejectReason::ExtraExtensionEntry: return "ExtraExtensionEntry";
        case RejectReason::StateRootMismatch: return "StateRootMismatch";
    }
    return "?";
}

std::vector<Address> ChainConfig::sealer_addresses() const {
    std::vector<Address> out;
    out.reserve(sealers.size());
    for (const auto& pk : sealers) out.push_back(crypto::address_of(pk));
    return out;
}

Digest ChainConfig::config_digest() const {
    Encoder e;
    e.u64(block_period_ms);
    e.u32(static_cast<uint32_t>(sealers.size()));
    for (const auto& pk : sealers) e.raw(pk);
    e.u32(static_cast<uint32_t>(pinned_oracle_keys.size()));
    for (const auto& [prefix, pk] : pinned_oracle_keys) {
        e.str(prefix);
        e.raw(pk);
    }
    e.u64(step_limit);
    e.u32(max_excalls_per_tx);
    return crypto::hash_bytes(e.bytes());
}

const PublicKey* ChainConfig::pinned_key_for(const std::string& uri) const {
    const PublicKey* best = nullptr;
    size_t best_len = 0;
    for (const auto& [prefix, pk] : pinned_oracle_keys) {
        if (uri.rfind(prefix, 0) == 0 && prefix.size() >= best_len) {
            best = &pk;
            best_len = prefix.size();
        }
    }
    return best;
}

std::optional<Rejection> Mempool::submit(const Transaction& tx,
                                         uint64_t state_nonce) {
    std::scoped_lock lk(mu_);
    if (tx.account_nonce < state_nonce)
        return Rejection{RejectReason::StaleNonce, "nonce already used"};
    auto& q = queues_[tx.sender];
    if (q.count(tx.account_nonce))
        return Rejection{RejectReason::DuplicateNonce,
                         "nonce already pending"};
    if (q.empty() &&
        std::find(arrival_order_.begin(), arrival_order_.end(), tx.sender) ==
            arrival_order_.end())
        arrival_order_.push_back(tx.sender);
    q[tx.account_nonce] = tx;
    return std::nullopt;
}

std::vector<Transaction> Mempool::take_ready(const WorldState& ws,
                                             uint32_t max_txs) {
    std::scoped_lock lk(mu_);
    std::vector<Transaction> out;
    for (auto sit = arrival_order_.begin();
         sit != arrival_order_.end() && out.size() < max_txs;) {
        auto& q = queues_[*sit];
        uint64_t expected = ws.account_nonce(*sit);
        while (out.size() < max_txs) {
            auto it = q.find(expected);
            if (it == q.end()) break;
            out.push_back(std::move(it->second));
            q.erase(it);
            ++expected;
        }
        if (q.empty()) {
            queues_.erase(*sit);
            sit = arrival_order_.erase(sit);
        } else {
            ++sit;
        }
    }
    return out;
}

size_t Mempool::size() const {
    std::scoped_lock lk(mu_);
    size_t n = 0;
    for (const auto& [a, q] : queues_) n += q.size();
    return n;
}

Block Node::make_genesis(const ChainConfig& config) {
    Block g;
    g.header.number = 0;
    g.header.timestamp = 0;
    g.header.tx_root = tx_root({});
    g.header.intent_root = intent_root({});
    g.header.state_root = WorldState{}.state_root();
    if (!config.sealers.empty())
        g.header.sealer = crypto::address_of(config.sealers[0]);
    // Bind the chain identity to the configuration.
    g.header.parent_digest = config.config_digest();
    return g;
}

Node::Node(ChainConfig config, NodeRole role,
           std::optional<crypto::KeyPair> sealer_key, vm::ExcallPort* port)
    : config_(std::move(config)),
      role_(role),
      sealer_key_(std::move(sealer_key)),
      port_(port) {
    if (config_.sealers.empty())
        throw std::invalid_argument("chain config needs at least one sealer");
    if (config_.block_period_ms == 0)
        throw std::invalid_argument("block period must be positive");
    Block genesis = make_genesis(config_);
    head_ = genesis.header;
    head_digest_ = sealed_digest(genesis);
}

Address Node::sealer_address() const {
    if (!sealer_key_) return Address{};
    return crypto::address_of(sealer_key_->public_key);
}

std::optional<Rejection> Node::submit_tx(const Transaction& tx) {
    if (tx.mode_flag == ExcallMode::INITIATOR_ATTACHED) {
        if (tx.excalls.empty())
            return Rejection{RejectReason::InvalidAttachedCall,
                             "no attached calls"};
        for (const auto& c : tx.excalls) {
            if (c.request_uri.rfind("http", 0) != 0 ||
                c.response.size() > kMaxResponseSize)
                return Rejection{RejectReason::InvalidAttachedCall,
                                 "malformed tuple"};
            const PublicKey* pinned = config_.pinned_key_for(c.request_uri);
            if (!pinned || *pinned != c.public_key)
                return Rejection{RejectReason::InvalidAttachedCall,
                                 "oracle key not pinned"};
            if (!crypto::verify_response(c.public_key, c.response,
                                         c.request_nonce, c.signature))
                return Rejection{RejectReason::InvalidAttachedCall,
                                 "signature does not verify"};
        }
    }
    uint64_t state_nonce;
    {
        std::scoped_lock lk(mu_);
        state_nonce = state_.account_nonce(tx.sender);
    }
    return mempool_.submit(tx, state_nonce);
}

Node::TxOutcome Node::run_tx(WorldState& ws, const Transaction& tx,
                             uint32_t tx_index, const Digest& intent_hash,
                             vm::ExecMode mode,
                             const std::vector<VerifiableExternalCall>& recorded,
                             const vm::BlockEnv& env) const {
    TxOutcome out;
    out.receipt.tx_digest = tx_identity(tx);

    if (tx.account_nonce != ws.account_nonce(tx.sender)) {
        out.receipt.status = TxStatus::FAILED_EXEC;
        return out;
    }
    ws.set_account_nonce(tx.sender, tx.account_nonce + 1);

    const bool attached = tx.mode_flag == ExcallMode::INITIATOR_ATTACHED;

    ContractProgram program;
    Address self;
    Bytes input;
    bool run_code = true;
    bool is_deploy = tx.is_deploy();
    if (is_deploy) {
        try {
            Decoder d(tx.input);
            program = decode_program(d);
            vm::validate_program(program);
            Bytes init_args(tx.input.begin() + d.consumed(), tx.input.end());
            self = contract_address(tx.sender, tx.account_nonce);
            auto init_sel = vm::selector("init");
            if (program.entry_points.count(init_sel)) {
                input.insert(input.end(), init_sel.begin(), init_sel.end());
                input.insert(input.end(), init_args.begin(), init_args.end());
            } else if (program.entry_points.empty() && !program.bytecode.empty()) {
                input = init_args;
            } else {
                run_code = false;
            }
        } catch (const std::exception&) {
            out.receipt.status = TxStatus::FAILED_EXEC;
            return out;
        }
    } else {
        const ContractProgram* p = ws.program(*tx.target);
        if (!p) {
            out.receipt.status = TxStatus::FAILED_EXEC;
            return out;
        }
        program = *p;
        self = *tx.target;
        input = tx.input;
    }

    vm::ExecResult exec;
    if (run_code) {
        vm::ExecContext ctx;
        ctx.caller = tx.sender;
        ctx.self = self;
        ctx.input = input;
        ctx.mode = attached && mode != vm::ExecMode::DRY_RUN
                       ? vm::ExecMode::VERIFY
                       : mode;
        ctx.block_env = env;
        ctx.step_limit = config_.step_limit;
        ctx.max_excalls = config_.max_excalls_per_tx;
        if (mode == vm::ExecMode::FINALIZE && !attached) {
            ctx.excall_port = port_;
            ctx.nonce_provider = [&](uint32_t call_index) {
                return derive_call_nonce(intent_hash, tx_index, call_index);
            };
            ctx.key_check = [this](const std::string& uri,
                                   const PublicKey& pk) {
                const PublicKey* pinned = config_.pinned_key_for(uri);
                return pinned && *pinned == pk;
            };
        }
        const auto& rec = attached ? tx.excalls : recorded;
        // Attached tuples replay in every mode except DRY_RUN discovery,
        // where they replay too (no network either way).
        ContractStorage storage(ws, self);
        exec = vm::execute(program, ctx,
                           storage, attached ? tx.excalls : rec);
        out.receipt.status = exec.status;
        out.receipt.events = exec.events;
        out.performed = std::move(exec.performed_calls);
        out.consumed = attached ? 0 : exec.excalls_consumed;
        out.receipt.excall_count = static_cast<uint32_t>(
            std::max<size_t>(out.performed.size(), out.consumed));
        out.intended = std::move(exec.intended_uris);
    }

    if (is_deploy && out.receipt.status == TxStatus::SUCCESS)
        ws.deploy(self, std::move(program));
    return out;
}

std::vector<Intention> Node::discover_intentions(
    const WorldState& parent_state, const std::vector<Transaction>& txs,
    uint64_t number, uint64_t timestamp) const {
    WorldState ws = parent_state;
    vm::BlockEnv env{number, timestamp, head_digest_};
    std::vector<Intention> out;
    for (uint32_t i = 0; i < txs.size(); ++i) {
        auto o = run_tx(ws, txs[i], i, Digest{}, vm::ExecMode::DRY_RUN, {},
                        env);
        for (uint32_t j = 0; j < o.intended.size(); ++j)
            out.push_back(Intention{i, j, o.intended[j]});
    }
    return out;
}

Block Node::build_block(uint64_t now_ms) {
    std::scoped_lock lk(mu_);
    Block b;
    b.header.parent_digest = head_digest_;
    b.header.number = head_.number + 1;
    b.header.timestamp = std::max(now_ms, head_.timestamp + config_.block_period_ms);
    b.header.sealer = sealer_address();
    b.transactions = mempool_.take_ready(state_, config_.max_txs_per_block);
    b.header.tx_root = tx_root(b.transactions);
    auto intentions = discover_intentions(state_, b.transactions,
                                          b.header.number, b.header.timestamp);
    b.header.intent_root = intent_root(intentions);
    return b;
}

void Node::finalize_excalls(Block& b) {
    std::scoped_lock lk(mu_);
    // All block content below the state root is fixed from here on; ties
    // every call nonce to this block.
    const Digest ih = intention_hash(b);
    WorldState ws = state_;
    vm::BlockEnv env{b.header.number, b.header.timestamp,
                     b.header.parent_digest};
    std::vector<Receipt> receipts;
    b.excall_extension.clear();
    for (uint32_t i = 0; i < b.transactions.size(); ++i) {
        auto o = run_tx(ws, b.transactions[i], i, ih, vm::ExecMode::FINALIZE,
                        {}, env);
        for (uint32_t j = 0; j < o.performed.size(); ++j)
            b.excall_extension.push_back(
                ExtensionEntry{i, j, std::move(o.performed[j])});
        receipts.push_back(std::move(o.receipt));
    }
    b.header.state_root = ws.state_root();
    pending_digest_ = sealed_digest(b);
    pending_receipts_ = std::move(receipts);
}

void Node::seal_block(Block& b) const {
    if (!sealer_key_) throw std::logic_error("node has no sealer key");
    b.seal = crypto::sign_with_domain(sealer_key_->secret_key,
                                      crypto::kSealDomain, sealed_digest(b));
}

bool Node::verify_seal(const Block& b, const ChainConfig& config) {
    size_t k = config.sealers.size();
    if (k == 0) return false;
    const PublicKey& expected = config.sealers[b.header.number % k];
    if (b.header.sealer != crypto::address_of(expected)) return false;
    return crypto::verify_with_domain(expected, crypto::kSealDomain,
                                      sealed_digest(b), b.seal);
}

std::optional<Block> Node::produce(uint64_t now_ms) {
    if (!sealer_key_) return std::nullopt;
    {
        std::scoped_lock lk(mu_);
        if (now_ms < head_.timestamp + config_.block_period_ms)
            return std::nullopt;
        uint64_t next = head_.number + 1;
        const PublicKey& turn = config_.sealers[next % config_.sealers.size()];
        if (turn != sealer_key_->public_key) return std::nullopt;
    }
    Block b = build_block(now_ms);
    finalize_excalls(b);
    seal_block(b);
    apply_block(b);
    return b;
}

std::optional<Rejection> Node::verify_block(const Block& b) const {
    std::scoped_lock lk(mu_);
    auto reject = [](RejectReason r, std::string detail) {
        return Rejection{r, std::move(detail)};
    };

    if (b.header.parent_digest != head_digest_)
        return reject(RejectReason::BadParent, "parent digest mismatch");
    if (b.header.number != head_.number + 1)
        return reject(RejectReason::BadNumber, "non-sequential number");
    if (b.header.timestamp < head_.timestamp + config_.block_period_ms)
        return reject(RejectReason::BadTimestamp, "timestamp before slot");

    size_t k = config_.sealers.size();
    const PublicKey& turn = config_.sealers[b.header.number % k];
    if (b.header.sealer != crypto::address_of(turn))
        return reject(RejectReason::WrongSealerTurn, "out-of-turn sealer");
    if (!verify_seal(b, config_))
        return reject(RejectReason::BadSeal, "seal signature invalid");

    if (tx_root(b.transactions) != b.header.tx_root)
        return reject(RejectReason::TxRootMismatch, "tx root mismatch");

    auto intentions = discover_intentions(state_, b.transactions,
                                          b.header.number, b.header.timestamp);
    if (intent_root(intentions) != b.header.intent_root)
        return reject(RejectReason::IntentRootMismatch,
                      "intent root mismatch");

    const Digest ih = intention_hash(b);
    std::map<uint32_t, std::vector<VerifiableExternalCall>> recorded;
    {
        std::map<std::pair<uint32_t, uint32_t>, bool> seen;
        const ExtensionEntry* prev = nullptr;
        for (const auto& x : b.excall_extension) {
            if (x.tx_index >= b.transactions.size())
                return reject(RejectReason::MalformedExtension,
                              "tx index out of range");
            const auto& tx = b.transactions[x.tx_index];
            if (tx.mode_flag != ExcallMode::SEALER_EXECUTES)
                return reject(RejectReason::MalformedExtension,
                              "extension entry for attached-mode tx");
            if (seen.count({x.tx_index, x.call_index}))
                return reject(RejectReason::DuplicateExtensionEntry,
                              "duplicate (tx, call) coordinates");
            seen[{x.tx_index, x.call_index}] = true;
            if (prev && std::pair(x.tx_index, x.call_index) <
                            std::pair(prev->tx_index, prev->call_index))
                return reject(RejectReason::MalformedExtension,
                              "extension not in execution order");
            uint32_t expected_call =
                static_cast<uint32_t>(recorded[x.tx_index].size());
            if (x.call_index != expected_call)
                return reject(RejectReason::MalformedExtension,
                              "call indices not dense");
            if (x.call_index >= config_.max_excalls_per_tx)
                return reject(RejectReason::MalformedExtension,
                              "too many calls for one tx");
            if (x.call.response.size() > kMaxResponseSize)
                return reject(RejectReason::MalformedExtension,
                              "response exceeds cap");

            Nonce expected = derive_call_nonce(ih, x.tx_index, x.call_index);
            if (x.call.request_nonce != expected)
                return reject(RejectReason::NonceMismatch,
                              "tuple nonce not derived from this block");
            const PublicKey* pinned =
                config_.pinned_key_for(x.call.request_uri);
            if (!pinned || *pinned != x.call.public_key)
                return reject(RejectReason::UnknownOraclePublicKey,
                              "tuple key not pinned for URI");
            if (!crypto::verify_response(x.call.public_key, x.call.response,
                                         x.call.request_nonce,
                                         x.call.signature))
                return reject(RejectReason::InvalidTupleSignature,
                              "tuple signature invalid");
            for (const auto& in : intentions) {
                if (in.tx_index == x.tx_index &&
                    in.call_index == x.call_index) {
                    if (vm::resolve_uri(in.uri_template, expected) !=
                        x.call.request_uri)
                        return reject(RejectReason::UriMismatch,
                                      "tuple URI differs from intention");
                    break;
                }
            }
            recorded[x.tx_index].push_back(x.call);
            prev = &x;
        }
    }

    for (const auto& tx : b.transactions) {
        if (tx.mode_flag != ExcallMode::INITIATOR_ATTACHED) continue;
        for (const auto& c : tx.excalls) {
            const PublicKey* pinned = config_.pinned_key_for(c.request_uri);
            if (!pinned || *pinned != c.public_key)
                return reject(RejectReason::UnknownOraclePublicKey,
                              "attached tuple key not pinned");
            if (!crypto::verify_response(c.public_key, c.response,
                                         c.request_nonce, c.signature))
                return reject(RejectReason::InvalidTupleSignature,
                              "attached tuple signature invalid");
        }
    }

    // Replay. No network access on this path: run_tx wires no port in
    // VERIFY mode.
    WorldState ws = state_;
    vm::BlockEnv env{b.header.number, b.header.timestamp,
                     b.header.parent_digest};
    static const std::vector<VerifiableExternalCall> kNone;
    for (uint32_t i = 0; i < b.transactions.size(); ++i) {
        auto it = recorded.find(i);
        const auto& rec = it == recorded.end() ? kNone : it->second;
        auto o = run_tx(ws, b.transactions[i], i, ih, vm::ExecMode::VERIFY,
                        rec, env);
        if (o.consumed < rec.size())
            return reject(RejectReason::ExtraExtensionEntry,
                          "unconsumed extension entries for tx " +
                              std::to_string(i));
    }
    if (ws.state_root() != b.header.state_root)
        return reject(RejectReason::StateRootMismatch, "state root mismatch");
    return std::nullopt;
}

void Node::apply_block(const Block& b) {
    std::scoped_lock lk(mu_);
    const Digest ih = intention_hash(b);
    const Digest bd = sealed_digest(b);
    std::map<uint32_t, std::vector<VerifiableExternalCall>> recorded;
    for (const auto& x : b.excall_extension)
        recorded[x.tx_index].push_back(x.call);

    vm::BlockEnv env{b.header.number, b.header.timestamp,
                     b.header.parent_digest};
    static const std::vector<VerifiableExternalCall> kNone;
    std::vector<Receipt> receipts;
    for (uint32_t i = 0; i < b.transactions.size(); ++i) {
        auto it = recorded.find(i);
        const auto& rec = it == recorded.end() ? kNone : it->second;
        auto o = run_tx(state_, b.transactions[i], i, ih,
                        vm::ExecMode::VERIFY, rec, env);
        receipts.push_back(std::move(o.receipt));
    }
    if (bd == pending_digest_ && pending_receipts_.size() == receipts.size())
        receipts = pending_receipts_;  // sealer keeps FINALIZE statuses

    for (uint32_t i = 0; i < receipts.size(); ++i) {
        for (const auto& ev : receipts[i].events)
            events_.push_back({b.header.number, ev});
        receipts_[receipts[i].tx_digest] = {b.header.number, receipts[i]};
    }
    head_ = b.header;
    head_digest_ = bd;
    if (!log_path_.empty()) append_log(b);
}

std::optional<Rejection> Node::receive(const Block& b) {
    auto rej = verify_block(b);
    if (rej) return rej;
    apply_block(b);
    return std::nullopt;
}

std::optional<std::pair<uint64_t, Receipt>> Node::receipt(
    const Digest& tx_digest) const {
    std::scoped_lock lk(mu_);
    auto it = receipts_.find(tx_digest);
    if (it == receipts_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::pair<uint64_t, EventLog>> Node::events_by_topic(
    const Word& topic, uint64_t from_block) const {
    std::scoped_lock lk(mu_);
    std::vector<std::pair<uint64_t, EventLog>> out;
    for (const auto& [num, ev] : events_)
        if (num >= from_block && ev.topic == topic) out.push_back({num, ev});
    return out;
}

Word Node::storage_word(const Address& contract, const Word& key) const {
    std::scoped_lock lk(mu_);
    return state_.get_storage(contract, key);
}

uint64_t Node::storage_u64(const Address& contract, const Word& key) const {
    std::scoped_lock lk(mu_);
    return state_.storage_u64(contract, key);
}

void Node::set_log_path(const std::string& path) {
    std::scoped_lock lk(mu_);
    log_path_ = path;
}

void Node::append_log(const Block& b) const {
    std::ofstream out(log_path_, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("block log write failed: " + log_path_);
    Bytes enc = encode(b);
    uint32_t len = static_cast<uint32_t>(enc.size());
    char hdr[4] = {char(len), char(len >> 8), char(len >> 16), char(len >> 24)};
    out.write(hdr, 4);
    out.write(reinterpret_cast<const char*>(enc.data()), enc.size());
    if (!out) throw std::runtime_error("block log write failed: " + log_path_);
}

std::vector<Block> Node::read_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open block log: " + path);
    std::vector<Block> out;
    while (true) {
        unsigned char hdr[4];
        in.read(reinterpret_cast<char*>(hdr), 4);
        if (in.gcount() == 0) break;
        if (in.gcount() != 4) throw DecodeError("truncated log header");
        uint32_t len = hdr[0] | (hdr[1] << 8) | (hdr[2] << 16) |
                       (uint32_t(hdr[3]) << 24);
        Bytes buf(len);
        in.read(reinterpret_cast<char*>(buf.data()), len);
        if (static_cast<uint32_t>(in.gcount()) != len)
            throw DecodeError("truncated log record");
        out.push_back(decode_exact<Block>(
            buf, [](Decoder& d) { return decode_block(d); }));
    }
    return out;
}

std::optional<Rejection> Node::replay(const std::vector<Block>& blocks) {
    for (const auto& b : blocks) {
        auto rej = receive(b);
        if (rej) return rej;
    }
    return std::nullopt;
}

Transaction make_deploy_tx(const Address& sender, uint64_t account_nonce,
                           const ContractProgram& program,
                           const Bytes& init_args) {
    Transaction tx;
    tx.sender = sender;
    tx.account_nonce = account_nonce;
    tx.input = encode(program);
    tx.input.insert(tx.input.end(), init_args.begin(), init_args.end());
    return tx;
}

Transaction make_call_tx(const Address& sender, uint64_t account_nonce,
                         const Address& target, std::string_view function,
                         const std::vector<Word>& args) {
    Transaction tx;
    tx.sender = sender;
    tx.account_nonce = account_nonce;
    tx.target = target;
    auto sel = vm::selector(function);
    tx.input.insert(tx.input.end(), sel.begin(), sel.end());
    for (const auto& w : args)
        tx.input.insert(tx.input.end(), w.begin(), w.end());
    return tx;
}

}  // namespace excall

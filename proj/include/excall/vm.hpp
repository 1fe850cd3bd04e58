#pragma once

#include <atomic>
#include <functional>
#include <set>

#include "excall/types.hpp"

namespace excall::vm {

enum Opcode : uint8_t {
    OP_STOP = 0x00,
    OP_PUSH8 = 0x01,   // u64 immediate (8 bytes LE)
    OP_PUSHB = 0x02,   // u8 len + bytes, right-aligned into a word
    OP_DUP = 0x03,
    OP_POP = 0x04,
    OP_ADD = 0x05,
    OP_SUB = 0x06,
    OP_EQ = 0x07,      // pops b, a; pushes a == b
    OP_LT = 0x08,      // pops b, a; pushes a < b
    OP_NOT = 0x09,     // 0 -> 1, nonzero -> 0
    OP_JUMP = 0x0A,    // pops target
    OP_JUMPI = 0x0B,   // pops target, cond; jumps if cond != 0
    OP_CALLER = 0x0C,
    OP_SLOAD = 0x0D,
    OP_SSTORE = 0x0E,  // pops key, value
    OP_EMIT = 0x0F,    // pops topic, data1, data2; event data = data1||data2
    OP_EXCALL = 0x10,  // u16 len + URI template bytes
    OP_REVERT = 0xFE,
};

// Reserved read-only keys, visible through SLOAD only.
Word reserved_key(uint8_t tail);
inline Word rk_response() {
    Word w;
    w.fill(0xFF);
    return w;
}
inline Word rk_response_len() { return reserved_key(0xFE); }
inline Word rk_input_count() { return reserved_key(0x10); }
Word rk_input(uint8_t i);  // i < 8
bool is_reserved_key(const Word& k);

enum class ExecMode { FINALIZE, VERIFY, DRY_RUN };

// Where FINALIZE-mode EXCALLs go. The only blocking boundary in the VM;
// every invocation bumps the counter so tests can assert network silence.
class ExcallPort {
public:
    struct CallResult {
        Bytes response;
        PublicKey public_key{};
        Bytes signature;
    };

    virtual ~ExcallPort() = default;
    std::optional<CallResult> call(const std::string& uri) {
        ++calls_;
        return do_call(uri);
    }
    uint64_t call_count() const { return calls_.load(); }

protected:
    virtual std::optional<CallResult> do_call(const std::string& uri) = 0;

private:
    std::atomic<uint64_t> calls_{0};
};

class Storage {
public:
    virtual ~Storage() = default;
    virtual Word get(const Word& key) const = 0;
    virtual void set(const Word& key, const Word& value) = 0;
};

struct BlockEnv {
    uint64_t number = 0;
    uint64_t timestamp = 0;
    Digest parent_digest{};
};

struct ExecContext {
    Address caller{};
    Address self{};
    Bytes input;
    ExecMode mode = ExecMode::DRY_RUN;
    BlockEnv block_env;
    ExcallPort* excall_port = nullptr;  // FINALIZE only
    std::function<Nonce(uint32_t call_index)> nonce_provider;
    // Sealer-side pinned-key check; a failing key fails the call as
    // unverified so the block never carries a tuple verifiers would reject.
    std::function<bool(const std::string& uri, const PublicKey&)> key_check;
    uint64_t step_limit = 100000;
    uint32_t max_excalls = 8;
};

struct ExecResult {
    TxStatus status = TxStatus::SUCCESS;
    std::vector<EventLog> events;
    std::vector<VerifiableExternalCall> performed_calls;  // FINALIZE
    uint32_t excalls_consumed = 0;                        // VERIFY
    std::vector<std::string> intended_uris;               // DRY_RUN
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Walks the bytecode: immediates well-formed, EXCALL operands start
// with "http", entry points on instruction boundaries.
void validate_program(const ContractProgram& p);

std::set<uint32_t> instruction_boundaries(const Bytes& bytecode);

// Substitutes "{nonce}" in a URI template with the hex nonce.
std::string resolve_uri(const std::string& uri_template, const Nonce& nonce);

std::array<uint8_t, 4> selector(std::string_view name);

// Runs one transaction's code. `recorded` feeds VERIFY-mode EXCALLs (and
// FINALIZE of initiator-attached txs); it is ignored in FINALIZE proper.
// Storage writes land in `storage` only if status == SUCCESS.
ExecResult execute(const ContractProgram& program, const ExecContext& ctx,
                   Storage& storage,
                   const std::vector<VerifiableExternalCall>& recorded);

}  // namespace excall::vm

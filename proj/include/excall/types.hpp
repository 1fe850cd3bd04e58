#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "excall/bytes.hpp"

namespace excall {

inline constexpr size_t kMaxResponseSize = 4096;
inline constexpr size_t kMaxBytecodeSize = 24 * 1024;

// The verifiable-external-call tuple: request URI, nonce, signer key,
// response bytes and the signature binding them together.
struct VerifiableExternalCall {
    std::string request_uri;  // absolute http URI
    Nonce request_nonce{};
    PublicKey public_key{};
    Bytes response;  // <= kMaxResponseSize
    Bytes signature;

    bool operator==(const VerifiableExternalCall&) const = default;
};

enum class ExcallMode : uint8_t {
    SEALER_EXECUTES = 0,
    INITIATOR_ATTACHED = 1,
};

struct Transaction {
    Address sender{};
    uint64_t account_nonce = 0;
    std::optional<Address> target;  // nullopt = deploy
    Bytes input;
    std::vector<VerifiableExternalCall> excalls;
    ExcallMode mode_flag = ExcallMode::SEALER_EXECUTES;

    bool is_deploy() const { return !target.has_value(); }
    bool operator==(const Transaction&) const = default;
};

struct EventLog {
    Address contract{};
    Word topic{};
    Bytes data;

    bool operator==(const EventLog&) const = default;
};

enum class TxStatus : uint8_t {
    SUCCESS = 0,
    FAILED_EXEC = 1,
    FAILED_EXCALL_UNVERIFIED = 2,
    FAILED_EXCALL_NO_RESPONSE = 3,
};

const char* to_string(TxStatus s);

struct Receipt {
    Digest tx_digest{};
    TxStatus status = TxStatus::SUCCESS;
    std::vector<EventLog> events;
    uint32_t excall_count = 0;

    bool operator==(const Receipt&) const = default;
};

struct BlockHeader {
    Digest parent_digest{};
    uint64_t number = 0;
    uint64_t timestamp = 0;  // unix milliseconds
    Digest tx_root{};
    Digest intent_root{};
    Digest state_root{};
    Address sealer{};

    bool operator==(const BlockHeader&) const = default;
};

struct ExtensionEntry {
    uint32_t tx_index = 0;
    uint32_t call_index = 0;
    VerifiableExternalCall call;

    bool operator==(const ExtensionEntry&) const = default;
};

struct Block {
    BlockHeader header;
    std::vector<Transaction> transactions;
    std::vector<ExtensionEntry> excall_extension;
    Bytes seal;

    bool operator==(const Block&) const = default;
};

// Declared external-call intention: fixed before any call is made.
struct Intention {
    uint32_t tx_index = 0;
    uint32_t call_index = 0;
    std::string uri_template;

    bool operator==(const Intention&) const = default;
};

struct ContractProgram {
    Bytes bytecode;  // <= kMaxBytecodeSize
    std::map<std::array<uint8_t, 4>, uint32_t> entry_points;

    bool operator==(const ContractProgram&) const = default;
};

}  // namespace excall

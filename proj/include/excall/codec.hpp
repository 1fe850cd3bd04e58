#pragma once

#include <stdexcept>

#include "excall/types.hpp"

namespace excall {

// Canonical encoding: little-endian fixed-width integers, u32 length
// prefixes, fields in declared order. Doubles as the wire and log format.

struct DecodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidValue : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Encoder {
public:
    void u8(uint8_t v) { out_.push_back(v); }
    void u32(uint32_t v);
    void u64(uint64_t v);
    void raw(std::span<const uint8_t> data);
    void blob(std::span<const uint8_t> data);  // u32 length + bytes
    void str(std::string_view s);

    const Bytes& bytes() const { return out_; }
    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

class Decoder {
public:
    explicit Decoder(std::span<const uint8_t> data) : data_(data) {}

    uint8_t u8();
    uint32_t u32();
    uint64_t u64();
    Bytes raw(size_t n);
    Bytes blob(size_t max_len);
    std::string str(size_t max_len);
    template <size_t N>
    std::array<uint8_t, N> fixed() {
        Bytes b = raw(N);
        std::array<uint8_t, N> out;
        std::memcpy(out.data(), b.data(), N);
        return out;
    }

    size_t remaining() const { return data_.size() - pos_; }
    size_t consumed() const { return pos_; }
    // Decoding a whole value must consume every byte.
    void expect_end() const;

private:
    std::span<const uint8_t> data_;
    size_t pos_ = 0;
};

Bytes encode(const VerifiableExternalCall& v);
Bytes encode(const Transaction& v);
Bytes encode(const EventLog& v);
Bytes encode(const Receipt& v);
Bytes encode(const BlockHeader& v);
Bytes encode(const Block& v);
Bytes encode(const ContractProgram& v);
Bytes encode(const std::vector<Intention>& v);

void encode_into(Encoder& e, const VerifiableExternalCall& v);
void encode_into(Encoder& e, const Transaction& v);
void encode_into(Encoder& e, const EventLog& v);
void encode_into(Encoder& e, const Receipt& v);
void encode_into(Encoder& e, const BlockHeader& v);
void encode_into(Encoder& e, const Block& v);
void encode_into(Encoder& e, const ContractProgram& v);

VerifiableExternalCall decode_excall(Decoder& d);
Transaction decode_transaction(Decoder& d);
EventLog decode_event(Decoder& d);
Receipt decode_receipt(Decoder& d);
BlockHeader decode_header(Decoder& d);
Block decode_block(Decoder& d);
ContractProgram decode_program(Decoder& d);

template <typename T, typename Fn>
T decode_exact(std::span<const uint8_t> data, Fn&& fn) {
    Decoder d(data);
    T v = fn(d);
    d.expect_end();
    return v;
}

// Identities and roots.
Digest tx_identity(const Transaction& tx);
Digest tx_root(const std::vector<Transaction>& txs);
Digest intent_root(const std::vector<Intention>& intentions);
Digest intention_hash(const Block& b);
Digest extension_root(const Block& b);
Digest sealed_digest(const Block& b);

// Nonce for call (tx_index, call_index) of a block with the given
// intention hash. Derivable only once block content is fixed.
Nonce derive_call_nonce(const Digest& intent_hash, uint32_t tx_index,
                        uint32_t call_index);

}  // namespace excall

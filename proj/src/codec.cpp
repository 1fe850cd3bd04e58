#include "excall/codec.hpp"

#include "excall/crypto.hpp"

namespace excall {

const char* to_string(TxStatus s) {
    switch (s) {
        case TxStatus::SUCCESS: return "SUCCESS";
        case TxStatus::FAILED_EXEC: return "FAILED_EXEC";
        case TxStatus::FAILED_EXCALL_UNVERIFIED:
            return "FAILED_EXCALL_UNVERIFIED";
        case TxStatus::FAILED_EXCALL_NO_RESPONSE:
            return "FAILED_EXCALL_NO_RESPONSE";
    }
    return "?";
}

void Encoder::u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(uint8_t(v >> (8 * i)));
}

void Encoder::u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(uint8_t(v >> (8 * i)));
}

void Encoder::raw(std::span<const uint8_t> data) {
    out_.insert(out_.end(), data.begin(), data.end());
}

void Encoder::blob(std::span<const uint8_t> data) {
    u32(static_cast<uint32_t>(data.size()));
    raw(data);
}

void Encoder::str(std::string_view s) {
    u32(static_cast<uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
}

uint8_t Decoder::u8() {
    if (remaining() < 1) throw DecodeError("truncated u8");
    return data_[pos_++];
}

uint32_t Decoder::u32() {
    if (remaining() < 4) throw DecodeError("truncated u32");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

uint64_t Decoder::u64() {
    if (remaining() < 8) throw DecodeError("truncated u64");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

Bytes Decoder::raw(size_t n) {
    if (remaining() < n) throw DecodeError("truncated raw");
    Bytes out(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return out;
}

Bytes Decoder::blob(size_t max_len) {
    uint32_t n = u32();
    if (n > max_len) throw InvalidValue("blob exceeds cap");
    return raw(n);
}

std::string Decoder::str(size_t max_len) {
    Bytes b = blob(max_len);
    return std::string(b.begin(), b.end());
}

void Decoder::expect_end() const {
    if (pos_ != data_.size()) throw DecodeError("trailing bytes");
}

void encode_into(Encoder& e, const VerifiableExternalCall& v) {
    if (v.response.size() > kMaxResponseSize)
        throw InvalidValue("response exceeds cap");
    e.str(v.request_uri);
    e.raw(v.request_nonce);
    e.raw(v.public_key);
    e.blob(v.response);
    e.blob(v.signature);
}

VerifiableExternalCall decode_excall(Decoder& d) {
    VerifiableExternalCall v;
    v.request_uri = d.str(4096);
    v.request_nonce = d.fixed<32>();
    v.public_key = d.fixed<32>();
    v.response = d.blob(kMaxResponseSize);
    v.signature = d.blob(256);
    if (v.request_uri.rfind("http", 0) != 0)
        throw InvalidValue("request_uri must start with http");
    return v;
}

void encode_into(Encoder& e, const Transaction& v) {
    e.raw(v.sender);
    e.u64(v.account_nonce);
    e.u8(v.target ? 1 : 0);
    e.raw(v.target.value_or(Address{}));
    e.blob(v.input);
    e.u8(static_cast<uint8_t>(v.mode_flag));
    e.u32(static_cast<uint32_t>(v.excalls.size()));
    for (const auto& c : v.excalls) encode_into(e, c);
}

Transaction decode_transaction(Decoder& d) {
    Transaction v;
    v.sender = d.fixed<20>();
    v.account_nonce = d.u64();
    uint8_t has_target = d.u8();
    Address target = d.fixed<20>();
    if (has_target > 1) throw InvalidValue("bad target flag");
    if (has_target) v.target = target;
    v.input = d.blob(1 << 20);
    uint8_t mode = d.u8();
    if (mode > 1) throw InvalidValue("bad mode flag");
    v.mode_flag = static_cast<ExcallMode>(mode);
    uint32_t n = d.u32();
    if (n > 64) throw InvalidValue("too many excalls");
    for (uint32_t i = 0; i < n; ++i) v.excalls.push_back(decode_excall(d));
    if (v.mode_flag == ExcallMode::INITIATOR_ATTACHED && v.excalls.empty())
        throw InvalidValue("initiator-attached tx without calls");
    return v;
}

void encode_into(Encoder& e, const EventLog& v) {
    e.raw(v.contract);
    e.raw(v.topic);
    e.blob(v.data);
}

EventLog decode_event(Decoder& d) {
    EventLog v;
    v.contract = d.fixed<20>();
    v.topic = d.fixed<32>();
    v.data = d.blob(4096);
    return v;
}

void encode_into(Encoder& e, const Receipt& v) {
    e.raw(v.tx_digest);
    e.u8(static_cast<uint8_t>(v.status));
    e.u32(static_cast<uint32_t>(v.events.size()));
    for (const auto& ev : v.events) encode_into(e, ev);
    e.u32(v.excall_count);
}

Receipt decode_receipt(Decoder& d) {
    Receipt v;
    v.tx_digest = d.fixed<32>();
    uint8_t s = d.u8();
    if (s > 3) throw InvalidValue("bad status");
    v.status = static_cast<TxStatus>(s);
    uint32_t n = d.u32();
    if (n > 4096) throw InvalidValue("too many events");
    for (uint32_t i = 0; i < n; ++i) v.events.push_back(decode_event(d));
    v.excall_count = d.u32();
    return v;
}

void encode_into(Encoder& e, const BlockHeader& v) {
    e.raw(v.parent_digest);
    e.u64(v.number);
    e.u64(v.timestamp);
    e.raw(v.tx_root);
    e.raw(v.intent_root);
    e.raw(v.state_root);
    e.raw(v.sealer);
}

BlockHeader decode_header(Decoder& d) {
    BlockHeader v;
    v.parent_digest = d.fixed<32>();
    v.number = d.u64();
    v.timestamp = d.u64();
    v.tx_root = d.fixed<32>();
    v.intent_root = d.fixed<32>();
    v.state_root = d.fixed<32>();
    v.sealer = d.fixed<20>();
    return v;
}

void encode_into(Encoder& e, const Block& v) {
    encode_into(e, v.header);
    e.u32(static_cast<uint32_t>(v.transactions.size()));
    for (const auto& tx : v.transactions) encode_into(e, tx);
    e.u32(static_cast<uint32_t>(v.excall_extension.size()));
    for (const auto& x : v.excall_extension) {
        e.u32(x.tx_index);
        e.u32(x.call_index);
        encode_into(e, x.call);
    }
    e.blob(v.seal);
}

Block decode_block(Decoder& d) {
    Block v;
    v.header = decode_header(d);
    uint32_t ntx = d.u32();
    if (ntx > (1u << 20)) throw InvalidValue("too many txs");
    for (uint32_t i = 0; i < ntx; ++i)
        v.transactions.push_back(decode_transaction(d));
    uint32_t next = d.u32();
    if (next > (1u << 20)) throw InvalidValue("too many extension entries");
    for (uint32_t i = 0; i < next; ++i) {
        ExtensionEntry x;
        x.tx_index = d.u32();
        x.call_index = d.u32();
        x.call = decode_excall(d);
        v.excall_extension.push_back(std::move(x));
    }
    v.seal = d.blob(256);
    return v;
}

void encode_into(Encoder& e, const ContractProgram& v) {
    if (v.bytecode.size() > kMaxBytecodeSize)
        throw InvalidValue("bytecode exceeds cap");
    e.blob(v.bytecode);
    e.u32(static_cast<uint32_t>(v.entry_points.size()));
    for (const auto& [sel, off] : v.entry_points) {
        e.raw(sel);
        e.u32(off);
    }
}

ContractProgram decode_program(Decoder& d) {
    ContractProgram v;
    v.bytecode = d.blob(kMaxBytecodeSize);
    uint32_t n = d.u32();
    if (n > 1024) throw InvalidValue("too many entry points");
    for (uint32_t i = 0; i < n; ++i) {
        auto sel = d.fixed<4>();
        uint32_t off = d.u32();
        if (off >= v.bytecode.size() && !(off == 0 && v.bytecode.empty()))
            throw InvalidValue("entry offset out of range");
        v.entry_points[sel] = off;
    }
    return v;
}

Bytes encode(const VerifiableExternalCall& v) {
    Encoder e;
    encode_into(e, v);
    return e.take();
}
Bytes encode(const Transaction& v) {
    Encoder e;
    encode_into(e, v);
    return e.take();
}
Bytes encode(const EventLog& v) {
    Encoder e;
    encode_into(e, v);
    return e.take();
}
Bytes encode(const Receipt& v) {
    Encoder e;
    encode_into(e, v);
    return e.take();
}
Bytes encode(const BlockHeader& v) {
    Encoder e;
    encode_into(e, v);
    return e.take();
}
Bytes encode(const Block& v) {
    Encoder e;
    encode_into(e, v);
    return e.take();
}
Bytes encode(const ContractProgram& v) {
    Encoder e;
    encode_into(e, v);
    return e.take();
}
Bytes encode(const std::vector<Intention>& v) {
    Encoder e;
    e.u32(static_cast<uint32_t>(v.size()));
    for (const auto& i : v) {
        e.u32(i.tx_index);
        e.u32(i.call_index);
        e.str(i.uri_template);
    }
    return e.take();
}

Digest tx_identity(const Transaction& tx) {
    if (tx.mode_flag == ExcallMode::SEALER_EXECUTES && !tx.excalls.empty()) {
        Transaction stripped = tx;
        stripped.excalls.clear();
        return crypto::hash_bytes(encode(stripped));
    }
    return crypto::hash_bytes(encode(tx));
}

Digest tx_root(const std::vector<Transaction>& txs) {
    Encoder e;
    e.u32(static_cast<uint32_t>(txs.size()));
    for (const auto& tx : txs) e.raw(tx_identity(tx));
    return crypto::hash_bytes(e.bytes());
}

Digest intent_root(const std::vector<Intention>& intentions) {
    return crypto::hash_bytes(encode(intentions));
}

Digest intention_hash(const Block& b) {
    // Covers everything the sealer fixes before performing any call:
    // header minus state_root, which commits to tx_root and intent_root.
    BlockHeader h = b.header;
    h.state_root = Digest{};
    return crypto::hash_bytes(encode(h));
}

Digest extension_root(const Block& b) {
    Encoder e;
    e.u32(static_cast<uint32_t>(b.excall_extension.size()));
    for (const auto& x : b.excall_extension) {
        e.u32(x.tx_index);
        e.u32(x.call_index);
        encode_into(e, x.call);
    }
    return crypto::hash_bytes(e.bytes());
}

Digest sealed_digest(const Block& b) {
    Encoder e;
    e.raw(intention_hash(b));
    e.raw(extension_root(b));
    e.raw(b.header.state_root);
    return crypto::hash_bytes(e.bytes());
}

Nonce derive_call_nonce(const Digest& intent_hash, uint32_t tx_index,
                        uint32_t call_index) {
    Encoder e;
    e.raw(intent_hash);
    e.u32(tx_index);
    e.u32(call_index);
    return crypto::hash_bytes(e.bytes());
}

}  // namespace excall

#include "excall/crypto.hpp"

#include <sodium.h>

#include <mutex>

namespace excall {

namespace {

void ensure_sodium() {
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0) throw std::runtime_error("sodium_init failed");
    });
}

const char kHexDigits[] = "0123456789abcdef";

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

const char kB64Digits[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string hex_encode(std::span<const uint8_t> data) {
    std::string out;
    out.reserve(data.size() * 2);
    for (uint8_t b : data) {
        out.push_back(kHexDigits[b >> 4]);
        out.push_back(kHexDigits[b & 0x0F]);
    }
    return out;
}

std::optional<Bytes> hex_decode(std::string_view hex) {
    if (hex.size() % 2 != 0) return std::nullopt;
    Bytes out;
    out.reserve(hex.size() / 2);
    for (size_t i = 0; i < hex.size(); i += 2) {
        int hi = hex_nibble(hex[i]);
        int lo = hex_nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<uint8_t>((hi << 4) | lo));
    }
    return out;
}

std::string base64_encode(std::span<const uint8_t> data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 3 <= data.size()) {
        uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out.push_back(kB64Digits[(v >> 18) & 63]);
        out.push_back(kB64Digits[(v >> 12) & 63]);
        out.push_back(kB64Digits[(v >> 6) & 63]);
        out.push_back(kB64Digits[v & 63]);
        i += 3;
    }
    size_t rem = data.size() - i;
    if (rem == 1) {
        uint32_t v = data[i] << 16;
        out.push_back(kB64Digits[(v >> 18) & 63]);
        out.push_back(kB64Digits[(v >> 12) & 63]);
        out.append("==");
    } else if (rem == 2) {
        uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out.push_back(kB64Digits[(v >> 18) & 63]);
        out.push_back(kB64Digits[(v >> 12) & 63]);
        out.push_back(kB64Digits[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

std::optional<Bytes> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) return std::nullopt;
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+') return 62;
        if (c == '/') return 63;
        return -1;
    };
    Bytes out;
    out.reserve(text.size() / 4 * 3);
    for (size_t i = 0; i < text.size(); i += 4) {
        int pad = 0;
        uint32_t v = 0;
        for (size_t j = 0; j < 4; ++j) {
            char c = text[i + j];
            if (c == '=') {
                if (i + 4 != text.size() || j < 2) return std::nullopt;
                ++pad;
                v <<= 6;
                continue;
            }
            if (pad > 0) return std::nullopt;
            int d = val(c);
            if (d < 0) return std::nullopt;
            v = (v << 6) | static_cast<uint32_t>(d);
        }
        out.push_back(static_cast<uint8_t>(v >> 16));
        if (pad < 2) out.push_back(static_cast<uint8_t>(v >> 8));
        if (pad < 1) out.push_back(static_cast<uint8_t>(v));
    }
    return out;
}

Word word_from_u64(uint64_t v) {
    Word w{};
    for (int i = 0; i < 8; ++i)
        w[31 - i] = static_cast<uint8_t>(v >> (8 * i));
    return w;
}

uint64_t word_to_u64(const Word& w) {
    uint64_t v = 0;
    for (int i = 24; i < 32; ++i) v = (v << 8) | w[i];
    return v;
}

bool word_is_zero(const Word& w) {
    for (uint8_t b : w)
        if (b) return false;
    return true;
}

Word word_add(const Word& a, const Word& b) {
    Word out{};
    unsigned carry = 0;
    for (int i = 31; i >= 0; --i) {
        unsigned s = a[i] + b[i] + carry;
        out[i] = static_cast<uint8_t>(s);
        carry = s >> 8;
    }
    return out;
}

Word word_sub(const Word& a, const Word& b) {
    Word out{};
    int borrow = 0;
    for (int i = 31; i >= 0; --i) {
        int s = int(a[i]) - int(b[i]) - borrow;
        borrow = s < 0 ? 1 : 0;
        out[i] = static_cast<uint8_t>(s + (borrow << 8));
    }
    return out;
}

int word_cmp(const Word& a, const Word& b) {
    return std::memcmp(a.data(), b.data(), 32);
}

Word word_from_bytes(std::span<const uint8_t> data) {
    Word w{};
    size_t n = data.size() > 32 ? 32 : data.size();
    std::memcpy(w.data() + (32 - n), data.data(), n);
    return w;
}

Word word_from_address(const Address& a) {
    Word w{};
    std::memcpy(w.data() + 12, a.data(), 20);
    return w;
}

Address address_from_word(const Word& w) {
    Address a{};
    std::memcpy(a.data(), w.data() + 12, 20);
    return a;
}

namespace crypto {

KeyPair keygen(std::span<const uint8_t> seed) {
    ensure_sodium();
    if (seed.size() != kSeedSize)
        throw InvalidSeed("keygen: seed must be 32 bytes");
    KeyPair kp;
    kp.secret_key.resize(crypto_sign_SECRETKEYBYTES);
    crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.data(),
                             seed.data());
    return kp;
}

Digest hash_bytes(std::span<const uint8_t> data) {
    ensure_sodium();
    Digest d;
    crypto_hash_sha256(d.data(), data.data(), data.size());
    return d;
}

Bytes sign_with_domain(const Bytes& secret_key, std::string_view domain,
                       std::span<const uint8_t> msg) {
    ensure_sodium();
    if (secret_key.size() != crypto_sign_SECRETKEYBYTES)
        throw std::invalid_argument("sign: bad secret key length");
    Bytes payload;
    payload.reserve(domain.size() + msg.size());
    payload.insert(payload.end(), domain.begin(), domain.end());
    payload.insert(payload.end(), msg.begin(), msg.end());
    Bytes sig(crypto_sign_BYTES);
    crypto_sign_detached(sig.data(), nullptr, payload.data(), payload.size(),
                         secret_key.data());
    return sig;
}

bool verify_with_domain(const PublicKey& public_key, std::string_view domain,
                        std::span<const uint8_t> msg,
                        std::span<const uint8_t> signature) {
    ensure_sodium();
    if (signature.size() != crypto_sign_BYTES) return false;
    Bytes payload;
    payload.reserve(domain.size() + msg.size());
    payload.insert(payload.end(), domain.begin(), domain.end());
    payload.insert(payload.end(), msg.begin(), msg.end());
    return crypto_sign_verify_detached(signature.data(), payload.data(),
                                       payload.size(),
                                       public_key.data()) == 0;
}

Bytes sign_response(const Bytes& secret_key, std::span<const uint8_t> response,
                    const Nonce& nonce) {
    Bytes msg;
    msg.reserve(nonce.size() + response.size());
    msg.insert(msg.end(), nonce.begin(), nonce.end());
    msg.insert(msg.end(), response.begin(), response.end());
    return sign_with_domain(secret_key, kResponseDomain, msg);
}

bool verify_response(const PublicKey& public_key,
                     std::span<const uint8_t> response, const Nonce& nonce,
                     std::span<const uint8_t> signature) {
    Bytes msg;
    msg.reserve(nonce.size() + response.size());
    msg.insert(msg.end(), nonce.begin(), nonce.end());
    msg.insert(msg.end(), response.begin(), response.end());
    return verify_with_domain(public_key, kResponseDomain, msg, signature);
}

Address address_of(const PublicKey& pk) {
    Digest d = hash_bytes(pk);
    Address a;
    std::memcpy(a.data(), d.data(), 20);
    return a;
}

}  // namespace crypto
}  // namespace excall

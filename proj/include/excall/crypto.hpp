#pragma once

#include <span>
#include <stdexcept>
#include <string_view>

#include "excall/bytes.hpp"

namespace excall::crypto {

inline constexpr size_t kSeedSize = 32;
inline constexpr size_t kSignatureSize = 64;
inline constexpr std::string_view kResponseDomain = "EXCALL-RESP-V1";
inline constexpr std::string_view kSealDomain = "EXCALL-SEAL-V1";

struct InvalidSeed : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct KeyPair {
    PublicKey public_key{};
    Bytes secret_key;  // opaque signing key material
};

// Deterministic: the same 32-byte seed always yields the same pair.
KeyPair keygen(std::span<const uint8_t> seed);

Digest hash_bytes(std::span<const uint8_t> data);

inline Digest hash_str(std::string_view s) {
    return hash_bytes(std::span<const uint8_t>(
        reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

// Signature over domain || msg. Deterministic (no per-signature randomness).
Bytes sign_with_domain(const Bytes& secret_key, std::string_view domain,
                       std::span<const uint8_t> msg);
bool verify_with_domain(const PublicKey& public_key, std::string_view domain,
                        std::span<const uint8_t> msg,
                        std::span<const uint8_t> signature);

// Oracle response framing: domain || nonce || response.
Bytes sign_response(const Bytes& secret_key, std::span<const uint8_t> response,
                    const Nonce& nonce);
// Returns false for malformed signatures instead of throwing.
bool verify_response(const PublicKey& public_key,
                     std::span<const uint8_t> response, const Nonce& nonce,
                     std::span<const uint8_t> signature);

// 20-byte account address: truncated hash of the public key.
Address address_of(const PublicKey& pk);

}  // namespace excall::crypto

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace excall {

using Bytes = std::vector<uint8_t>;
using Digest = std::array<uint8_t, 32>;
using Nonce = std::array<uint8_t, 32>;
using PublicKey = std::array<uint8_t, 32>;
using Address = std::array<uint8_t, 20>;
using Word = std::array<uint8_t, 32>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline std::string to_string(std::span<const uint8_t> b) {
    return std::string(b.begin(), b.end());
}

std::string hex_encode(std::span<const uint8_t> data);
std::optional<Bytes> hex_decode(std::string_view hex);

std::string base64_encode(std::span<const uint8_t> data);
std::optional<Bytes> base64_decode(std::string_view text);

template <size_t N>
std::optional<std::array<uint8_t, N>> fixed_from_hex(std::string_view hex) {
    auto raw = hex_decode(hex);
    if (!raw || raw->size() != N) return std::nullopt;
    std::array<uint8_t, N> out;
    std::memcpy(out.data(), raw->data(), N);
    return out;
}

// Word helpers. Words are 256-bit big-endian unsigned integers.
Word word_from_u64(uint64_t v);
uint64_t word_to_u64(const Word& w);  // low 8 bytes
bool word_is_zero(const Word& w);
Word word_add(const Word& a, const Word& b);  // mod 2^256
Word word_sub(const Word& a, const Word& b);  // mod 2^256
int word_cmp(const Word& a, const Word& b);

// Right-aligns up to 32 bytes into a word, zero-padded on the left.
Word word_from_bytes(std::span<const uint8_t> data);

Word word_from_address(const Address& a);
Address address_from_word(const Word& w);

}  // namespace excall

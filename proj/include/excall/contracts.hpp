#pragma once

#include <fstream>
#include <sstream>

#include "excall/crypto.hpp"
#include "excall/types.hpp"

// Storage layout shared by the shipped betting contracts, their relayer
// and the harness. Must stay in sync with contracts/*.easm.
namespace excall::contracts {

inline constexpr const char* kStandardBetFile = "standard_bet.easm";
inline constexpr const char* kExcallBetFile = "excall_bet.easm";
// Endpoint baked into excall_bet.easm; rewritten per run.
inline constexpr const char* kDefaultExcallEndpoint =
    "http://127.0.0.1:8547/excallrand";

inline Word slot_counter() { return word_from_u64(1); }
inline Word slot_oracle() { return word_from_u64(2); }

inline Word tagged_key(uint8_t tag) {
    Word w{};
    w[9] = tag;
    return w;
}

inline Word pending_key(uint64_t ref) {
    return word_add(tagged_key(0x50), word_from_u64(ref));
}

inline Word winnings_key(const Address& punter) {
    return word_add(tagged_key(0x57), word_from_address(punter));
}

inline Word topic_bet_placed() {
    Digest d = crypto::hash_str("BetPlaced");
    Word w;
    std::memcpy(w.data(), d.data(), 32);
    return w;
}

inline std::string contracts_dir() {
#ifdef EXCALL_CONTRACTS_DIR
    return EXCALL_CONTRACTS_DIR;
#else
    return "contracts";
#endif
}

inline std::string load_source(const std::string& filename,
                               const std::string& dir = contracts_dir()) {
    std::ifstream in(dir + "/" + filename);
    if (!in)
        throw std::runtime_error("cannot open contract source: " + dir + "/" +
                                 filename);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::string standard_bet_source(
    const std::string& dir = contracts_dir()) {
    return load_source(kStandardBetFile, dir);
}

// Loads the EXCALL contract with its endpoint rewritten to `endpoint`
// (e.g. "http://127.0.0.1:39181/excallrand").
inline std::string excall_bet_source(const std::string& endpoint,
                                     const std::string& dir = contracts_dir()) {
    std::string src = load_source(kExcallBetFile, dir);
    const std::string from = kDefaultExcallEndpoint;
    size_t pos = 0;
    while ((pos = src.find(from, pos)) != std::string::npos) {
        src.replace(pos, from.size(), endpoint);
        pos += endpoint.size();
    }
    return src;
}

}  // namespace excall::contracts

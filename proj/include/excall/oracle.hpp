#pragma once

#include <memory>
#include <thread>

#include "excall/chain.hpp"
#include "excall/crypto.hpp"

namespace excall::oracle {

// The trusted external party: answers GET /excallrand?nonce=<64 hex>
// with {"response": base64, "nonce": hex, "pubkey": hex, "sig": base64},
// the signature binding response and nonce.
class OracleService {
public:
    OracleService(crypto::KeyPair keypair, double win_probability,
                  uint64_t rng_seed);
    ~OracleService();

    // Binds and serves on a background thread. port 0 picks a free port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    void stop();

    const PublicKey& public_key() const { return keypair_.public_key; }
    std::string base_url() const;
    uint64_t draws() const;
    uint64_t wins() const;

    // The outcome stream, exposed for direct (non-HTTP) draws and tests.
    uint8_t next_outcome();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    crypto::KeyPair keypair_;
};

// HTTP-backed external-call port used by sealers. 2-second timeout.
class HttpExcallPort final : public vm::ExcallPort {
public:
    explicit HttpExcallPort(uint64_t timeout_ms = 2000)
        : timeout_ms_(timeout_ms) {}

protected:
    std::optional<CallResult> do_call(const std::string& uri) override;

private:
    uint64_t timeout_ms_;
};

// Test port answering every call locally with a signing key; still an
// "external call" for counting purposes.
class LocalSigningPort final : public vm::ExcallPort {
public:
    LocalSigningPort(crypto::KeyPair keypair, double win_probability,
                     uint64_t rng_seed);

protected:
    std::optional<CallResult> do_call(const std::string& uri) override;

private:
    crypto::KeyPair keypair_;
    uint64_t threshold_;
    uint64_t rng_state_;
    std::mutex mu_;
};

// A port that must never be used; reaching it is a test failure signal.
class NullPort final : public vm::ExcallPort {
protected:
    std::optional<CallResult> do_call(const std::string&) override {
        return std::nullopt;
    }
};

struct UriParts {
    std::string host;
    int port = 80;
    std::string path_query;
};
std::optional<UriParts> parse_http_uri(const std::string& uri);

// Deterministic Bernoulli stream: splitmix64 draws against a fixed-point
// threshold, so two runs with one seed produce one sequence.
class OutcomeStream {
public:
    OutcomeStream(double win_probability, uint64_t seed);
    bool next_win();
    uint64_t draws() const { return draws_; }
    uint64_t wins() const { return wins_; }

private:
    uint64_t state_;
    uint64_t threshold_;
    bool always_ = false;
    uint64_t draws_ = 0;
    uint64_t wins_ = 0;
};

}  // namespace excall::oracle

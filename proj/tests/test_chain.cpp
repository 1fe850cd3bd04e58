#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "excall/assembler.hpp"
#include "excall/contracts.hpp"
#include "excall/oracle.hpp"
#include "test_util.hpp"

using namespace excall;
using testutil::Rng;

namespace {

constexpr const char* kOracleEndpoint = "http://o/excallrand";

// One sealer, one verifier, a locally signing oracle and the EXCALL
// betting contract. Drives virtual time in whole block periods.
struct Chain {
    crypto::KeyPair skp = testutil::keypair_from_byte(0x01);
    crypto::KeyPair okp = testutil::keypair_from_byte(0x02);
    ChainConfig cfg;
    oracle::LocalSigningPort port;
    oracle::NullPort vport;
    std::unique_ptr<Node> sealer;
    std::unique_ptr<Node> verifier;
    Address deployer{};
    Address bet_contract{};
    uint64_t now = 0;

    explicit Chain(double win_prob = 1.0, uint64_t seed = 7)
        : port(okp, win_prob, seed) {
        deployer.fill(0x0D);
        cfg.block_period_ms = 500;
        cfg.sealers = {skp.public_key};
        cfg.pinned_oracle_keys["http://o/"] = okp.public_key;
        sealer = std::make_unique<Node>(cfg, NodeRole::SEALER, skp, &port);
        verifier =
            std::make_unique<Node>(cfg, NodeRole::VERIFIER, std::nullopt,
                                   &vport);
    }

    Block produce() {
        now += cfg.block_period_ms;
        auto b = sealer->produce(now);
        REQUIRE(b.has_value());
        return *b;
    }

    Block produce_and_sync() {
        Block b = produce();
        auto rej = verifier->receive(b);
        if (rej) FAIL("verifier rejected: " << to_string(rej->reason));
        return b;
    }

    void deploy_bet() {
        auto p = vm::assemble(contracts::excall_bet_source(kOracleEndpoint));
        auto tx = make_deploy_tx(deployer, 0, p);
        REQUIRE_FALSE(sealer->submit_tx(tx).has_value());
        bet_contract = contract_address(deployer, 0);
        produce_and_sync();
        auto r = sealer->receipt(tx_identity(tx));
        REQUIRE(r.has_value());
        REQUIRE(r->second.status == TxStatus::SUCCESS);
    }

    Transaction bet_tx(const Address& punter, uint64_t nonce) const {
        return make_call_tx(punter, nonce, bet_contract, "betEXCALL");
    }
};

}  // namespace

TEST_CASE("mempool rejects stale and duplicate nonces, orders by arrival") {
    Chain c;
    c.deploy_bet();
    Address a{};
    a.fill(0xA1);
    Address b{};
    b.fill(0xB2);

    CHECK_FALSE(c.sealer->submit_tx(c.bet_tx(a, 0)).has_value());
    auto rej = c.sealer->submit_tx(c.bet_tx(a, 0));
    REQUIRE(rej.has_value());
    CHECK(rej->reason == RejectReason::DuplicateNonce);

    // Gap nonce parks until the gap closes.
    CHECK_FALSE(c.sealer->submit_tx(c.bet_tx(b, 2)).has_value());
    Block blk = c.produce_and_sync();
    REQUIRE(blk.transactions.size() == 1);
    CHECK(blk.transactions[0].sender == a);
    CHECK(c.sealer->mempool_size() == 1);

    // Close the gap; all three of b's txs dispatch in nonce order.
    CHECK_FALSE(c.sealer->submit_tx(c.bet_tx(b, 0)).has_value());
    CHECK_FALSE(c.sealer->submit_tx(c.bet_tx(b, 1)).has_value());
    blk = c.produce_and_sync();
    REQUIRE(blk.transactions.size() == 3);
    for (uint64_t i = 0; i < 3; ++i) {
        CHECK(blk.transactions[i].sender == b);
        CHECK(blk.transactions[i].account_nonce == i);
    }

    rej = c.sealer->submit_tx(c.bet_tx(a, 0));
    REQUIRE(rej.has_value());
    CHECK(rej->reason == RejectReason::StaleNonce);
}

TEST_CASE("a bet block carries a derived-nonce tuple and replicates") {
    Chain c;
    c.deploy_bet();
    Address punter{};
    punter.fill(0xA7);
    Transaction tx = c.bet_tx(punter, 0);
    REQUIRE_FALSE(c.sealer->submit_tx(tx).has_value());

    uint64_t port_calls_before = c.port.call_count();
    Block b = c.produce_and_sync();

    REQUIRE(b.transactions.size() == 1);
    REQUIRE(b.excall_extension.size() == 1);
    const auto& x = b.excall_extension[0];
    CHECK(x.tx_index == 0);
    CHECK(x.call_index == 0);
    CHECK(x.call.request_nonce == derive_call_nonce(intention_hash(b), 0, 0));
    CHECK(x.call.public_key == c.okp.public_key);
    CHECK(x.call.request_uri ==
          std::string(kOracleEndpoint) +
              "?nonce=" + hex_encode(x.call.request_nonce));
    CHECK(c.port.call_count() == port_calls_before + 1);
    CHECK(c.vport.call_count() == 0);

    auto r = c.sealer->receipt(tx_identity(tx));
    REQUIRE(r.has_value());
    CHECK(r->second.status == TxStatus::SUCCESS);
    CHECK(r->second.excall_count == 1);

    // Winning bet (probability 1) visible on both replicas.
    CHECK(c.sealer->storage_u64(c.bet_contract,
                                contracts::winnings_key(punter)) == 1);
    CHECK(c.verifier->storage_u64(c.bet_contract,
                                  contracts::winnings_key(punter)) == 1);
    CHECK(c.sealer->head_digest() == c.verifier->head_digest());
}

TEST_CASE("empty slots still produce valid blocks") {
    Chain c;
    for (int i = 0; i < 3; ++i) {
        Block b = c.produce_and_sync();
        CHECK(b.transactions.empty());
        CHECK(b.excall_extension.empty());
    }
    CHECK(c.sealer->height() == 3);
    CHECK(c.verifier->height() == 3);
}

TEST_CASE("production respects the block period") {
    Chain c;
    CHECK_FALSE(c.sealer->produce(499).has_value());
    CHECK(c.sealer->produce(500).has_value());
    CHECK_FALSE(c.sealer->produce(999).has_value());
    CHECK(c.sealer->produce(1000).has_value());
}

TEST_CASE("two sealers alternate turns round-robin over ten blocks") {
    auto k0 = testutil::keypair_from_byte(0x01);
    auto k1 = testutil::keypair_from_byte(0x05);
    ChainConfig cfg;
    cfg.block_period_ms = 500;
    cfg.sealers = {k0.public_key, k1.public_key};

    oracle::NullPort p0, p1;
    Node n0(cfg, NodeRole::SEALER, k0, &p0);
    Node n1(cfg, NodeRole::SEALER, k1, &p1);

    uint64_t now = 0;
    for (int i = 1; i <= 10; ++i) {
        now += cfg.block_period_ms;
        auto b0 = n0.produce(now);
        auto b1 = n1.produce(now);
        // Exactly one of the two is on turn: number % 2 picks the key.
        bool turn1 = (uint64_t(i) % 2) == 1;
        REQUIRE(b0.has_value() != b1.has_value());
        Block b = turn1 ? *b1 : *b0;
        CHECK(b.header.sealer == crypto::address_of(
                                     cfg.sealers[uint64_t(i) % 2]));
        CHECK(Node::verify_seal(b, cfg));
        // The off-turn node verifies and applies its peer's block.
        Node& other = turn1 ? n0 : n1;
        auto rej = other.receive(b);
        CHECK_FALSE(rej.has_value());
    }
    CHECK(n0.height() == 10);
    CHECK(n0.head_digest() == n1.head_digest());
}

TEST_CASE("an out-of-turn seal is rejected as WrongSealerTurn") {
    auto k0 = testutil::keypair_from_byte(0x01);
    auto k1 = testutil::keypair_from_byte(0x05);
    ChainConfig cfg;
    cfg.block_period_ms = 500;
    cfg.sealers = {k0.public_key, k1.public_key};
    Node n0(cfg, NodeRole::SEALER, k0, nullptr);
    Node n1(cfg, NodeRole::SEALER, k1, nullptr);
    Node watcher(cfg, NodeRole::VERIFIER, std::nullopt, nullptr);

    // Block 1 is sealer 1's turn; let sealer 0 forge it anyway.
    Block b = n0.build_block(500);
    n0.finalize_excalls(b);
    b.header.sealer = crypto::address_of(k0.public_key);
    n0.seal_block(b);
    auto rej = watcher.verify_block(b);
    REQUIRE(rej.has_value());
    CHECK(rej->reason == RejectReason::WrongSealerTurn);
}

TEST_CASE("verifier pinpoints each tampering with a specific reason") {
    Chain c;
    c.deploy_bet();
    Address punter{};
    punter.fill(0xA8);
    REQUIRE_FALSE(c.sealer->submit_tx(c.bet_tx(punter, 0)).has_value());

    c.now += c.cfg.block_period_ms;
    Block honest = c.produce();  // applied on the sealer only
    REQUIRE(honest.excall_extension.size() == 1);
    REQUIRE_FALSE(c.verifier->verify_block(honest).has_value());

    auto reseal = [&](Block& b) { c.sealer->seal_block(b); };
    auto expect = [&](const Block& b, RejectReason want) {
        auto rej = c.verifier->verify_block(b);
        REQUIRE(rej.has_value());
        CHECK(rej->reason == want);
        CHECK(to_string(rej->reason) == std::string(to_string(want)));
    };
    const Digest ih = intention_hash(honest);

    SUBCASE("bit-flipped tuple signature") {
        Block b = honest;
        b.excall_extension[0].call.signature[3] ^= 0x40;
        reseal(b);
        expect(b, RejectReason::InvalidTupleSignature);
    }
    SUBCASE("tampered response re-signed by the right key") {
        // Even the real oracle key cannot help once the response changed:
        // the state root no longer matches what the tuple replays to.
        Block b = honest;
        auto& call = b.excall_extension[0].call;
        call.response = Bytes{'0'};
        call.signature = crypto::sign_response(
            testutil::keypair_from_byte(0x02).secret_key, call.response,
            call.request_nonce);
        reseal(b);
        expect(b, RejectReason::StateRootMismatch);
    }
    SUBCASE("transplanted nonce") {
        Block b = honest;
        auto& call = b.excall_extension[0].call;
        Nonce stale{};
        stale.fill(0x77);
        call.request_nonce = stale;
        call.signature = crypto::sign_response(
            testutil::keypair_from_byte(0x02).secret_key, call.response,
            stale);
        reseal(b);
        expect(b, RejectReason::NonceMismatch);
    }
    SUBCASE("unpinned oracle key") {
        Block b = honest;
        auto rogue = testutil::keypair_from_byte(0x66);
        auto& call = b.excall_extension[0].call;
        call.public_key = rogue.public_key;
        call.signature = crypto::sign_response(rogue.secret_key, call.response,
                                               call.request_nonce);
        reseal(b);
        expect(b, RejectReason::UnknownOraclePublicKey);
    }
    SUBCASE("redirected URI under the pinned prefix") {
        Block b = honest;
        auto& call = b.excall_extension[0].call;
        call.request_uri =
            "http://o/other?nonce=" + hex_encode(call.request_nonce);
        reseal(b);
        expect(b, RejectReason::UriMismatch);
    }
    SUBCASE("dropped extension entry") {
        // Indistinguishable from a sealer that got no response, except
        // through the state commitment: the recorded win is missing.
        Block b = honest;
        b.excall_extension.clear();
        reseal(b);
        expect(b, RejectReason::StateRootMismatch);
    }
    SUBCASE("extra extension entry") {
        Block b = honest;
        ExtensionEntry x = b.excall_extension[0];
        x.call_index = 1;
        x.call.request_nonce = derive_call_nonce(ih, 0, 1);
        x.call.request_uri = std::string(kOracleEndpoint) +
                             "?nonce=" + hex_encode(x.call.request_nonce);
        x.call.signature = crypto::sign_response(
            testutil::keypair_from_byte(0x02).secret_key, x.call.response,
            x.call.request_nonce);
        b.excall_extension.push_back(x);
        reseal(b);
        expect(b, RejectReason::ExtraExtensionEntry);
    }
    SUBCASE("duplicate extension coordinates") {
        Block b = honest;
        b.excall_extension.push_back(b.excall_extension[0]);
        reseal(b);
        expect(b, RejectReason::DuplicateExtensionEntry);
    }
    SUBCASE("extension entry pointing at no transaction") {
        Block b = honest;
        b.excall_extension[0].tx_index = 9;
        reseal(b);
        expect(b, RejectReason::MalformedExtension);
    }
    SUBCASE("forged state root") {
        Block b = honest;
        b.header.state_root[0] ^= 1;
        reseal(b);
        expect(b, RejectReason::StateRootMismatch);
    }
    SUBCASE("mutation without re-sealing") {
        Block b = honest;
        b.excall_extension[0].call.response = Bytes{'0'};
        expect(b, RejectReason::BadSeal);
    }
    SUBCASE("stale parent") {
        Block b = honest;
        b.header.parent_digest[0] ^= 1;
        reseal(b);
        expect(b, RejectReason::BadParent);
    }
    SUBCASE("skipped number") {
        Block b = honest;
        b.header.number += 1;
        reseal(b);
        // number is under the parent-linkage checks first
        expect(b, RejectReason::BadNumber);
    }
    SUBCASE("timestamp before the slot") {
        Block b = honest;
        b.header.timestamp = 0;
        reseal(b);
        expect(b, RejectReason::BadTimestamp);
    }
    SUBCASE("dropped transaction") {
        Block b = honest;
        b.transactions.clear();
        b.excall_extension.clear();
        reseal(b);
        expect(b, RejectReason::TxRootMismatch);
    }
    SUBCASE("forged intent root") {
        Block b = honest;
        b.header.intent_root[0] ^= 1;
        reseal(b);
        expect(b, RejectReason::IntentRootMismatch);
    }
}

TEST_CASE("verification replays without any network access") {
    Chain c;
    c.deploy_bet();
    Address punter{};
    punter.fill(0xA9);
    for (uint64_t i = 0; i < 5; ++i)
        REQUIRE_FALSE(c.sealer->submit_tx(c.bet_tx(punter, i)).has_value());
    c.produce_and_sync();
    CHECK(c.port.call_count() > 0);
    CHECK(c.vport.call_count() == 0);
    CHECK(c.verifier->storage_u64(c.bet_contract,
                                  contracts::winnings_key(punter)) == 5);
}

TEST_CASE("oracle outage: tx fails, block still replicates") {
    auto skp = testutil::keypair_from_byte(0x01);
    auto okp = testutil::keypair_from_byte(0x02);
    ChainConfig cfg;
    cfg.block_period_ms = 500;
    cfg.sealers = {skp.public_key};
    cfg.pinned_oracle_keys["http://o/"] = okp.public_key;

    oracle::NullPort dead_oracle, vport;
    Node sealer(cfg, NodeRole::SEALER, skp, &dead_oracle);
    Node verifier(cfg, NodeRole::VERIFIER, std::nullopt, &vport);

    Address deployer{};
    deployer.fill(0x0D);
    auto p = vm::assemble(contracts::excall_bet_source(kOracleEndpoint));
    REQUIRE_FALSE(
        sealer.submit_tx(make_deploy_tx(deployer, 0, p)).has_value());
    auto b1 = sealer.produce(500);
    REQUIRE(b1.has_value());
    REQUIRE_FALSE(verifier.receive(*b1).has_value());
    Address contract = contract_address(deployer, 0);

    Address punter{};
    punter.fill(0xAA);
    Transaction bet = make_call_tx(punter, 0, contract, "betEXCALL");
    REQUIRE_FALSE(sealer.submit_tx(bet).has_value());
    auto b2 = sealer.produce(1000);
    REQUIRE(b2.has_value());
    CHECK(b2->excall_extension.empty());
    REQUIRE_FALSE(verifier.receive(*b2).has_value());

    // Sealer knows the call never came back; the verifier can only see
    // an unverifiable call. Both roll the state back identically.
    auto rs = sealer.receipt(tx_identity(bet));
    REQUIRE(rs.has_value());
    CHECK(rs->second.status == TxStatus::FAILED_EXCALL_NO_RESPONSE);
    auto rv = verifier.receipt(tx_identity(bet));
    REQUIRE(rv.has_value());
    CHECK(rv->second.status == TxStatus::FAILED_EXCALL_UNVERIFIED);
    CHECK(sealer.head().state_root == verifier.head().state_root);
    CHECK(sealer.storage_u64(contract, contracts::winnings_key(punter)) == 0);
    // The account nonce still advanced: the bet was consumed, not lost.
    CHECK(sealer.state().account_nonce(punter) == 1);
}

TEST_CASE("initiator-attached tuples ride inside the transaction") {
    Chain c;
    c.deploy_bet();
    Address punter{};
    punter.fill(0xAB);

    // The initiator queried the oracle itself with its own nonce.
    Nonce nonce{};
    nonce.fill(0x5A);
    VerifiableExternalCall tuple;
    tuple.request_nonce = nonce;
    tuple.request_uri =
        std::string(kOracleEndpoint) + "?nonce=" + hex_encode(nonce);
    tuple.public_key = c.okp.public_key;
    tuple.response = Bytes{'1'};
    tuple.signature =
        crypto::sign_response(c.okp.secret_key, tuple.response, nonce);

    Transaction tx = c.bet_tx(punter, 0);
    tx.mode_flag = ExcallMode::INITIATOR_ATTACHED;
    tx.excalls = {tuple};

    SUBCASE("valid tuple settles in its block") {
        REQUIRE_FALSE(c.sealer->submit_tx(tx).has_value());
        uint64_t calls_before = c.port.call_count();
        Block b = c.produce_and_sync();
        CHECK(b.excall_extension.empty());  // travels in the tx instead
        CHECK(c.port.call_count() == calls_before);  // no live call made
        auto r = c.sealer->receipt(tx_identity(tx));
        REQUIRE(r.has_value());
        CHECK(r->second.status == TxStatus::SUCCESS);
        CHECK(c.verifier->storage_u64(c.bet_contract,
                                      contracts::winnings_key(punter)) == 1);
    }
    SUBCASE("tampered tuple is rejected at submission") {
        tx.excalls[0].response = Bytes{'0'};
        auto rej = c.sealer->submit_tx(tx);
        REQUIRE(rej.has_value());
        CHECK(rej->reason == RejectReason::InvalidAttachedCall);
    }
    SUBCASE("unpinned signer is rejected at submission") {
        auto rogue = testutil::keypair_from_byte(0x67);
        tx.excalls[0].public_key = rogue.public_key;
        tx.excalls[0].signature = crypto::sign_response(
            rogue.secret_key, tx.excalls[0].response, nonce);
        auto rej = c.sealer->submit_tx(tx);
        REQUIRE(rej.has_value());
        CHECK(rej->reason == RejectReason::InvalidAttachedCall);
    }
    SUBCASE("attached mode without tuples is malformed") {
        tx.excalls.clear();
        auto rej = c.sealer->submit_tx(tx);
        REQUIRE(rej.has_value());
        CHECK(rej->reason == RejectReason::InvalidAttachedCall);
    }
}

TEST_CASE("genesis commits to the chain configuration") {
    auto skp = testutil::keypair_from_byte(0x01);
    ChainConfig a;
    a.sealers = {skp.public_key};
    ChainConfig b = a;
    b.block_period_ms = a.block_period_ms + 1;
    CHECK(Node::make_genesis(a).header.parent_digest ==
          a.config_digest());
    CHECK(Node::make_genesis(a).header.parent_digest !=
          Node::make_genesis(b).header.parent_digest);

    // A node configured differently cannot accept the other chain's blocks.
    Node na(a, NodeRole::SEALER, skp, nullptr);
    Node nb(b, NodeRole::VERIFIER, std::nullopt, nullptr);
    auto blk = na.produce(a.block_period_ms);
    REQUIRE(blk.has_value());
    auto rej = nb.verify_block(*blk);
    REQUIRE(rej.has_value());
    CHECK(rej->reason == RejectReason::BadParent);
}

TEST_CASE("pinned keys match by longest prefix") {
    auto k1 = testutil::keypair_from_byte(0x02);
    auto k2 = testutil::keypair_from_byte(0x03);
    ChainConfig cfg;
    cfg.sealers = {testutil::keypair_from_byte(0x01).public_key};
    cfg.pinned_oracle_keys["http://o/"] = k1.public_key;
    cfg.pinned_oracle_keys["http://o/special/"] = k2.public_key;

    REQUIRE(cfg.pinned_key_for("http://o/excallrand?x=1") != nullptr);
    CHECK(*cfg.pinned_key_for("http://o/excallrand?x=1") == k1.public_key);
    CHECK(*cfg.pinned_key_for("http://o/special/feed") == k2.public_key);
    CHECK(cfg.pinned_key_for("http://elsewhere/") == nullptr);
}

TEST_CASE("block log round trips and replays to the same chain") {
    std::string log_path =
        (std::filesystem::temp_directory_path() / "excall_chain_log.bin")
            .string();
    std::filesystem::remove(log_path);

    Chain c;
    c.sealer->set_log_path(log_path);
    c.deploy_bet();
    Rng rng(41);
    std::vector<Address> punters;
    for (int i = 0; i < 4; ++i) {
        Address a{};
        a.fill(uint8_t(0xC0 + i));
        punters.push_back(a);
    }
    std::vector<uint64_t> nonces(4, 0);
    for (int blk = 0; blk < 20; ++blk) {
        size_t bets = rng() % 4;
        for (size_t j = 0; j < bets; ++j) {
            size_t who = rng() % punters.size();
            REQUIRE_FALSE(
                c.sealer->submit_tx(c.bet_tx(punters[who], nonces[who]++))
                    .has_value());
        }
        c.produce_and_sync();
    }

    auto blocks = Node::read_log(log_path);
    REQUIRE(blocks.size() == 21);  // deploy block + 20 bet blocks

    // A cold replica replays the log to a bit-identical head.
    oracle::NullPort cold_port;
    Node cold(c.cfg, NodeRole::VERIFIER, std::nullopt, &cold_port);
    REQUIRE_FALSE(cold.replay(blocks).has_value());
    CHECK(cold.head_digest() == c.sealer->head_digest());
    CHECK(cold.head().state_root == c.sealer->head().state_root);
    CHECK(cold.height() == c.sealer->height());
    CHECK(cold_port.call_count() == 0);
    for (size_t i = 0; i < punters.size(); ++i)
        CHECK(cold.storage_u64(c.bet_contract,
                               contracts::winnings_key(punters[i])) ==
              c.sealer->storage_u64(c.bet_contract,
                                    contracts::winnings_key(punters[i])));

    // Round trip of the serialized blocks themselves.
    for (const auto& b : blocks) {
        Bytes enc = encode(b);
        CHECK(decode_exact<Block>(
                  enc, [](Decoder& d) { return decode_block(d); }) == b);
    }
    std::filesystem::remove(log_path);
}

TEST_CASE("twin replicas stay in lockstep over 100 random blocks") {
    Chain c(0.5, 99);
    c.deploy_bet();
    Rng rng(43);
    Address punter{};
    punter.fill(0xD1);
    uint64_t nonce = 0;
    for (int blk = 0; blk < 100; ++blk) {
        size_t bets = rng() % 3;
        for (size_t j = 0; j < bets; ++j)
            REQUIRE_FALSE(
                c.sealer->submit_tx(c.bet_tx(punter, nonce++)).has_value());
        c.produce_and_sync();
        REQUIRE(c.sealer->head_digest() == c.verifier->head_digest());
        REQUIRE(c.sealer->head().state_root == c.verifier->head().state_root);
    }
    CHECK(c.sealer->height() == 101);
    CHECK(c.vport.call_count() == 0);
}

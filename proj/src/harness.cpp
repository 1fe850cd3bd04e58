#include "excall/harness.hpp"

#include <chrono>
#include <sstream>
#include <thread>

#include "excall/assembler.hpp"
#include "excall/contracts.hpp"

namespace excall::harness {

namespace {

crypto::KeyPair keypair_from_tag(uint8_t tag, uint8_t index = 0) {
    std::array<uint8_t, 32> seed{};
    seed[0] = tag;
    seed[1] = index;
    return crypto::keygen(seed);
}

Address address_from_tag(uint8_t tag, uint8_t index = 0) {
    return crypto::address_of(keypair_from_tag(tag, index).public_key);
}

constexpr uint8_t kSealerTag = 0x01;
constexpr uint8_t kOracleTag = 0x02;
constexpr uint8_t kRelayerTag = 0x03;
constexpr uint8_t kDeployerTag = 0x04;
constexpr uint8_t kInitiatorTag = 0x10;

}  // namespace

const char* to_string(Impl impl) {
    return impl == Impl::EXCALL ? "excall" : "standard";
}

uint64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

bool drive(netsim::SimNetwork& net, oracle::Relayer* relayer,
           uint64_t deadline_ms, const std::function<bool()>& done) {
    while (now_ms() < deadline_ms) {
        net.tick(now_ms());
        if (relayer) relayer->poll();
        if (done()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    return done();
}

Deployment deploy_samples(netsim::SimNetwork& net, size_t sealer_index,
                          const Address& deployer,
                          const std::string& excall_endpoint,
                          const Address& relayer_address,
                          uint64_t timeout_ms,
                          const std::string& contracts_dir) {
    std::string dir = contracts_dir.empty() ? contracts::contracts_dir()
                                            : contracts_dir;
    ContractProgram standard =
        vm::assemble(contracts::standard_bet_source(dir));
    ContractProgram excall_bet =
        vm::assemble(contracts::excall_bet_source(excall_endpoint, dir));

    Node& sealer = net.node(sealer_index);
    uint64_t nonce = sealer.state().account_nonce(deployer);

    Bytes init_args(word_from_address(relayer_address).begin(),
                    word_from_address(relayer_address).end());
    Transaction d1 = make_deploy_tx(deployer, nonce, standard, init_args);
    Transaction d2 = make_deploy_tx(deployer, nonce + 1, excall_bet);
    if (auto rej = sealer.submit_tx(d1))
        throw std::runtime_error("deploy rejected: " + rej->detail);
    if (auto rej = sealer.submit_tx(d2))
        throw std::runtime_error("deploy rejected: " + rej->detail);

    Deployment out;
    out.standard_contract = contract_address(deployer, nonce);
    out.excall_contract = contract_address(deployer, nonce + 1);
    out.standard_tx = tx_identity(d1);
    out.excall_tx = tx_identity(d2);

    bool ok = drive(net, nullptr, now_ms() + timeout_ms, [&] {
        auto r1 = sealer.receipt(out.standard_tx);
        auto r2 = sealer.receipt(out.excall_tx);
        return r1 && r2;
    });
    if (!ok) throw std::runtime_error("deploy timed out");
    for (const auto& d : {out.standard_tx, out.excall_tx}) {
        auto r = sealer.receipt(d);
        if (!r || r->second.status != TxStatus::SUCCESS)
            throw std::runtime_error("deploy failed");
    }
    return out;
}

uint64_t ExperimentReport::min_wall_ms() const {
    uint64_t m = UINT64_MAX;
    for (const auto& r : repeats) m = std::min(m, r.wall_ms);
    return m;
}

uint64_t ExperimentReport::max_wall_ms() const {
    uint64_t m = 0;
    for (const auto& r : repeats) m = std::max(m, r.wall_ms);
    return m;
}

bool ExperimentReport::all_complete() const {
    for (const auto& r : repeats)
        if (!r.complete) return false;
    return true;
}

namespace {

RepeatResult run_one_repeat(const ExperimentConfig& cfg, uint32_t repeat) {
    RepeatResult result;

    auto sealer_kp = keypair_from_tag(kSealerTag);
    auto oracle_kp = keypair_from_tag(kOracleTag);
    auto relayer_kp = keypair_from_tag(kRelayerTag);

    oracle::OracleService service(oracle_kp, cfg.win_probability,
                                  cfg.oracle_seed + repeat);
    int port = service.start();
    std::string endpoint = service.base_url() + "/excallrand";
    (void)port;

    ChainConfig chain_cfg;
    chain_cfg.block_period_ms = cfg.block_period_ms;
    chain_cfg.sealers = {sealer_kp.public_key};
    chain_cfg.pinned_oracle_keys[service.base_url()] = oracle_kp.public_key;
    chain_cfg.max_txs_per_block = cfg.max_txs_per_block;

    oracle::HttpExcallPort sealer_port(chain_cfg.excall_timeout_ms);
    std::vector<std::unique_ptr<oracle::NullPort>> verifier_ports;

    netsim::SimNetwork net(0);
    size_t sealer_idx =
        net.spawn_node(NodeRole::SEALER, chain_cfg, sealer_kp, &sealer_port);
    std::vector<size_t> verifier_idx;
    for (uint32_t i = 0; i < cfg.verifiers; ++i) {
        verifier_ports.push_back(std::make_unique<oracle::NullPort>());
        verifier_idx.push_back(net.spawn_node(NodeRole::VERIFIER, chain_cfg,
                                              std::nullopt,
                                              verifier_ports.back().get()));
    }
    Node& sealer = net.node(sealer_idx);

    Address deployer = address_from_tag(kDeployerTag);
    Address relayer_addr = crypto::address_of(relayer_kp.public_key);
    Deployment dep =
        deploy_samples(net, sealer_idx, deployer, endpoint,
                       relayer_addr, cfg.timeout_periods * cfg.block_period_ms,
                       cfg.contracts_dir);

    const Address contract = cfg.impl == Impl::EXCALL ? dep.excall_contract
                                                      : dep.standard_contract;
    const char* bet_function =
        cfg.impl == Impl::EXCALL ? "betEXCALL" : "beginBetOracle";

    std::optional<oracle::Relayer> relayer;
    if (cfg.impl == Impl::STANDARD_ORACLE) {
        oracle::Relayer::Options opt;
        opt.contract = dep.standard_contract;
        opt.win_probability = cfg.win_probability;
        opt.rng_seed = cfg.oracle_seed + repeat;
        relayer.emplace(sealer, relayer_kp, opt);
    }

    // Start right after a fresh block to reduce variance.
    uint64_t fresh_height = sealer.height();
    drive(net, relayer ? &*relayer : nullptr,
          now_ms() + 4 * cfg.block_period_ms,
          [&] { return sealer.height() > fresh_height; });

    const uint64_t start_height = sealer.height();
    const uint64_t t0 = now_ms();

    // Concurrent initiators, one account and nonce sequence each.
    std::vector<std::vector<Digest>> bet_digests(cfg.initiators);
    std::vector<Address> punters;
    for (uint32_t i = 0; i < cfg.initiators; ++i)
        punters.push_back(address_from_tag(kInitiatorTag, uint8_t(i)));
    {
        std::vector<std::thread> workers;
        for (uint32_t i = 0; i < cfg.initiators; ++i) {
            workers.emplace_back([&, i] {
                for (uint32_t k = 0; k < cfg.iterations; ++k) {
                    Transaction tx = make_call_tx(punters[i], k, contract,
                                                  bet_function);
                    bet_digests[i].push_back(tx_identity(tx));
                    while (auto rej = sealer.submit_tx(tx)) {
                        if (rej->reason == RejectReason::StaleNonce) break;
                        std::this_thread::sleep_for(
                            std::chrono::milliseconds(1));
                    }
                }
            });
        }
        for (auto& w : workers) w.join();
    }

    const uint64_t total_bets = uint64_t(cfg.initiators) * cfg.iterations;
    auto all_done = [&] {
        for (const auto& per : bet_digests)
            for (const auto& d : per)
                if (!sealer.receipt(d)) return false;
        if (cfg.impl == Impl::STANDARD_ORACLE) {
            if (relayer->answered() < total_bets) return false;
            for (const auto& [key, digest] : relayer->callbacks())
                if (!sealer.receipt(digest)) return false;
        }
        return true;
    };

    uint64_t deadline = t0 + cfg.timeout_periods * cfg.block_period_ms;
    result.complete =
        drive(net, relayer ? &*relayer : nullptr, deadline, all_done);
    result.wall_ms = now_ms() - t0;
    result.blocks = sealer.height() - start_height;

    for (uint32_t i = 0; i < cfg.initiators; ++i) {
        for (const auto& d : bet_digests[i]) {
            auto r = sealer.receipt(d);
            if (!r) continue;
            if (r->second.status != TxStatus::SUCCESS) ++result.failed_txs;
            // An EXCALL bet resolves inside its own block.
            if (cfg.impl == Impl::EXCALL) result.block_spans.push_back(1);
        }
    }
    if (cfg.impl == Impl::STANDARD_ORACLE) {
        // Span = callback block - bet block + 1, matched through events.
        Word topic = contracts::topic_bet_placed();
        auto events = sealer.events_by_topic(topic, 1);
        for (const auto& [block_num, ev] : events) {
            if (ev.contract != dep.standard_contract || ev.data.size() != 64)
                continue;
            Word punter_w, ref_w;
            std::memcpy(punter_w.data(), ev.data.data(), 32);
            std::memcpy(ref_w.data(), ev.data.data() + 32, 32);
            auto cb = relayer->callbacks().find(
                {address_from_word(punter_w), word_to_u64(ref_w)});
            if (cb == relayer->callbacks().end()) continue;
            auto r = sealer.receipt(cb->second);
            if (!r) continue;
            if (r->second.status != TxStatus::SUCCESS) ++result.failed_txs;
            result.block_spans.push_back(
                uint32_t(r->first - block_num + 1));
        }
    }

    for (const auto& p : punters)
        result.total_winnings +=
            sealer.storage_u64(contract, contracts::winnings_key(p));
    result.oracle_wins = cfg.impl == Impl::EXCALL ? service.wins()
                                                  : relayer->local_wins();
    for (size_t vi : verifier_idx)
        result.verifier_call_counts += net.node(vi).port()->call_count();

    service.stop();
    return result;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    ExperimentReport report;
    report.config = cfg;
    for (uint32_t r = 0; r < cfg.repeats; ++r)
        report.repeats.push_back(run_one_repeat(cfg, r));
    return report;
}

std::string csv_header() {
    return "impl,initiators,iterations,repeat,wall_ms,blocks,failed_txs";
}

void emit_csv(std::ostream& out, const ExperimentReport& report) {
    for (uint32_t r = 0; r < report.repeats.size(); ++r) {
        const auto& rr = report.repeats[r];
        out << to_string(report.config.impl) << ','
            << report.config.initiators << ',' << report.config.iterations
            << ',' << r << ',' << rr.wall_ms << ',' << rr.blocks << ','
            << rr.failed_txs << '\n';
    }
}

std::string summary_text(const std::vector<ExperimentReport>& reports) {
    std::ostringstream out;
    for (const auto& rep : reports) {
        out << to_string(rep.config.impl) << " initiators="
            << rep.config.initiators << " iterations="
            << rep.config.iterations << " wall_ms=[" << rep.min_wall_ms()
            << ".." << rep.max_wall_ms() << "]"
            << (rep.all_complete() ? "" : " INCOMPLETE") << "\n";
    }
    for (const auto& ex : reports) {
        if (ex.config.impl != Impl::EXCALL) continue;
        for (const auto& st : reports) {
            if (st.config.impl != Impl::STANDARD_ORACLE ||
                st.config.initiators != ex.config.initiators ||
                st.config.iterations != ex.config.iterations)
                continue;
            double ratio = st.min_wall_ms() == 0
                               ? 0.0
                               : double(ex.min_wall_ms()) /
                                     double(st.min_wall_ms());
            out << "ratio excall/standard initiators="
                << ex.config.initiators << " iterations="
                << ex.config.iterations << " = " << ratio << "\n";
        }
    }
    return out.str();
}

int run_demo(uint64_t block_period_ms, std::ostream& out,
             const std::string& contracts_dir) {
    ExperimentConfig cfg;
    cfg.impl = Impl::EXCALL;
    cfg.initiators = 1;
    cfg.iterations = 1;
    cfg.repeats = 1;
    cfg.block_period_ms = block_period_ms;
    cfg.win_probability = 1.0;
    cfg.contracts_dir = contracts_dir;
    out << "running one EXCALL bet (win probability 1)...\n";
    ExperimentReport rep = run_experiment(cfg);
    const auto& r = rep.repeats[0];
    out << "complete: " << (r.complete ? "yes" : "no") << "\n"
        << "wall_ms: " << r.wall_ms << "\n"
        << "blocks: " << r.blocks << "\n"
        << "failed txs: " << r.failed_txs << "\n"
        << "winnings: " << r.total_winnings << "\n"
        << "verifier external calls: " << r.verifier_call_counts << "\n";
    return r.complete && r.failed_txs == 0 && r.total_winnings == 1 ? 0 : 1;
}

}  // namespace excall::harness

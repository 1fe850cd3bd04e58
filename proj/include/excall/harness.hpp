#pragma once

#include <ostream>

#include "excall/netsim.hpp"
#include "excall/relayer.hpp"

namespace excall::harness {

enum class Impl { STANDARD_ORACLE, EXCALL };

const char* to_string(Impl impl);

struct ExperimentConfig {
    Impl impl = Impl::EXCALL;
    uint32_t initiators = 1;   // 1..4
    uint32_t iterations = 10;  // bets per initiator
    uint64_t block_period_ms = 500;
    uint32_t repeats = 4;
    double win_probability = 0.5;
    uint64_t oracle_seed = 42;
    uint32_t verifiers = 1;
    uint32_t max_txs_per_block = 256;
    // Run is marked incomplete after timeout_periods * block_period_ms.
    uint64_t timeout_periods = 100;
    std::string contracts_dir;  // empty = compiled-in default
    bool verbose = false;
};

struct RepeatResult {
    uint64_t wall_ms = 0;
    uint64_t blocks = 0;
    uint64_t failed_txs = 0;
    bool complete = false;
    std::vector<uint32_t> block_spans;  // blocks from bet to resolution
    uint64_t total_winnings = 0;
    uint64_t oracle_wins = 0;  // '1' outcomes drawn for this repeat
    uint64_t verifier_call_counts = 0;  // summed over verifier nodes
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<RepeatResult> repeats;

    uint64_t min_wall_ms() const;
    uint64_t max_wall_ms() const;
    bool all_complete() const;
};

ExperimentReport run_experiment(const ExperimentConfig& config);

// CSV: impl,initiators,iterations,repeat,wall_ms,blocks,failed_txs
std::string csv_header();
void emit_csv(std::ostream& out, const ExperimentReport& report);
// Min/max per configuration plus EXCALL/STANDARD wall-time ratios for
// matching configurations.
std::string summary_text(const std::vector<ExperimentReport>& reports);

// Assembles and deploys both betting contracts on a running network.
struct Deployment {
    Address standard_contract{};
    Address excall_contract{};
    Digest standard_tx{};
    Digest excall_tx{};
};

// Submits the two deploy txs from `deployer` and waits for inclusion by
// driving the network in wall-clock time.
Deployment deploy_samples(netsim::SimNetwork& net, size_t sealer_index,
                          const Address& deployer,
                          const std::string& excall_endpoint,
                          const Address& relayer_address,
                          uint64_t timeout_ms,
                          const std::string& contracts_dir = "");

uint64_t now_ms();

// Wall-clock driver: ticks the network (and polls the relayer) until
// `done` returns true or the deadline passes. Returns completion.
bool drive(netsim::SimNetwork& net, oracle::Relayer* relayer,
           uint64_t deadline_ms, const std::function<bool()>& done);

// One verbose end-to-end bet on each implementation.
int run_demo(uint64_t block_period_ms, std::ostream& out,
             const std::string& contracts_dir = "");

}  // namespace excall::harness

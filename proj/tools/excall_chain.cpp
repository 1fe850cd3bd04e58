#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "excall/harness.hpp"

using namespace excall;

namespace {

struct RunOptions {
    std::string impl = "excall";
    uint32_t initiators = 1;
    uint32_t iterations = 10;
    uint64_t period_ms = 500;
    uint32_t repeats = 4;
    std::string oracle_url;  // reserved: in-process service is spawned
    std::string out_path;
    std::string config_path;
    double win_prob = 0.5;
    uint64_t seed = 42;
};

void apply_config_file(RunOptions& opt) {
    if (opt.config_path.empty()) return;
    std::ifstream in(opt.config_path);
    if (!in) throw std::runtime_error("cannot open config: " + opt.config_path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (j.contains("impl")) opt.impl = j["impl"].get<std::string>();
    if (j.contains("initiators")) opt.initiators = j["initiators"];
    if (j.contains("iterations")) opt.iterations = j["iterations"];
    if (j.contains("period_ms")) opt.period_ms = j["period_ms"];
    if (j.contains("repeats")) opt.repeats = j["repeats"];
    if (j.contains("oracle_url")) opt.oracle_url = j["oracle_url"];
    if (j.contains("out")) opt.out_path = j["out"];
    if (j.contains("win_prob")) opt.win_prob = j["win_prob"];
    if (j.contains("seed")) opt.seed = j["seed"];
}

int cmd_run(const RunOptions& opt) {
    harness::ExperimentConfig cfg;
    if (opt.impl == "excall") cfg.impl = harness::Impl::EXCALL;
    else if (opt.impl == "standard") cfg.impl = harness::Impl::STANDARD_ORACLE;
    else {
        std::cerr << "--impl must be 'standard' or 'excall'\n";
        return 2;
    }
    cfg.initiators = opt.initiators;
    cfg.iterations = opt.iterations;
    cfg.block_period_ms = opt.period_ms;
    cfg.repeats = opt.repeats;
    cfg.win_probability = opt.win_prob;
    cfg.oracle_seed = opt.seed;

    harness::ExperimentReport report = harness::run_experiment(cfg);

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!opt.out_path.empty()) {
        file.open(opt.out_path, std::ios::trunc);
        if (!file) {
            std::cerr << "cannot write " << opt.out_path << "\n";
            return 2;
        }
        out = &file;
    }
    *out << harness::csv_header() << "\n";
    harness::emit_csv(*out, report);
    std::cout << harness::summary_text({report});
    return report.all_complete() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"proof-of-authority chain with verifiable external calls"};
    app.require_subcommand(1);

    RunOptions run_opt;
    auto* run = app.add_subcommand("run", "run a throughput experiment");
    run->add_option("--impl", run_opt.impl, "standard | excall");
    run->add_option("--initiators", run_opt.initiators, "concurrent punters")
        ->check(CLI::Range(1, 64));
    run->add_option("--iterations", run_opt.iterations, "bets per initiator");
    run->add_option("--period-ms", run_opt.period_ms, "block period");
    run->add_option("--repeats", run_opt.repeats, "repeats per configuration");
    run->add_option("--oracle-url", run_opt.oracle_url,
                    "external oracle URL (default: in-process service)");
    run->add_option("--out", run_opt.out_path, "CSV output file");
    run->add_option("--win-prob", run_opt.win_prob, "oracle win probability");
    run->add_option("--seed", run_opt.seed, "oracle rng seed");
    run->add_option("--config", run_opt.config_path,
                    "JSON config file supplying any flag");

    struct {
        std::string bind = "127.0.0.1";
        int port = 8547;
        uint64_t seed = 42;
        double win_prob = 0.5;
        uint64_t key_seed = 2;
    } serve_opt;
    auto* serve = app.add_subcommand("serve-oracle",
                                     "run the signing oracle HTTP service");
    serve->add_option("--bind", serve_opt.bind, "bind address");
    serve->add_option("--port", serve_opt.port, "port (0 = any)");
    serve->add_option("--seed", serve_opt.seed, "outcome rng seed");
    serve->add_option("--win-prob", serve_opt.win_prob, "win probability");
    serve->add_option("--key-seed", serve_opt.key_seed,
                      "deterministic key seed byte");

    uint64_t demo_period = 500;
    auto* demo = app.add_subcommand("demo", "one end-to-end bet with trace");
    demo->add_option("--period-ms", demo_period, "block period");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            apply_config_file(run_opt);
            return cmd_run(run_opt);
        }
        if (serve->parsed()) {
            std::array<uint8_t, 32> seed{};
            seed[0] = uint8_t(serve_opt.key_seed);
            auto kp = crypto::keygen(seed);
            oracle::OracleService service(kp, serve_opt.win_prob,
                                          serve_opt.seed);
            int port = service.start(serve_opt.bind, serve_opt.port);
            std::cout << "oracle listening on http://" << serve_opt.bind << ":"
                      << port << "\npubkey " << hex_encode(kp.public_key)
                      << "\n";
            // Serve until killed.
            while (true)
                std::this_thread::sleep_for(std::chrono::seconds(3600));
        }
        if (demo->parsed()) return harness::run_demo(demo_period, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

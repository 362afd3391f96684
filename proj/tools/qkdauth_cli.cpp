// Batch front end: honest multi-round runs, attack campaigns, and
// key-rate accounting from a config file.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "qkdauth/adversary.hpp"
#include "qkdauth/config.hpp"
#include "qkdauth/engine.hpp"
#include "qkdauth/export.hpp"

namespace fs = std::filesystem;
using namespace qkdauth;

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<uint64_t> seed_override;
};

RunConfig load_config(const CommonArgs& args) {
    RunConfig cfg = load_run_config(args.config_path);
    if (args.seed_override) {
        cfg.protocol.seed = *args.seed_override;
        cfg.apply_attack_defaults();
    }
    return cfg;
}

int cmd_run(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    const ProtocolParams& params = cfg.protocol;

    // 4 signatures per party per round covers every PQC-signed message,
    // plus CA headroom.
    SigParams sig_params{params.l_digest, 4 * params.rounds + 8};
    DetRng setup_rng = DetRng::derive(params.seed, "setup");
    CertificateAuthority ca(setup_rng, 8, params.l_digest);
    Party alice = make_party("alice", setup_rng, ca, sig_params);
    Party bob = make_party("bob", setup_rng, ca, sig_params);

    Engine engine(params, alice, bob);
    if (!engine.bootstrap()) {
        std::cerr << "bootstrap failed: certificate rejected\n";
        return 1;
    }
    ChainSummary summary = engine.run_chain(params.rounds);

    fs::create_directories(args.out_dir);
    write_file(fs::path(args.out_dir) / "transcript.jsonl",
               transcript_to_jsonl(engine.transcript()));
    write_file(fs::path(args.out_dir) / "pools.json",
               pools_to_json(alice.pool, bob.pool, params));
    write_file(fs::path(args.out_dir) / "summary.json", summary_to_json(summary, params));

    std::cout << "variant=" << to_string(params.variant) << " rounds_attempted="
              << summary.rounds_attempted << " rounds_succeeded=" << summary.rounds_succeeded
              << " net_key_bits=" << summary.net_key_bits << "\n";
    for (const auto& r : summary.rounds) {
        std::cout << "round " << r.round << ": "
                  << (r.success ? "success" : "abort at " + r.abort_stage) << " qber=" << r.qber
                  << " ell=" << r.ell << " net=" << r.net_key_bits << "\n";
    }
    if (summary.chain_stopped_early) std::cout << "chain stopped early\n";
    return 0;
}

int cmd_attack(const CommonArgs& args, std::optional<uint64_t> trials_override,
               std::optional<uint64_t> k_bits_override) {
    RunConfig cfg = load_config(args);
    if (trials_override) cfg.attack.trials = uint32_t(*trials_override);
    if (k_bits_override) cfg.attack_k_bits = *k_bits_override;

    fs::create_directories(args.out_dir);

    if (cfg.scenario == "collision-rate") {
        CollisionStats stats = replay_ec_verify_collision(cfg.attack_k_bits, cfg.attack.trials,
                                                          cfg.protocol.seed);
        write_file(fs::path(args.out_dir) / "attack_stats.json",
                   collision_stats_to_json(stats));
        std::cout << "collision-rate k=" << stats.k_bits << " trials=" << stats.trials
                  << " passes=" << stats.passes << " expected=" << stats.expected_passes
                  << " sigma=" << stats.sigma
                  << (stats.within_5_sigma ? " within 5 sigma" : " OUTSIDE 5 sigma") << "\n";
        return stats.within_5_sigma ? 0 : 1;
    }

    auto scenarios = standard_attack_scenarios();
    if (std::find(scenarios.begin(), scenarios.end(), cfg.scenario) == scenarios.end()) {
        std::cerr << "unknown attack scenario: " << cfg.scenario << "\nknown scenarios:";
        for (const auto& s : scenarios) std::cerr << " " << s;
        std::cerr << " collision-rate\n";
        return 2;
    }

    AttackStats stats = run_full_mitm(cfg.attack);
    write_file(fs::path(args.out_dir) / "attack_stats.json", attack_stats_to_json(stats));

    std::cout << "scenario=" << stats.scenario << " trials=" << stats.trials
              << " successes=" << stats.successes << "\n";
    for (const auto& [stage, count] : stats.aborted_at)
        std::cout << "aborted_at " << stage << ": " << count << "\n";
    // Any fully successful attack is a regression.
    return stats.successes == 0 ? 0 : 1;
}

int cmd_report(const std::vector<std::string>& ledger_paths, const std::string& t_seconds,
               uint64_t users) {
    uint64_t t_ms = parse_seconds_to_ms(t_seconds);

    uint64_t total_net = 0;
    uint64_t total_rounds = 0;
    uint64_t l_digest = 0;
    for (const auto& path : ledger_paths) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            std::cerr << "cannot open ledger: " << path << "\n";
            return 1;
        }
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.contains("params") || !j.contains("pools")) {
            std::cerr << "malformed ledger: " << path << "\n";
            return 1;
        }
        l_digest = j["params"]["l_digest"].get<uint64_t>();
        const auto& pool = j["pools"][0];
        for (const auto& round : pool["rounds"]) {
            ++total_rounds;
            total_net += round["stored_delta_bits"].get<uint64_t>();
        }
    }

    // Key-rate penalty if basis sifting and the random-number transfer
    // switched to symmetric-key authentication: n digest bits per round.
    uint64_t scaled = l_digest * 1000;
    std::cout << "rounds=" << total_rounds << "\n";
    std::cout << "net_key_bits=" << total_net << "\n";
    if (total_rounds > 0) {
        double rate = double(total_net) * 1000.0 / (double(total_rounds) * double(t_ms));
        std::cout << "net_key_rate_bps=" << rate << "\n";
    }
    if (scaled % t_ms == 0)
        std::cout << "delta_R_bps=" << (scaled / t_ms) << "\n";
    else
        std::cout << "delta_R_bps=" << (double(scaled) / double(t_ms)) << "\n";
    std::cout << "preshared_pairs_required(" << users << ")=" << preshared_pairs_required(users)
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"authenticated QKD post-processing simulator"};
    app.require_subcommand(1);

    CommonArgs run_args, attack_args;
    std::optional<uint64_t> trials_override, k_bits_override;
    std::vector<std::string> ledger_paths;
    std::string t_seconds = "1";
    uint64_t users = 2;

    auto* run = app.add_subcommand("run", "honest multi-round simulation");
    run->add_option("--config", run_args.config_path, "config file")->required();
    run->add_option("--seed", run_args.seed_override, "seed override");
    run->add_option("--out", run_args.out_dir, "output directory");

    auto* attack = app.add_subcommand("attack", "attack campaign");
    attack->add_option("--config", attack_args.config_path, "config file")->required();
    attack->add_option("--seed", attack_args.seed_override, "seed override");
    attack->add_option("--out", attack_args.out_dir, "output directory");
    attack->add_option("--trials", trials_override, "trial count override");
    attack->add_option("--k-bits", k_bits_override, "collision-experiment key length");

    auto* report = app.add_subcommand("report", "key-rate and network accounting");
    report->add_option("--ledger", ledger_paths, "pools.json path(s)")->required();
    report->add_option("--T", t_seconds, "round duration in seconds (e.g. 1 or 0.5)");
    report->add_option("--users", users, "network user count");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_args);
        if (attack->parsed()) return cmd_attack(attack_args, trials_override, k_bits_override);
        if (report->parsed()) return cmd_report(ledger_paths, t_seconds, users);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

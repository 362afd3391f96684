#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

CliResult run_cli(const std::string& args, const fs::path& workdir) {
    fs::create_directories(workdir);
    fs::path out_file = workdir / "stdout.txt";
    std::string cmd = std::string(QKDAUTH_CLI_PATH) + " " + args + " > " + out_file.string() +
                      " 2> " + (workdir / "stderr.txt").string();
    int rc = std::system(cmd.c_str());
    CliResult res;
    res.exit_code = WEXITSTATUS(rc);
    res.out = slurp(out_file);
    return res;
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& body) {
    fs::create_directories(dir);
    fs::path p = dir / name;
    std::ofstream out(p, std::ios::binary);
    out << body;
    return p;
}

const char* kHonestConfig =
    "[run]\n"
    "variant = p1\n"
    "rounds = 5\n"
    "seed = 20240601\n"
    "[channel]\n"
    "pulse_count = 20000\n"
    "transmittance = 0.9\n"
    "detector_efficiency = 0.9\n"
    "flip_prob = 0.02\n"
    "[post]\n"
    "qber_threshold = 0.11\n"
    "sample_fraction = 0.1\n"
    "margin_bits = 100\n";

fs::path tmp_root() {
    return fs::temp_directory_path() / "qkdauth_cli_tests";
}

}  // namespace

TEST_CASE("cli run produces all artifacts and is byte-deterministic") {
    fs::path root = tmp_root() / "determinism";
    fs::remove_all(root);
    fs::path cfg = write_config(root, "run.ini", kHonestConfig);

    auto r1 = run_cli("run --config " + cfg.string() + " --out " + (root / "a").string(), root);
    auto r2 = run_cli("run --config " + cfg.string() + " --out " + (root / "b").string(), root);
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);

    for (const char* name : {"transcript.jsonl", "pools.json", "summary.json"}) {
        REQUIRE(fs::exists(root / "a" / name));
        CHECK(slurp(root / "a" / name) == slurp(root / "b" / name));
    }
    CHECK(r1.out == r2.out);
}

TEST_CASE("cli run summary matches the checked-in golden file") {
    fs::path root = tmp_root() / "golden";
    fs::remove_all(root);
    fs::path cfg = write_config(root, "run.ini", kHonestConfig);
    auto r = run_cli("run --config " + cfg.string() + " --out " + (root / "out").string(), root);
    REQUIRE(r.exit_code == 0);
    std::string golden = slurp(fs::path(QKDAUTH_TEST_DATA) / "golden_run_p1_summary.json");
    CHECK(slurp(root / "out" / "summary.json") == golden);
}

TEST_CASE("cli report reproduces the run totals and the rate penalty") {
    fs::path root = tmp_root() / "report";
    fs::remove_all(root);
    fs::path cfg = write_config(root, "run.ini", kHonestConfig);
    auto r = run_cli("run --config " + cfg.string() + " --out " + (root / "out").string(), root);
    REQUIRE(r.exit_code == 0);

    // net_key_bits printed by run must reappear in the report recount
    auto pos = r.out.find("net_key_bits=");
    REQUIRE(pos != std::string::npos);
    std::string net = r.out.substr(pos, r.out.find('\n', pos) - pos);

    auto rep = run_cli("report --ledger " + (root / "out" / "pools.json").string() +
                           " --T 1 --users 10",
                       root);
    REQUIRE(rep.exit_code == 0);
    CHECK(rep.out.find(net) != std::string::npos);
    CHECK(rep.out.find("delta_R_bps=256") != std::string::npos);
    CHECK(rep.out.find("preshared_pairs_required(10)=45") != std::string::npos);

    auto rep2 = run_cli("report --ledger " + (root / "out" / "pools.json").string() +
                            " --T 0.5 --users 2",
                        root);
    CHECK(rep2.out.find("delta_R_bps=512") != std::string::npos);

    auto missing = run_cli("report --ledger /nonexistent/pools.json", root);
    CHECK(missing.exit_code != 0);
}

TEST_CASE("cli rejects invalid configs with a usage error") {
    fs::path root = tmp_root() / "invalid";
    fs::remove_all(root);
    fs::path zero_rounds = write_config(root, "zero.ini",
                                        "[run]\nrounds = 0\n[channel]\npulse_count = 100\n");
    auto r = run_cli("run --config " + zero_rounds.string() + " --out " + root.string(), root);
    CHECK(r.exit_code == 2);

    fs::path bad_field = write_config(root, "bad.ini",
                                      "[channel]\npulse_count = 100\nflip_prob = 2.0\n");
    auto r2 = run_cli("run --config " + bad_field.string() + " --out " + root.string(), root);
    CHECK(r2.exit_code == 2);
}

TEST_CASE("cli attack: unknown scenario is a usage error, known one runs clean") {
    fs::path root = tmp_root() / "attack";
    fs::remove_all(root);
    fs::path cfg = write_config(root, "attack.ini",
                                "[run]\n"
                                "seed = 5\n"
                                "scenario = no-such-attack\n"
                                "[channel]\n"
                                "pulse_count = 8192\n"
                                "transmittance = 0.75\n"
                                "[attack]\n"
                                "trials = 5\n");
    auto bad = run_cli("attack --config " + cfg.string() + " --out " + (root / "x").string(),
                       root);
    CHECK(bad.exit_code == 2);

    fs::path cfg2 = write_config(root, "attack2.ini",
                                 "[run]\n"
                                 "seed = 5\n"
                                 "scenario = insider-ex-bob\n"
                                 "[channel]\n"
                                 "pulse_count = 8192\n"
                                 "transmittance = 0.75\n"
                                 "[attack]\n"
                                 "trials = 20\n");
    auto good = run_cli("attack --config " + cfg2.string() + " --out " + (root / "y").string(),
                        root);
    CHECK(good.exit_code == 0);
    CHECK(good.out.find("successes=0") != std::string::npos);
    CHECK(fs::exists(root / "y" / "attack_stats.json"));
}

TEST_CASE("cli collision scenario honors the overrides") {
    fs::path root = tmp_root() / "collision";
    fs::remove_all(root);
    fs::path cfg = write_config(root, "coll.ini",
                                "[run]\n"
                                "seed = 9\n"
                                "scenario = collision-rate\n"
                                "[channel]\n"
                                "pulse_count = 1024\n"
                                "[attack]\n"
                                "trials = 1000\n"
                                "k_bits = 8\n");
    auto r = run_cli("attack --config " + cfg.string() + " --trials 50000 --k-bits 8 --out " +
                         (root / "out").string(),
                     root);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("k=8") != std::string::npos);
    CHECK(r.out.find("trials=50000") != std::string::npos);
    CHECK(r.out.find("within 5 sigma") != std::string::npos);
}

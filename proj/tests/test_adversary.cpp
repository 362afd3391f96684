#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "qkdauth/adversary.hpp"

using namespace qkdauth;

namespace {

MitmScenarioConfig small_config(const std::string& scenario, uint32_t trials, uint64_t seed) {
    MitmScenarioConfig cfg;
    cfg.scenario = scenario;
    cfg.trials = trials;
    cfg.seed = seed;
    cfg.pulse_count = 8192;
    cfg.recorded_channel.pulse_count = 8192;
    return cfg;
}

}  // namespace

TEST_CASE("attack lab records a complete legitimate round") {
    AttackLab lab = make_attack_lab(small_config("insider-ex-bob", 1, 101));
    CHECK(lab.record.complete);
    CHECK(lab.record.pulse_count == 8192);
    CHECK_FALSE(lab.record.valid_positions.empty());
    CHECK(lab.record.basis_a.phase == Phase::BasisSift);
    CHECK(lab.record.ec_verify_a.mode == AuthMode::PqcSignEncrypt);
    CHECK_FALSE(lab.record.corrected_key.empty());
    CHECK_FALSE(lab.record.final_key_first.empty());
    CHECK(lab.record.final_key_out.size() < lab.record.final_key_first.size());
}

TEST_CASE("basis-sift replay passes on a lossless wire, dies on a lossy one") {
    AttackLab lab = make_attack_lab(small_config("insider-ex-bob", 1, 102));

    PhaseReplay ideal = replay_basis_sift(lab, false, 500);
    CHECK(ideal.passed);

    PhaseReplay lossy = replay_basis_sift(lab, true, 501);
    CHECK_FALSE(lossy.passed);
    CHECK(lossy.reason.find("basis message") != std::string::npos);
}

TEST_CASE("random-number replay verifies until the bits are tampered") {
    AttackLab lab = make_attack_lab(small_config("insider-ex-bob", 1, 103));
    CHECK(replay_rand_transfer(lab, false).passed);
    CHECK_FALSE(replay_rand_transfer(lab, true).passed);
}

TEST_CASE("ec-verify collision harness sanity: recorded key always passes") {
    CollisionStats sanity = replay_ec_verify_collision(16, 200, 104, true);
    CHECK(sanity.passes == 200);
}

TEST_CASE("ec-verify collision rate tracks 2^-k") {
    // measurable regime
    CollisionStats k8 = replay_ec_verify_collision(8, 50000, 105);
    CHECK(k8.within_5_sigma);
    CHECK(k8.passes > 0);  // ~195 expected, 5-sigma floor is ~125

    CollisionStats k16 = replay_ec_verify_collision(16, 100000, 106);
    CHECK(k16.within_5_sigma);

    // zero-collision regime
    CollisionStats k64 = replay_ec_verify_collision(64, 10000, 107);
    CHECK(k64.passes == 0);
    CHECK(k64.within_5_sigma);
}

TEST_CASE("insider ex-Bob: every trial dies at the EC verification") {
    AttackStats stats = run_full_mitm(small_config("insider-ex-bob", 60, 108));
    CHECK(stats.successes == 0);
    CHECK(stats.aborted_at.at("ECVerify") == 60);
    CHECK(stats.deepest_phase_passed.at("BasisSift") == 60);
    CHECK(stats.min_corrected_key_bits >= 32);
}

TEST_CASE("insider ex-Alice impersonating the receiver dies at the EC verification") {
    AttackStats stats = run_full_mitm(small_config("insider-ex-alice", 60, 109));
    CHECK(stats.successes == 0);
    CHECK(stats.aborted_at.at("ECVerify") == 60);
    CHECK(stats.min_corrected_key_bits >= 32);
}

TEST_CASE("outsider with transcripts only dies at the EC verification") {
    AttackStats stats = run_full_mitm(small_config("outsider-replay", 60, 110));
    CHECK(stats.successes == 0);
    CHECK(stats.aborted_at.at("ECVerify") == 60);
}

TEST_CASE("outsider without a certificate dies at bootstrap") {
    AttackStats stats = run_full_mitm(small_config("outsider-nocert", 30, 111));
    CHECK(stats.successes == 0);
    CHECK(stats.aborted_at.at("Bootstrap") == 30);
    CHECK(stats.deepest_phase_passed.at("none") == 30);
}

TEST_CASE("lossy attack wire shifts the insider abort to the basis sift") {
    MitmScenarioConfig cfg = small_config("insider-ex-bob", 30, 112);
    cfg.lossy_attack_wire = true;
    AttackStats stats = run_full_mitm(cfg);
    CHECK(stats.successes == 0);
    CHECK(stats.aborted_at.at("BasisSift") == 30);
}

TEST_CASE("late-forgery model is reported without weakening stored keys") {
    MitmScenarioConfig cfg = small_config("insider-ex-bob", 10, 113);
    cfg.late_forgery = true;
    AttackStats stats = run_full_mitm(cfg);
    CHECK(stats.late_forgery_model);
    CHECK(stats.stored_pool_bits_transmitted == 0);
    CHECK(stats.successes == 0);
}

TEST_CASE("unknown scenario is rejected") {
    CHECK_THROWS_AS(run_full_mitm(small_config("quantum-hammer", 1, 114)),
                    std::invalid_argument);
}

TEST_CASE("scenario registry lists the standard attacks") {
    auto names = standard_attack_scenarios();
    REQUIRE(names.size() == 4);
    CHECK(std::find(names.begin(), names.end(), "outsider-replay") != names.end());
    CHECK(std::find(names.begin(), names.end(), "insider-ex-bob") != names.end());
    CHECK(std::find(names.begin(), names.end(), "insider-ex-alice") != names.end());
    CHECK(std::find(names.begin(), names.end(), "outsider-nocert") != names.end());
}

#include "qkdauth/export.hpp"

#include <json.hpp>

namespace qkdauth {

using nlohmann::ordered_json;

namespace {

ordered_json record_to_json(const TranscriptRecord& rec) {
    return ordered_json{{"round", rec.round},
                        {"phase", rec.phase},
                        {"direction", rec.direction},
                        {"auth_mode", rec.auth_mode},
                        {"message_hash", rec.message_hash},
                        {"auth_material_hex", rec.auth_material_hex},
                        {"verdict", rec.verdict}};
}

ordered_json pool_to_json(const KeyPool& pool) {
    ordered_json rounds = ordered_json::array();
    for (const auto& entry : pool.history()) {
        rounds.push_back(ordered_json{{"round", entry.round},
                                      {"status", entry.status},
                                      {"generated_bits", entry.generated_bits},
                                      {"consumed_bits", entry.consumed_bits},
                                      {"discarded_bits", entry.discarded_bits},
                                      {"stored_delta_bits", entry.stored_delta_bits}});
    }
    ordered_json consumption = ordered_json::array();
    for (const auto& ev : pool.consumption_log()) {
        ordered_json item{{"source_round", ev.source_round}, {"purpose", ev.purpose}};
        if (ev.offset_begin != uint64_t(-1)) {
            item["offset_begin"] = ev.offset_begin;
            item["offset_end"] = ev.offset_end;
        }
        consumption.push_back(std::move(item));
    }
    return ordered_json{{"link_id", pool.link_id()},
                        {"stored_bits", pool.stored().size()},
                        {"reserved_bits", pool.reserved_size()},
                        {"rounds", std::move(rounds)},
                        {"consumption_log", std::move(consumption)}};
}

ordered_json params_to_json(const ProtocolParams& params) {
    return ordered_json{{"variant", to_string(params.variant)},
                        {"rounds", params.rounds},
                        {"l_digest", params.l_digest},
                        {"qber_threshold", params.qber_threshold},
                        {"sample_fraction", params.sample_fraction},
                        {"margin_bits", params.margin_bits},
                        {"slice_len", params.slice_len},
                        {"seed", params.seed},
                        {"channel",
                         ordered_json{{"pulse_count", params.channel.pulse_count},
                                      {"transmittance", params.channel.transmittance},
                                      {"flip_prob", params.channel.flip_prob},
                                      {"detector_efficiency", params.channel.detector_efficiency},
                                      {"dark_count_prob", params.channel.dark_count_prob}}}};
}

ordered_json round_report_to_json(const RoundReport& r) {
    ordered_json j{{"round", r.round},
                   {"status", r.success ? "success" : "abort"},
                   {"detections", r.detections},
                   {"sifted_bits", r.sifted_bits},
                   {"sampled_bits", r.sampled_bits},
                   {"qber", r.qber},
                   {"corrected_bits", r.corrected_bits},
                   {"ec_leak_bits", r.ec_leak_bits},
                   {"digest_leak_bits", r.digest_leak_bits},
                   {"margin_bits", r.margin_bits},
                   {"ell", r.ell},
                   {"ell2", r.ell2},
                   {"consumed_bits", r.consumed_bits},
                   {"discarded_bits", r.discarded_bits},
                   {"reserved_next_bits", r.reserved_next_bits},
                   {"net_key_bits", r.net_key_bits}};
    if (!r.success) {
        j["abort_stage"] = r.abort_stage;
        j["abort_reason"] = r.abort_reason;
    }
    return j;
}

}  // namespace

std::string transcript_to_jsonl(const Transcript& transcript) {
    std::string out;
    for (const auto& rec : transcript.records) {
        out += record_to_json(rec).dump();
        out += '\n';
    }
    return out;
}

std::string pools_to_json(const KeyPool& alice_pool, const KeyPool& bob_pool,
                          const ProtocolParams& params) {
    ordered_json j{{"params", params_to_json(params)},
                   {"pools", ordered_json::array({pool_to_json(alice_pool),
                                                  pool_to_json(bob_pool)})}};
    return j.dump(2) + "\n";
}

std::string summary_to_json(const ChainSummary& summary, const ProtocolParams& params) {
    ordered_json rounds = ordered_json::array();
    for (const auto& r : summary.rounds) rounds.push_back(round_report_to_json(r));
    ordered_json j{{"params", params_to_json(params)},
                   {"rounds", std::move(rounds)},
                   {"rounds_attempted", summary.rounds_attempted},
                   {"rounds_succeeded", summary.rounds_succeeded},
                   {"net_key_bits", summary.net_key_bits},
                   {"chain_stopped_early", summary.chain_stopped_early}};
    return j.dump(2) + "\n";
}

std::string attack_stats_to_json(const AttackStats& stats) {
    ordered_json aborted = ordered_json::object();
    for (const auto& [stage, count] : stats.aborted_at) aborted[stage] = count;
    ordered_json deepest = ordered_json::object();
    for (const auto& [phase, count] : stats.deepest_phase_passed) deepest[phase] = count;
    ordered_json j{{"scenario", stats.scenario},
                   {"trials", stats.trials},
                   {"successes", stats.successes},
                   {"aborted_at", std::move(aborted)},
                   {"deepest_phase_passed", std::move(deepest)},
                   {"min_corrected_key_bits", stats.min_corrected_key_bits}};
    if (stats.late_forgery_model) {
        j["late_forgery_model"] = true;
        j["stored_pool_bits_transmitted"] = stats.stored_pool_bits_transmitted;
    }
    return j.dump(2) + "\n";
}

std::string collision_stats_to_json(const CollisionStats& stats) {
    ordered_json j{{"scenario", "collision-rate"},
                   {"k_bits", stats.k_bits},
                   {"trials", stats.trials},
                   {"passes", stats.passes},
                   {"expected_rate", stats.expected_rate},
                   {"expected_passes", stats.expected_passes},
                   {"sigma", stats.sigma},
                   {"within_5_sigma", stats.within_5_sigma}};
    return j.dump(2) + "\n";
}

}  // namespace qkdauth

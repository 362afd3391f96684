#pragma once

#include <string>

#include "qkdauth/adversary.hpp"
#include "qkdauth/engine.hpp"

namespace qkdauth {

/// One JSON object per line: {round, phase, direction, auth_mode,
/// message_hash, auth_material_hex, verdict}.
std::string transcript_to_jsonl(const Transcript& transcript);

/// Pool state with per-round generated/consumed/discarded counts plus
/// the consumption log, for both links of the pair.
std::string pools_to_json(const KeyPool& alice_pool, const KeyPool& bob_pool,
                          const ProtocolParams& params);

/// Run summary: one entry per round with the accounting the engine kept.
std::string summary_to_json(const ChainSummary& summary, const ProtocolParams& params);

std::string attack_stats_to_json(const AttackStats& stats);
std::string collision_stats_to_json(const CollisionStats& stats);

}  // namespace qkdauth

#pragma once

#include <map>
#include <optional>
#include <string>

#include "qkdauth/adversary.hpp"
#include "qkdauth/engine.hpp"

namespace qkdauth {

/// Parsed CLI configuration. The file format is INI-style:
/// `[section]` headers, `key = value` lines, `#` or `;` comments, blank
/// lines ignored. Unknown keys are rejected with their full name.
struct RunConfig {
    ProtocolParams protocol;
    std::string scenario = "honest";  // "honest" or an attack scenario name
    MitmScenarioConfig attack;
    uint64_t attack_k_bits = 16;  // corrected-key length for the collision experiment
    uint64_t report_t_ms = 1000;
    uint64_t report_users = 2;

    void apply_attack_defaults();
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Raw section.key -> value map.
std::map<std::string, std::string> parse_ini(const std::string& text);

/// Full load + validation; throws ConfigError naming the offending field.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_text(const std::string& text);

/// Decimal seconds ("1", "0.5", "2.25") to integer milliseconds, exact.
/// Throws ConfigError on malformed input or sub-millisecond precision.
uint64_t parse_seconds_to_ms(const std::string& text);

}  // namespace qkdauth

#include "qkdauth/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace qkdauth {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        double out = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("");
        return out;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError(key + ": expected true/false, got '" + value + "'");
}

}  // namespace

std::map<std::string, std::string> parse_ini(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line, section;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated section");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        std::string full = section.empty() ? key : section + "." + key;
        if (out.count(full)) throw ConfigError(full + ": duplicate key");
        out[full] = value;
    }
    return out;
}

void RunConfig::apply_attack_defaults() {
    attack.scenario = scenario;
    attack.seed = protocol.seed;
    attack.pulse_count = protocol.channel.pulse_count;
    attack.recorded_channel = protocol.channel;
}

RunConfig run_config_from_text(const std::string& text) {
    auto kv = parse_ini(text);
    RunConfig cfg;

    auto take = [&kv](const std::string& key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };

    if (auto v = take("run.variant")) {
        if (*v == "p1" || *v == "P1")
            cfg.protocol.variant = Variant::P1;
        else if (*v == "p2" || *v == "P2")
            cfg.protocol.variant = Variant::P2;
        else
            throw ConfigError("run.variant: expected p1 or p2, got '" + *v + "'");
    }
    if (auto v = take("run.rounds")) cfg.protocol.rounds = uint32_t(parse_u64("run.rounds", *v));
    if (auto v = take("run.seed")) cfg.protocol.seed = parse_u64("run.seed", *v);
    if (auto v = take("run.scenario")) cfg.scenario = *v;

    if (auto v = take("channel.pulse_count"))
        cfg.protocol.channel.pulse_count = uint32_t(parse_u64("channel.pulse_count", *v));
    if (auto v = take("channel.transmittance"))
        cfg.protocol.channel.transmittance = parse_double("channel.transmittance", *v);
    if (auto v = take("channel.flip_prob"))
        cfg.protocol.channel.flip_prob = parse_double("channel.flip_prob", *v);
    if (auto v = take("channel.detector_efficiency"))
        cfg.protocol.channel.detector_efficiency =
            parse_double("channel.detector_efficiency", *v);
    if (auto v = take("channel.dark_count_prob"))
        cfg.protocol.channel.dark_count_prob = parse_double("channel.dark_count_prob", *v);

    if (auto v = take("post.l_digest")) cfg.protocol.l_digest = parse_u64("post.l_digest", *v);
    if (auto v = take("post.qber_threshold"))
        cfg.protocol.qber_threshold = parse_double("post.qber_threshold", *v);
    if (auto v = take("post.sample_fraction"))
        cfg.protocol.sample_fraction = parse_double("post.sample_fraction", *v);
    if (auto v = take("post.margin_bits"))
        cfg.protocol.margin_bits = parse_u64("post.margin_bits", *v);
    if (auto v = take("post.slice_len")) cfg.protocol.slice_len = parse_u64("post.slice_len", *v);

    if (auto v = take("attack.trials"))
        cfg.attack.trials = uint32_t(parse_u64("attack.trials", *v));
    if (auto v = take("attack.k_bits")) {
        cfg.attack_k_bits = parse_u64("attack.k_bits", *v);
        if (cfg.attack_k_bits == 0) throw ConfigError("attack.k_bits: must be positive");
    }
    if (auto v = take("attack.lossy_wire"))
        cfg.attack.lossy_attack_wire = parse_bool("attack.lossy_wire", *v);
    if (auto v = take("attack.late_forgery"))
        cfg.attack.late_forgery = parse_bool("attack.late_forgery", *v);

    if (auto v = take("report.t_seconds")) cfg.report_t_ms = parse_seconds_to_ms(*v);
    if (auto v = take("report.users")) cfg.report_users = parse_u64("report.users", *v);

    if (!kv.empty()) throw ConfigError("unknown configuration key: " + kv.begin()->first);

    cfg.apply_attack_defaults();
    try {
        cfg.protocol.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return run_config_from_text(buf.str());
}

uint64_t parse_seconds_to_ms(const std::string& text) {
    std::string t = text;
    size_t dot = t.find('.');
    std::string whole = dot == std::string::npos ? t : t.substr(0, dot);
    std::string frac = dot == std::string::npos ? "" : t.substr(dot + 1);
    if (whole.empty() && frac.empty()) throw ConfigError("T: empty duration");
    if (frac.size() > 3) throw ConfigError("T: finer than millisecond precision unsupported");
    while (frac.size() < 3) frac.push_back('0');
    uint64_t w = whole.empty() ? 0 : parse_u64("T", whole);
    uint64_t f = parse_u64("T", frac);
    uint64_t ms = w * 1000 + f;
    if (ms == 0) throw ConfigError("T: duration must be positive");
    return ms;
}

}  // namespace qkdauth

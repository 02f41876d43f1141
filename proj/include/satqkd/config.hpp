#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "satqkd/campaign.hpp"

namespace satqkd {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace config_detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline double parse_number(const std::string& text, const std::string& where) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        if (pos != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(where + ": cannot parse number '" + text + "'");
    }
}

}  // namespace config_detail

/// Flat INI-style key/value store with [section] headers, '#' or ';'
/// comments, and 'key = value' pairs. Parse errors carry line numbers.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        std::stringstream buffer;
        buffer << in.rdbuf();
        return parse_text(buffer.str(), path);
    }

    static ConfigFile parse_text(const std::string& text, const std::string& name = "<config>") {
        ConfigFile cfg;
        std::istringstream in(text);
        std::string line;
        std::string section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) line.erase(hash);
            line = config_detail::trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError(name + ":" + std::to_string(line_no) +
                                      ": unterminated section header");
                section = config_detail::trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(name + ":" + std::to_string(line_no) +
                                  ": expected 'key = value'");
            const std::string key = config_detail::trim(line.substr(0, eq));
            const std::string value = config_detail::trim(line.substr(eq + 1));
            if (key.empty())
                throw ConfigError(name + ":" + std::to_string(line_no) + ": empty key");
            cfg.values_[section.empty() ? key : section + "." + key] = value;
        }
        return cfg;
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    double number(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        return config_detail::parse_number(it->second, "config key '" + key + "'");
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// Atmosphere table CSV: header `elevation_deg,transmissivity`, ascending
/// elevations. Parse errors are reported with line numbers.
inline AtmosphereModel load_atmosphere_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open atmosphere table: " + path);
    std::string line;
    int line_no = 0;
    std::vector<std::pair<double, double>> rows;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        line = config_detail::trim(line);
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            if (line != "elevation_deg,transmissivity")
                throw ConfigError(path + ":" + std::to_string(line_no) +
                                  ": expected header 'elevation_deg,transmissivity'");
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected two columns");
        const std::string where = path + ":" + std::to_string(line_no);
        rows.emplace_back(config_detail::parse_number(line.substr(0, comma), where),
                          config_detail::parse_number(line.substr(comma + 1), where));
    }
    if (!header_seen) throw ConfigError(path + ": missing header row");
    try {
        return AtmosphereModel::from_table(std::move(rows));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline void write_atmosphere_table(const AtmosphereModel& model, std::ostream& out) {
    out << "elevation_deg,transmissivity\n";
    char buf[64];
    for (const auto& [deg, t] : model.table) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g\n", deg, t);
        out << buf;
    }
}

/// Loads a SystemConfig with reference defaults for every omitted key and
/// full validation; the derived zenith loss is computed on load.
struct LoadedConfig {
    SystemConfig config;
    double zenith_loss_db = 0.0;
    std::string canonical_text;  // serialised form, hashed into result files
};

inline std::string serialize_config(const SystemConfig& c) {
    std::ostringstream out;
    char buf[96];
    auto kv = [&](const char* key, double v) {
        std::snprintf(buf, sizeof buf, "%s = %.17g\n", key, v);
        out << buf;
    };
    out << "[orbit]\n";
    kv("altitude_m", c.orbit.altitude_m);
    kv("earth_radius_m", c.orbit.earth_radius_m);
    kv("gravitational_parameter_m3s2", c.orbit.gravitational_parameter_m3s2);
    out << "[system]\n";
    kv("tx_diameter_m", c.system.tx_diameter_m);
    kv("rx_diameter_m", c.system.rx_diameter_m);
    kv("beam_waist_m", c.system.beam_waist_m);
    kv("wavelength_m", c.system.wavelength_m);
    kv("intrinsic_loss_db", c.system.intrinsic_loss_db);
    out << "[source]\n";
    kv("rate_hz", c.source.rate_hz);
    kv("intrinsic_qber", c.source.intrinsic_qber);
    kv("extraneous_count_prob", c.source.extraneous_count_prob);
    kv("afterpulse_prob", c.source.afterpulse_prob);
    out << "[security]\n";
    kv("epsilon_s", c.security.epsilon_s);
    kv("epsilon_c", c.security.epsilon_c);
    out << "[pass]\n";
    kv("theta_min_deg", c.theta_min_deg);
    kv("time_step_s", c.time_step_s);
    out << "[atmosphere]\n";
    if (c.atmosphere.mode == AtmosphereModel::Mode::analytic) {
        out << "mode = analytic\n";
        kv("zenith_transmissivity", c.atmosphere.zenith_transmissivity);
    } else {
        out << "mode = table\n";
        for (const auto& [deg, t] : c.atmosphere.table) {
            std::snprintf(buf, sizeof buf, "row = %.17g %.17g\n", deg, t);
            out << buf;
        }
    }
    return out.str();
}

inline LoadedConfig config_from_values(const ConfigFile& cfg,
                                       const std::string& base_dir = "") {
    SystemConfig c;
    c.orbit.altitude_m = cfg.number("orbit.altitude_m", 500.0e3);
    c.orbit.earth_radius_m = cfg.number("orbit.earth_radius_m", 6371.0e3);
    c.orbit.gravitational_parameter_m3s2 =
        cfg.number("orbit.gravitational_parameter_m3s2", 3.986004418e14);
    c.system.tx_diameter_m = cfg.number("system.tx_diameter_m", 0.08);
    c.system.rx_diameter_m = cfg.number("system.rx_diameter_m", 0.70);
    c.system.beam_waist_m = cfg.number("system.beam_waist_m", 0.04);
    c.system.wavelength_m = cfg.number("system.wavelength_m", 785.0e-9);
    c.system.intrinsic_loss_db = cfg.number("system.intrinsic_loss_db", 20.0);
    c.source.rate_hz = cfg.number("source.rate_hz", 500.0e6);
    c.source.intrinsic_qber = cfg.number("source.intrinsic_qber", 0.005);
    c.source.extraneous_count_prob = cfg.number("source.extraneous_count_prob", 5.0e-7);
    c.source.afterpulse_prob = cfg.number("source.afterpulse_prob", 0.001);
    c.security.epsilon_s = cfg.number("security.epsilon_s", 1.0e-10);
    c.security.epsilon_c = cfg.number("security.epsilon_c", 1.0e-15);
    c.theta_min_deg = cfg.number("pass.theta_min_deg", 10.0);
    c.time_step_s = cfg.number("pass.time_step_s", 1.0);

    const std::string mode = cfg.text("atmosphere.mode", "analytic");
    if (mode == "analytic") {
        c.atmosphere = AtmosphereModel::analytic(
            cfg.number("atmosphere.zenith_transmissivity", std::pow(10.0, -0.06)));
    } else if (mode == "table") {
        const std::string table = cfg.text("atmosphere.table", "");
        if (table.empty()) throw ConfigError("atmosphere.table path missing for table mode");
        const std::string path =
            (!base_dir.empty() && table.front() != '/') ? base_dir + "/" + table : table;
        c.atmosphere = load_atmosphere_table(path);
    } else {
        throw ConfigError("atmosphere.mode must be 'analytic' or 'table', got '" + mode + "'");
    }

    c.validate();

    LoadedConfig out;
    out.config = c;
    out.canonical_text = serialize_config(c);
    const double zenith = std::numbers::pi / 2.0;
    out.zenith_loss_db =
        link_efficiency_db(c.system, c.atmosphere, c.orbit, zenith);
    return out;
}

inline LoadedConfig load_config(const std::string& path) {
    const auto slash = path.find_last_of('/');
    const std::string base = slash == std::string::npos ? std::string(".") : path.substr(0, slash);
    return config_from_values(ConfigFile::parse_file(path), base);
}

/// FNV-1a 64-bit hash, used to stamp result files with the config identity.
inline std::uint64_t fnv1a_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace satqkd

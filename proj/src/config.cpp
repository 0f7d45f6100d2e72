#include "pflab/config.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pflab {

namespace {

std::string trim(const std::string &s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

std::vector<std::string> split_list(const std::string &value) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

ConfigMap ConfigMap::parse_text(const std::string &text) {
    ConfigMap cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected 'key = value', got '" + s + "'");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        cfg.set(section, key, value);
    }
    return cfg;
}

ConfigMap ConfigMap::parse_json(const std::string &text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("invalid JSON config: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("JSON config root must be an object of sections");

    auto scalar_to_string = [](const nlohmann::json &v) -> std::string {
        if (v.is_string()) return v.get<std::string>();
        return v.dump(); // numbers / booleans in canonical shortest form
    };

    ConfigMap cfg;
    for (const auto &[section, body] : j.items()) {
        if (!body.is_object())
            throw ConfigError("JSON config section '" + section + "' must be an object");
        for (const auto &[key, value] : body.items()) {
            if (value.is_array()) {
                std::string joined;
                for (const auto &el : value) {
                    if (!joined.empty()) joined += ",";
                    joined += scalar_to_string(el);
                }
                cfg.set(section, key, joined);
            } else if (value.is_object()) {
                throw ConfigError("JSON config key '" + section + "." + key +
                                  "' must be a scalar or array");
            } else {
                cfg.set(section, key, scalar_to_string(value));
            }
        }
    }
    return cfg;
}

ConfigMap ConfigMap::from_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    bool json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
    return json ? parse_json(buf.str()) : parse_text(buf.str());
}

std::string ConfigMap::to_text() const {
    std::ostringstream out;
    bool first = true;
    for (const auto &[name, entries] : m_sections) {
        if (!first) out << "\n";
        first = false;
        if (!name.empty()) out << "[" << name << "]\n";
        for (const auto &[key, value] : entries) out << key << " = " << value << "\n";
    }
    return out.str();
}

bool ConfigMap::has(const std::string &section, const std::string &key) const {
    for (const auto &[name, entries] : m_sections)
        if (name == section)
            for (const auto &[k, v] : entries)
                if (k == key) return true;
    return false;
}

std::string ConfigMap::get(const std::string &section, const std::string &key) const {
    for (const auto &[name, entries] : m_sections)
        if (name == section)
            for (const auto &[k, v] : entries)
                if (k == key) return v;
    throw ConfigError("missing config key '" + section + "." + key + "'");
}

std::string ConfigMap::get_or(const std::string &section, const std::string &key,
                              const std::string &fallback) const {
    return has(section, key) ? get(section, key) : fallback;
}

void ConfigMap::set(const std::string &section, const std::string &key,
                    const std::string &value) {
    for (auto &[name, entries] : m_sections) {
        if (name != section) continue;
        for (auto &[k, v] : entries) {
            if (k == key) {
                v = value;
                return;
            }
        }
        entries.emplace_back(key, value);
        return;
    }
    m_sections.push_back({section, {{key, value}}});
}

namespace {

long parse_long(const std::string &text, const std::string &where) {
    char *end = nullptr;
    long v = std::strtol(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0')
        throw ConfigError("config key '" + where + "': expected integer, got '" + text + "'");
    return v;
}

double parse_double(const std::string &text, const std::string &where) {
    char *end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
        throw ConfigError("config key '" + where + "': expected number, got '" + text + "'");
    return v;
}

} // namespace

long ConfigMap::get_long(const std::string &section, const std::string &key,
                         long fallback) const {
    if (!has(section, key)) return fallback;
    return parse_long(get(section, key), section + "." + key);
}

double ConfigMap::get_double(const std::string &section, const std::string &key,
                             double fallback) const {
    if (!has(section, key)) return fallback;
    return parse_double(get(section, key), section + "." + key);
}

std::uint64_t ConfigMap::get_u64(const std::string &section, const std::string &key,
                                 std::uint64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string text = get(section, key);
    char *end = nullptr;
    unsigned long long v = std::strtoull(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0')
        throw ConfigError("config key '" + section + "." + key +
                          "': expected unsigned integer, got '" + text + "'");
    return static_cast<std::uint64_t>(v);
}

std::vector<double> ConfigMap::get_double_list(const std::string &section,
                                               const std::string &key) const {
    std::vector<double> out;
    for (const auto &item : split_list(get(section, key)))
        out.push_back(parse_double(item, section + "." + key));
    return out;
}

std::vector<long> ConfigMap::get_long_list(const std::string &section,
                                           const std::string &key) const {
    std::vector<long> out;
    for (const auto &item : split_list(get(section, key)))
        out.push_back(parse_long(item, section + "." + key));
    return out;
}

} // namespace pflab

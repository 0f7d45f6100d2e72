#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pflab {

// Configuration problems exit the CLI with code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Ordered sections of ordered key/value string pairs. Two ingestion paths
// feed the same structure: a flat text format and JSON.
//
// Text grammar (one statement per line):
//   [section]        starts a section
//   key = value      assigns within the current section ("" before any header)
//   # ...            comment; blank lines ignored
// Values are verbatim strings (surrounding whitespace trimmed); lists are
// comma-separated within one value.
class ConfigMap {
public:
    static ConfigMap parse_text(const std::string &text);
    static ConfigMap parse_json(const std::string &text);
    // dispatches on extension: .json uses the JSON parser
    static ConfigMap from_file(const std::string &path);

    std::string to_text() const;

    bool has(const std::string &section, const std::string &key) const;
    std::string get(const std::string &section, const std::string &key) const;
    std::string get_or(const std::string &section, const std::string &key,
                       const std::string &fallback) const;
    void set(const std::string &section, const std::string &key, const std::string &value);

    long get_long(const std::string &section, const std::string &key, long fallback) const;
    double get_double(const std::string &section, const std::string &key, double fallback) const;
    std::uint64_t get_u64(const std::string &section, const std::string &key,
                          std::uint64_t fallback) const;
    std::vector<double> get_double_list(const std::string &section, const std::string &key) const;
    std::vector<long> get_long_list(const std::string &section, const std::string &key) const;

    bool operator==(const ConfigMap &other) const { return m_sections == other.m_sections; }

    using Section = std::pair<std::string, std::vector<std::pair<std::string, std::string>>>;
    const std::vector<Section> &sections() const { return m_sections; }

private:
    std::vector<Section> m_sections;
};

std::vector<std::string> split_list(const std::string &value);

} // namespace pflab

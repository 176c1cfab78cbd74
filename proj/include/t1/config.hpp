#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "t1/common.hpp"

namespace t1 {

// INI-style config: [section] headers, key = value lines, '#' comments.
// Sections and keys keep insertion order so serialize(parse(text)) is stable.
// Readers mark keys consumed; ensure_all_consumed() rejects typos by line.
class Config {
  public:
    struct Entry {
        std::string section, key, value;
        int line = 0;           // 0 for programmatic entries
        mutable bool consumed = false;
    };

    static Config parse_text(const std::string& text, const std::string& origin = "<config>");
    static Config parse_file(const std::string& path);
    std::string serialize() const;

    void set(const std::string& section, const std::string& key, const std::string& value);
    void set_i64(const std::string& section, const std::string& key, int64_t v);
    void set_u64(const std::string& section, const std::string& key, uint64_t v);
    void set_f64(const std::string& section, const std::string& key, double v);
    void set_bool(const std::string& section, const std::string& key, bool v);

    bool has(const std::string& section, const std::string& key) const;
    std::optional<std::string> get(const std::string& section, const std::string& key) const;
    std::string get_str(const std::string& section, const std::string& key,
                        const std::string& fallback) const;
    int64_t get_i64(const std::string& section, const std::string& key, int64_t fallback) const;
    uint64_t get_u64(const std::string& section, const std::string& key, uint64_t fallback) const;
    double get_f64(const std::string& section, const std::string& key, double fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    // Throws naming the first never-consumed entry and its line.
    void ensure_all_consumed() const;

    const std::vector<Entry>& entries() const { return entries_; }

  private:
    std::string origin_ = "<config>";
    std::vector<Entry> entries_;

    const Entry* find(const std::string& section, const std::string& key) const;
};

std::string format_f64(double v);  // shortest round-trip-safe decimal (%.17g)

}  // namespace t1

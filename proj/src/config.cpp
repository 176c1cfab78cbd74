#include "t1/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace t1 {

std::string format_f64(double v) {
    // %.17g always round-trips a double; trim to the shortest form that does.
    for (int prec = 1; prec <= 17; ++prec) {
        std::string s = strf("%.*g", prec, v);
        if (std::strtod(s.c_str(), nullptr) == v) return s;
    }
    return strf("%.17g", v);
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_text(const std::string& text, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        if (auto pos = s.find('#'); pos != std::string::npos) s.erase(pos);
        s = trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']' || s.size() < 3) {
                throw IoError(strf("%s:%d: malformed section header '%s'", origin.c_str(), line,
                                   raw.c_str()));
            }
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw IoError(strf("%s:%d: expected 'key = value', got '%s'", origin.c_str(), line,
                               raw.c_str()));
        }
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (key.empty()) throw IoError(strf("%s:%d: empty key", origin.c_str(), line));
        if (cfg.find(section, key)) {
            throw IoError(strf("%s:%d: duplicate key '%s.%s'", origin.c_str(), line, section.c_str(),
                               key.c_str()));
        }
        cfg.entries_.push_back({section, key, value, line, false});
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError(strf("%s: cannot open", path.c_str()));
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str(), path);
}

std::string Config::serialize() const {
    std::string out;
    std::string current;
    bool first = true;
    for (const auto& e : entries_) {
        if (first || e.section != current) {
            if (!first) out += "\n";
            out += "[" + e.section + "]\n";
            current = e.section;
            first = false;
        }
        out += e.key + " = " + e.value + "\n";
    }
    return out;
}

const Config::Entry* Config::find(const std::string& section, const std::string& key) const {
    for (const auto& e : entries_) {
        if (e.section == section && e.key == key) return &e;
    }
    return nullptr;
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    for (auto& e : entries_) {
        if (e.section == section && e.key == key) {
            e.value = value;
            return;
        }
    }
    // Keep sections contiguous: insert after the section's last entry.
    auto it = entries_.end();
    for (auto cur = entries_.begin(); cur != entries_.end(); ++cur) {
        if (cur->section == section) it = cur + 1;
    }
    entries_.insert(it, {section, key, value, 0, false});
}

void Config::set_i64(const std::string& s, const std::string& k, int64_t v) {
    set(s, k, strf("%lld", (long long)v));
}
void Config::set_u64(const std::string& s, const std::string& k, uint64_t v) {
    set(s, k, strf("%llu", (unsigned long long)v));
}
void Config::set_f64(const std::string& s, const std::string& k, double v) {
    set(s, k, format_f64(v));
}
void Config::set_bool(const std::string& s, const std::string& k, bool v) {
    set(s, k, v ? "true" : "false");
}

bool Config::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

std::optional<std::string> Config::get(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    e->consumed = true;
    return e->value;
}

std::string Config::get_str(const std::string& s, const std::string& k,
                            const std::string& fallback) const {
    auto v = get(s, k);
    return v ? *v : fallback;
}

int64_t Config::get_i64(const std::string& s, const std::string& k, int64_t fallback) const {
    auto v = get(s, k);
    if (!v) return fallback;
    errno = 0;
    char* end = nullptr;
    long long r = std::strtoll(v->c_str(), &end, 10);
    if (errno != 0 || end == v->c_str() || *end != '\0') {
        throw IoError(strf("%s: '%s.%s' is not an integer: '%s'", origin_.c_str(), s.c_str(),
                           k.c_str(), v->c_str()));
    }
    return r;
}

uint64_t Config::get_u64(const std::string& s, const std::string& k, uint64_t fallback) const {
    auto v = get(s, k);
    if (!v) return fallback;
    errno = 0;
    char* end = nullptr;
    unsigned long long r = std::strtoull(v->c_str(), &end, 10);
    if (errno != 0 || end == v->c_str() || *end != '\0' || v->front() == '-') {
        throw IoError(strf("%s: '%s.%s' is not a nonnegative integer: '%s'", origin_.c_str(),
                           s.c_str(), k.c_str(), v->c_str()));
    }
    return r;
}

double Config::get_f64(const std::string& s, const std::string& k, double fallback) const {
    auto v = get(s, k);
    if (!v) return fallback;
    errno = 0;
    char* end = nullptr;
    double r = std::strtod(v->c_str(), &end);
    if (errno != 0 || end == v->c_str() || *end != '\0') {
        throw IoError(strf("%s: '%s.%s' is not a number: '%s'", origin_.c_str(), s.c_str(), k.c_str(),
                           v->c_str()));
    }
    return r;
}

bool Config::get_bool(const std::string& s, const std::string& k, bool fallback) const {
    auto v = get(s, k);
    if (!v) return fallback;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw IoError(strf("%s: '%s.%s' is not a boolean: '%s'", origin_.c_str(), s.c_str(), k.c_str(),
                       v->c_str()));
}

void Config::ensure_all_consumed() const {
    for (const auto& e : entries_) {
        if (!e.consumed) {
            throw IoError(strf("%s:%d: unknown key '%s.%s'", origin_.c_str(), e.line,
                               e.section.c_str(), e.key.c_str()));
        }
    }
}

}  // namespace t1

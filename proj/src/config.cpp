#include "uwie/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace uwie {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

}  // namespace

void KvConfig::set(const std::string& key, const std::string& value) { values_[key] = value; }

bool KvConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KvConfig::get_str(const std::string& key, const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
}

int KvConfig::get_int(const std::string& key, int dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    try {
        size_t used = 0;
        const int v = std::stoi(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not an integer: '" + it->second + "'");
    }
}

double KvConfig::get_double(const std::string& key, double dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    try {
        size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not a number: '" + it->second + "'");
    }
}

bool KvConfig::get_bool(const std::string& key, bool dflt) const {
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    const std::string v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: key '" + key + "' is not a boolean: '" + v + "'");
}

KvConfig KvConfig::parse_text(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(lineno));
        cfg.values_[key] = value;
    }
    return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

void KvConfig::apply(const KvConfig& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string KvConfig::serialize() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

std::string RunManifest::serialize() const {
    std::string out;
    out += "command = " + command + "\n";
    out += "seed = " + std::to_string(seed) + "\n";
    out += "out_dir = " + out_dir + "\n";
    const std::string cfg = config.serialize();
    if (!cfg.empty()) out += "\n# resolved configuration\n" + cfg;
    return out;
}

void RunManifest::write(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir + "/manifest.txt");
    if (!out) throw DataError("cannot write manifest in " + dir);
    out << serialize();
}

}  // namespace uwie

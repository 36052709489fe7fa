#pragma once

#include <map>
#include <string>
#include <vector>

#include "uwie/tensor.hpp"

namespace uwie {

// Flat `key = value` config with '#' comments. Flags override file values;
// the resolved text is persisted in manifests and checkpoints.
class KvConfig {
public:
    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_str(const std::string& key, const std::string& dflt) const;
    int get_int(const std::string& key, int dflt) const;
    double get_double(const std::string& key, double dflt) const;
    bool get_bool(const std::string& key, bool dflt) const;

    static KvConfig parse_text(const std::string& text);
    static KvConfig parse_file(const std::string& path);

    // merge `other` on top of this config
    void apply(const KvConfig& other);

    std::string serialize() const;  // sorted keys, one per line

private:
    std::map<std::string, std::string> values_;
};

// manifest.txt written next to every command's outputs
struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    std::string out_dir;
    KvConfig config;

    std::string serialize() const;
    void write(const std::string& dir) const;
};

}  // namespace uwie

#pragma once

#include "kslab/error.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace kslab::cli {

using Json = nlohmann::json;

/// A schema violation in the run configuration; the message names the key path.
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Read-only view of one JSON object that records which keys were consumed,
/// so that finish() can reject everything else by its full key path.
class Section {
public:
    Section(const Json& object, std::string path);

    const std::string& path() const noexcept { return path_; }
    const Json& json() const noexcept { return *object_; }
    bool has(const std::string& key) const;

    double number(const std::string& key) const;
    double number(const std::string& key, double fallback) const;
    std::int64_t integer(const std::string& key) const;
    std::int64_t integer(const std::string& key, std::int64_t fallback) const;
    std::uint64_t unsigned_integer(const std::string& key) const;
    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) const;
    std::string string(const std::string& key) const;
    std::string string(const std::string& key, const std::string& fallback) const;
    bool boolean(const std::string& key, bool fallback) const;
    /// Raw value (marked consumed); throws when missing.
    const Json& raw(const std::string& key) const;
    Section child(const std::string& key) const;
    std::vector<std::string> string_list(const std::string& key) const;

    /// Throws ConfigError naming the first key that was never read.
    void finish() const;
    std::string key_path(const std::string& key) const;

private:
    const Json& need(const std::string& key) const;

    const Json* object_;
    std::string path_;
    mutable std::set<std::string> used_;
};

/// Positive / range helpers that raise ConfigError with the key path.
double positive(const Section& s, const std::string& key);
double positive(const Section& s, const std::string& key, double fallback);
std::int64_t positive_integer(const Section& s, const std::string& key);
std::int64_t positive_integer(const Section& s, const std::string& key, std::int64_t fallback);

}  // namespace kslab::cli

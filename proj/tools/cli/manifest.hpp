#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace kslab::cli {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
/// Hex SHA-256 of a string.
std::string sha256_text(const std::string& text);

/// Plain `key = value` manifest, one entry per line in insertion order.
class Manifest {
public:
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, double value);
    void set(const std::string& key, long long value);
    /// Records the digest and size of an emitted file under file.<name>.
    void add_file(const std::filesystem::path& path);
    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept
    {
        return entries_;
    }
    void write(const std::filesystem::path& path) const;
    /// Parses a manifest written by write().
    static Manifest read(const std::filesystem::path& path);
    /// Value of `key`, or empty when absent.
    std::string get(const std::string& key) const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace kslab::cli

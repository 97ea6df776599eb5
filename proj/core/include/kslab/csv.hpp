#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace kslab::csv {

/// Shortest text of a double with 17 significant digits and '.' separator
/// (round-trip exact, locale independent).
std::string format(double x);
std::string format(long long x);

/// Comma-separated writer; the header row is written on construction.
class Writer {
public:
    Writer(const std::filesystem::path& path, std::initializer_list<std::string> header);
    Writer(const std::filesystem::path& path, const std::vector<std::string>& header);

    void row(const std::vector<std::string>& fields);

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::size_t columns_;
};

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// Reads a header + rows file; throws InvalidArgument on ragged rows.
Table read(const std::filesystem::path& path);

}  // namespace kslab::csv

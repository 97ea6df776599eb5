#include "kslab/csv.hpp"

#include "kslab/error.hpp"

#include <array>
#include <charconv>
#include <sstream>

namespace kslab::csv {

std::string format(double x)
{
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x,
                                   std::chars_format::general, 17);
    if (ec != std::errc{})
        throw Error("csv: cannot format value");
    return std::string(buf.data(), end);
}

std::string format(long long x)
{
    return std::to_string(x);
}

namespace {

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ','))
        out.push_back(field);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

}  // namespace

Writer::Writer(const std::filesystem::path& path, std::initializer_list<std::string> header)
    : Writer(path, std::vector<std::string>(header))
{
}

Writer::Writer(const std::filesystem::path& path, const std::vector<std::string>& header)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size())
{
    if (!out_)
        throw Error("csv: cannot open " + path.string() + " for writing");
    row(header);
}

void Writer::row(const std::vector<std::string>& fields)
{
    if (fields.size() != columns_)
        throw InvalidArgument("csv: row width does not match header");
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i)
            out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
    if (!out_)
        throw Error("csv: write failed for " + path_.string());
}

Table read(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InvalidArgument("csv: cannot open " + path.string());
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        auto fields = split(line);
        if (first) {
            t.header = std::move(fields);
            first = false;
            continue;
        }
        if (fields.size() != t.header.size())
            throw InvalidArgument("csv: ragged row in " + path.string());
        t.rows.push_back(std::move(fields));
    }
    if (first)
        throw InvalidArgument("csv: missing header in " + path.string());
    return t;
}

}  // namespace kslab::csv

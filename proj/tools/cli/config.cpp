#include "config.hpp"

#include <cmath>
#include <limits>

namespace kslab::cli {

Section::Section(const Json& object, std::string path) : object_(&object), path_(std::move(path))
{
    if (!object.is_object())
        throw ConfigError("config: '" + (path_.empty() ? std::string("<root>") : path_) +
                          "' must be an object");
}

std::string Section::key_path(const std::string& key) const
{
    return path_.empty() ? key : path_ + "." + key;
}

bool Section::has(const std::string& key) const
{
    return object_->contains(key);
}

const Json& Section::need(const std::string& key) const
{
    auto it = object_->find(key);
    if (it == object_->end())
        throw ConfigError("config: missing required key '" + key_path(key) + "'");
    used_.insert(key);
    return *it;
}

const Json& Section::raw(const std::string& key) const
{
    return need(key);
}

double Section::number(const std::string& key) const
{
    const Json& v = need(key);
    if (!v.is_number())
        throw ConfigError("config: '" + key_path(key) + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x))
        throw ConfigError("config: '" + key_path(key) + "' must be finite");
    return x;
}

double Section::number(const std::string& key, double fallback) const
{
    return has(key) ? number(key) : fallback;
}

std::int64_t Section::integer(const std::string& key) const
{
    const Json& v = need(key);
    if (!v.is_number_integer())
        throw ConfigError("config: '" + key_path(key) + "' must be an integer");
    if (v.is_number_unsigned() &&
        v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
        throw ConfigError("config: '" + key_path(key) + "' is out of range");
    return v.get<std::int64_t>();
}

std::int64_t Section::integer(const std::string& key, std::int64_t fallback) const
{
    return has(key) ? integer(key) : fallback;
}

std::uint64_t Section::unsigned_integer(const std::string& key) const
{
    const Json& v = need(key);
    if (v.is_number_unsigned())
        return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
        return static_cast<std::uint64_t>(v.get<std::int64_t>());
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        try {
            std::size_t pos = 0;
            if (!s.empty() && s[0] != '-') {
                const unsigned long long x = std::stoull(s, &pos, 0);
                if (pos == s.size())
                    return x;
            }
        } catch (const std::exception&) {
        }
    }
    throw ConfigError("config: '" + key_path(key) + "' must be an unsigned 64-bit integer");
}

std::uint64_t Section::unsigned_integer(const std::string& key, std::uint64_t fallback) const
{
    return has(key) ? unsigned_integer(key) : fallback;
}

std::string Section::string(const std::string& key) const
{
    const Json& v = need(key);
    if (!v.is_string())
        throw ConfigError("config: '" + key_path(key) + "' must be a string");
    return v.get<std::string>();
}

std::string Section::string(const std::string& key, const std::string& fallback) const
{
    return has(key) ? string(key) : fallback;
}

bool Section::boolean(const std::string& key, bool fallback) const
{
    if (!has(key))
        return fallback;
    const Json& v = need(key);
    if (!v.is_boolean())
        throw ConfigError("config: '" + key_path(key) + "' must be true or false");
    return v.get<bool>();
}

Section Section::child(const std::string& key) const
{
    const Json& v = need(key);
    if (!v.is_object())
        throw ConfigError("config: '" + key_path(key) + "' must be an object");
    return Section(v, key_path(key));
}

std::vector<std::string> Section::string_list(const std::string& key) const
{
    const Json& v = need(key);
    if (!v.is_array())
        throw ConfigError("config: '" + key_path(key) + "' must be a list of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string())
            throw ConfigError("config: '" + key_path(key) + "[" + std::to_string(i) +
                              "]' must be a string");
        out.push_back(v[i].get<std::string>());
    }
    return out;
}

void Section::finish() const
{
    for (auto it = object_->begin(); it != object_->end(); ++it)
        if (!used_.count(it.key()))
            throw ConfigError("config: unknown key '" + key_path(it.key()) + "'");
}

double positive(const Section& s, const std::string& key)
{
    const double x = s.number(key);
    if (!(x > 0.0))
        throw ConfigError("config: '" + s.key_path(key) + "' must be positive");
    return x;
}

double positive(const Section& s, const std::string& key, double fallback)
{
    return s.has(key) ? positive(s, key) : fallback;
}

std::int64_t positive_integer(const Section& s, const std::string& key)
{
    const std::int64_t x = s.integer(key);
    if (x <= 0)
        throw ConfigError("config: '" + s.key_path(key) + "' must be a positive integer");
    return x;
}

std::int64_t positive_integer(const Section& s, const std::string& key, std::int64_t fallback)
{
    return s.has(key) ? positive_integer(s, key) : fallback;
}

}  // namespace kslab::cli

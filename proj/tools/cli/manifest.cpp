#include "manifest.hpp"

#include "kslab/csv.hpp"
#include "kslab/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

namespace kslab::cli {

namespace {

class Digest {
public:
    Digest() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free)
    {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            throw Error("sha256: cannot initialise digest");
    }
    void update(const char* data, std::size_t n)
    {
        if (EVP_DigestUpdate(ctx_.get(), data, n) != 1)
            throw Error("sha256: digest update failed");
    }
    std::string hex()
    {
        std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1)
            throw Error("sha256: digest finalisation failed");
        static const char* digits = "0123456789abcdef";
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out.push_back(digits[md[i] >> 4]);
            out.push_back(digits[md[i] & 15]);
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, void (*)(EVP_MD_CTX*)> ctx_;
};

}  // namespace

std::string sha256_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InvalidArgument("cannot read " + path.string());
    Digest d;
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return d.hex();
}

std::string sha256_text(const std::string& text)
{
    Digest d;
    d.update(text.data(), text.size());
    return d.hex();
}

void Manifest::set(const std::string& key, const std::string& value)
{
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    entries_.emplace_back(key, value);
}

void Manifest::set(const std::string& key, double value)
{
    set(key, csv::format(value));
}

void Manifest::set(const std::string& key, long long value)
{
    set(key, csv::format(value));
}

void Manifest::add_file(const std::filesystem::path& path)
{
    const std::string name = path.filename().string();
    set("file." + name + ".sha256", sha256_file(path));
    set("file." + name + ".bytes", static_cast<long long>(std::filesystem::file_size(path)));
}

void Manifest::write(const std::filesystem::path& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw InvalidArgument("cannot write " + path.string());
    for (const auto& [k, v] : entries_) {
        std::string flat = v;
        for (char& c : flat)
            if (c == '\n' || c == '\r')
                c = ' ';
        out << k << " = " << flat << '\n';
    }
    if (!out)
        throw Error("write failed: " + path.string());
}

Manifest Manifest::read(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw InvalidArgument("cannot read " + path.string());
    Manifest m;
    std::string line;
    while (std::getline(in, line)) {
        const auto pos = line.find(" = ");
        if (pos == std::string::npos)
            continue;
        m.entries_.emplace_back(line.substr(0, pos), line.substr(pos + 3));
    }
    return m;
}

std::string Manifest::get(const std::string& key) const
{
    for (const auto& [k, v] : entries_)
        if (k == key)
            return v;
    return {};
}

}  // namespace kslab::cli

#include <doctest.h>

#include "app.hpp"
#include "manifest.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

namespace fs = std::filesystem;
using namespace kslab::cli;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

class Sandbox {
public:
    Sandbox()
    {
        static int counter = 0;
        dir_ = fs::temp_directory_path() /
               ("kslab_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    ~Sandbox() { fs::remove_all(dir_); }
    const fs::path& dir() const { return dir_; }

    fs::path config(const std::string& name, const std::string& json) const
    {
        const fs::path p = dir_ / name;
        std::ofstream(p) << json;
        return p;
    }

    Result run(std::vector<std::string> args) const
    {
        std::ostringstream out, err;
        Result r;
        r.code = kslab::cli::run(args, out, err);
        r.out = out.str();
        r.err = err.str();
        return r;
    }

private:
    fs::path dir_;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string decay_config(int workers)
{
    return R"({"schema_version": 1, "subcommand": "decay", "seed": 42, "workers": )" +
           std::to_string(workers) +
           R"(, "params": {"potential": {"kind": "iid", "scale": 3.0}, "L": 8, "trials": 200,
               "fit": {"n_lo": 1, "n_hi": 8}}})";
}

}  // namespace

TEST_CASE("sha256 matches the published test vectors")
{
    CHECK(sha256_text("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_text("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("command line errors exit with the validation code")
{
    Sandbox box;
    CHECK(box.run({"--version"}).code == kExitOk);
    CHECK(box.run({}).code == kExitValidation);
    CHECK(box.run({"--config", (box.dir() / "missing.json").string()}).code == kExitValidation);
    const auto bad = box.config("bad.json", "{not json");
    CHECK(box.run({"--config", bad.string()}).code == kExitValidation);
}

TEST_CASE("config validation names the offending key")
{
    Sandbox box;
    const auto out = (box.dir() / "out").string();
    const auto typo = box.config("typo.json", R"({"schema_version": 1, "subcommand": "decay", "seed": 1,
        "params": {"potential": {"kind": "iid", "scael": 2}, "L": 3, "trials": 10}})");
    Result r = box.run({"--config", typo.string(), "--out", out});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("params.potential.scael") != std::string::npos);

    const auto missing = box.config("missing.json", R"({"schema_version": 1, "subcommand": "decay", "seed": 1,
        "params": {"potential": {"kind": "iid"}, "L": 3}})");
    r = box.run({"--config", missing.string(), "--out", out});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("params.trials") != std::string::npos);

    const auto version = box.config("version.json", R"({"schema_version": 2, "subcommand": "decay", "params": {}})");
    CHECK(box.run({"--config", version.string(), "--out", out}).code == kExitValidation);

    const auto sub = box.config("sub.json", R"({"schema_version": 1, "subcommand": "nope", "params": {}})");
    CHECK(box.run({"--config", sub.string(), "--out", out}).code == kExitValidation);

    const auto wrong_type = box.config("type.json", R"({"schema_version": 1, "subcommand": "diophantine",
        "params": {"alpha": 0.5, "k_max": 3}})");
    CHECK(box.run({"--config", wrong_type.string(), "--out", out}).code == kExitValidation);

    const auto empty = box.config("empty.json", R"({"schema_version": 1, "subcommand": "verify", "seed": 1,
        "params": {"checks": []}})");
    CHECK(box.run({"--config", empty.string(), "--out", out}).code == kExitValidation);
    CHECK_FALSE(fs::exists(fs::path(out) / "manifest.txt"));
}

TEST_CASE("manifest records digests of every output")
{
    Sandbox box;
    const auto cfg = box.config("seq.json", R"({"schema_version": 1, "subcommand": "sequences",
        "params": {"eps": 0.1, "gamma": 1000, "levels": 2}})");
    const fs::path out = box.dir() / "seq";
    const Result r = box.run({"--config", cfg.string(), "--out", out.string()});
    REQUIRE(r.code == kExitOk);
    const Manifest m = Manifest::read(out / "manifest.txt");
    CHECK(m.get("subcommand") == "sequences");
    CHECK(m.get("config_sha256") == sha256_file(cfg));
    CHECK(m.get("file.sequences.csv.sha256") == sha256_file(out / "sequences.csv"));
    CHECK(m.get("file.sequences.csv.bytes") == std::to_string(fs::file_size(out / "sequences.csv")));
    CHECK(m.get("status") == "0");
    CHECK(m.get("seed_source") == "none");
}

TEST_CASE("decay output is identical across worker counts")
{
    Sandbox box;
    const auto c1 = box.config("w1.json", decay_config(1));
    const auto c4 = box.config("w4.json", decay_config(4));
    REQUIRE(box.run({"--config", c1.string(), "--out", (box.dir() / "w1").string()}).code == kExitOk);
    REQUIRE(box.run({"--config", c4.string(), "--out", (box.dir() / "w4").string()}).code == kExitOk);
    const std::string a = slurp(box.dir() / "w1" / "decay.csv");
    CHECK(!a.empty());
    CHECK(a == slurp(box.dir() / "w4" / "decay.csv"));
    const Manifest m1 = Manifest::read(box.dir() / "w1" / "manifest.txt");
    const Manifest m4 = Manifest::read(box.dir() / "w4" / "manifest.txt");
    CHECK(m1.get("workers") == "1");
    CHECK(m4.get("workers") == "4");
    CHECK(m1.get("file.decay.csv.sha256") == m4.get("file.decay.csv.sha256"));
}

TEST_CASE("seed flag overrides the config seed and is recorded")
{
    Sandbox box;
    const auto cfg = box.config("d.json", decay_config(1));
    REQUIRE(box.run({"--config", cfg.string(), "--out", (box.dir() / "a").string()}).code == kExitOk);
    REQUIRE(box.run({"--config", cfg.string(), "--out", (box.dir() / "b").string(), "--seed", "9"}).code ==
            kExitOk);
    const Manifest a = Manifest::read(box.dir() / "a" / "manifest.txt");
    const Manifest b = Manifest::read(box.dir() / "b" / "manifest.txt");
    CHECK(a.get("seed") == "42");
    CHECK(a.get("seed_source") == "config");
    CHECK(b.get("seed") == "9");
    CHECK(b.get("seed_source") == "flag");
    CHECK(slurp(box.dir() / "a" / "decay.csv") != slurp(box.dir() / "b" / "decay.csv"));
}

TEST_CASE("output directory precedence")
{
    Sandbox box;
    const auto cfg = box.config("o.json", R"({"schema_version": 1, "subcommand": "diophantine",
        "output": ")" + (box.dir() / "from_config").string() + R"(",
        "params": {"alpha": "5/7", "k_max": 5}})");
    REQUIRE(box.run({"--config", cfg.string()}).code == kExitOk);
    CHECK(fs::exists(box.dir() / "from_config" / "convergents.csv"));
    ::setenv("KSLAB_OUT", (box.dir() / "from_env").c_str(), 1);
    REQUIRE(box.run({"--config", cfg.string()}).code == kExitOk);
    CHECK(fs::exists(box.dir() / "from_env" / "convergents.csv"));
    REQUIRE(box.run({"--config", cfg.string(), "--out", (box.dir() / "from_flag").string()}).code == kExitOk);
    CHECK(fs::exists(box.dir() / "from_flag" / "convergents.csv"));
    ::unsetenv("KSLAB_OUT");
}

TEST_CASE("a failing run removes its partial outputs")
{
    Sandbox box;
    // The convergent table is written first; q_1 = 2^50 then exceeds the
    // exhaustive gap scan limit.
    const auto cfg = box.config("fail.json", R"({"schema_version": 1, "subcommand": "diophantine",
        "params": {"alpha": "1/1125899906842624", "k_max": 3, "gap_k": 0}})");
    const fs::path out = box.dir() / "fail";
    const Result r = box.run({"--config", cfg.string(), "--out", out.string()});
    CHECK(r.code == kExitValidation);
    CHECK_FALSE(fs::exists(out / "convergents.csv"));
    CHECK_FALSE(fs::exists(out / "gaps.csv"));
    CHECK_FALSE(fs::exists(out / "manifest.txt"));
}

TEST_CASE("construct and spectrum subcommands")
{
    Sandbox box;
    const auto c = box.config("c.json", R"({"schema_version": 1, "subcommand": "construct", "seed": 3,
        "params": {"potential": {"kind": "ks", "scale": {"kind": "power", "C": 1.0, "alpha": 0.5},
                   "functional": {"kind": "previous", "b": 0.5}, "plus_bound": 0.5}, "L": 10}})");
    const fs::path out = box.dir() / "c";
    REQUIRE(box.run({"--config", c.string(), "--out", out.string()}).code == kExitOk);
    CHECK(fs::exists(out / "potential.csv"));
    CHECK(fs::exists(out / "components.csv"));

    const auto s = box.config("s.json", R"({"schema_version": 1, "subcommand": "spectrum",
        "params": {"potential": {"kind": "file", "path": "c/potential.csv"}, "L": 5, "eigenvectors": true}})");
    const fs::path out2 = box.dir() / "s";
    const Result r = box.run({"--config", s.string(), "--out", out2.string()});
    REQUIRE(r.code == kExitOk);
    CHECK(fs::exists(out2 / "spectrum.csv"));
    CHECK(fs::exists(out2 / "eigenvectors.csv"));

    const auto too_wide = box.config("w.json", R"({"schema_version": 1, "subcommand": "spectrum",
        "params": {"potential": {"kind": "file", "path": "c/potential.csv"}, "L": 11}})");
    CHECK(box.run({"--config", too_wide.string(), "--out", (box.dir() / "w").string()}).code == kExitValidation);
}

TEST_CASE("verify reports failures with the numerical exit code and keeps its report")
{
    Sandbox box;
    const auto cfg = box.config("v.json", R"({"schema_version": 1, "subcommand": "verify", "seed": 1,
        "params": {"checks": ["jacobian", "gap"], "quick": true,
                   "test_hooks": {"wrong_sign_kernel": true}}})");
    const fs::path out = box.dir() / "v";
    const Result r = box.run({"--config", cfg.string(), "--out", out.string()});
    CHECK(r.code == kExitNumerical);
    CHECK(fs::exists(out / "verify.csv"));
    CHECK(fs::exists(out / "verify_report.txt"));
    const std::string report = slurp(out / "verify.csv");
    CHECK(report.find("jacobian") != std::string::npos);

    const auto ok = box.config("ok.json", R"({"schema_version": 1, "subcommand": "verify", "seed": 1,
        "params": {"checks": ["jacobian", "gap"], "quick": true}})");
    CHECK(box.run({"--config", ok.string(), "--out", (box.dir() / "ok").string()}).code == kExitOk);
}

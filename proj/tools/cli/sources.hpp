#pragma once

#include "config.hpp"

#include "kslab/localization.hpp"
#include "kslab/potentials.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace kslab::cli {

/// A potential construction parsed from a `potential` config object.
///
/// kinds: zero | file | iid | ks | limit_periodic | qp_bump
struct PotentialSource {
    std::string kind;
    /// SHA-256 of the canonical JSON of the potential object.
    std::string digest;
    Density density = Density::uniform();
    double iid_scale = 1.0;
    std::optional<KsSpec> ks;
    std::optional<LimitPeriodicSpec> limit_periodic;
    std::optional<QpBumpSpec> qp_bump;
    std::optional<PotentialWindow> file;
    /// Scale rule a_n for the bound evaluator (iid and ks only).
    std::function<double(std::int64_t)> scale;

    bool random() const noexcept { return kind != "zero" && kind != "file"; }
    PotentialWindow draw(std::int64_t L, std::uint64_t seed) const;
    WindowSampler sampler(std::int64_t L) const;
};

/// `base_dir` resolves relative file paths in the config.
PotentialSource parse_potential(const Section& s, const std::filesystem::path& base_dir);

Density parse_density(const Section& parent, const std::string& key,
                      const std::filesystem::path& base_dir);

}  // namespace kslab::cli

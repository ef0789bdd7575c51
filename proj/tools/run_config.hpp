#pragma once

// Run configuration for the hse tool: `key = value` lines, `#` starts a
// comment. Every key has a default; a config file overrides the defaults and
// command-line flags override the file.

#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hse/data.hpp"
#include "hse/training.hpp"

namespace hse::cli {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RunConfig {
public:
    RunConfig();

    void load_file(const std::filesystem::path& path);
    void parse(std::string_view text, const std::string& origin);
    /// Throws ConfigError for a key that does not exist.
    void set(const std::string& key, std::string value);
    const std::string& get(const std::string& key) const;

    const std::map<std::string, std::string>& values() const noexcept { return values_; }
    /// Sorted `key = value` lines; parse(text()) reproduces this config.
    std::string text() const;

    /// Typed views. Each throws ConfigError on a malformed or invalid value.
    train::TrainConfig train_config() const;
    data::SynthSpec synth_spec() const;
    data::Correspondence correspondence() const;
    std::vector<std::size_t> topk() const;
    std::size_t max_units() const;
    std::size_t zeroshot_topk() const;
    std::uint64_t seed() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace hse::cli

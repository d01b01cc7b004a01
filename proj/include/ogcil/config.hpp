#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ogcil/engine.hpp"

namespace ogcil {

// Validation failure tied to one config key.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(std::string key, const std::string& message)
        : std::invalid_argument(key + ": " + message), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// Flat run configuration. Keys are listed in README.md; scientific keys have no defaults.
struct RunConfig {
    std::filesystem::path dataset;        // directory with the three text files, or a .npz file
    std::size_t min_class_size = 0;
    TaskLayout layout;
    std::vector<std::uint64_t> seeds;
    EngineConfig engine;                  // seed field unused; runs take it from `seeds`
    std::filesystem::path output_dir;     // empty: resolved by the CLI
    bool baseline = false;                // also run the softmax-threshold baseline
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json config_to_json(const EngineConfig& c);
nlohmann::json run_config_to_json(const RunConfig& c);

// Engine config with the per-run seed filled in.
EngineConfig engine_for_seed(const RunConfig& c, std::uint64_t seed);

Graph load_graph(const RunConfig& c);

}  // namespace ogcil

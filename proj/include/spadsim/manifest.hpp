#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spadsim/config.hpp"

namespace spadsim::cli {

/// Serialized next to every command output; re-running a command from its
/// manifest reproduces the outputs bit-identically.
struct RunManifest {
    std::string command;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config;  // resolved snapshot
    std::vector<std::string> outputs;
};

std::string manifest_path_for(const std::string& out_path);
void write_manifest(const std::string& path, const RunManifest& manifest);
RunManifest read_manifest(const std::string& path);

/// Loads either a flat `key = value` config file or a manifest JSON
/// (recognized by a leading '{') into an existing config.
void apply_config_or_manifest(config::Config& cfg, const std::string& path);

}  // namespace spadsim::cli

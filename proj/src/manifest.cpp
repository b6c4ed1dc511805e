#include "spadsim/manifest.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "spadsim/errors.hpp"
#include "spadsim/rng.hpp"
#include "spadsim/tagio.hpp"

namespace spadsim::cli {

std::string manifest_path_for(const std::string& out_path) {
    return out_path + ".manifest.json";
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
    nlohmann::ordered_json doc;
    doc["format_version"] = tagio::kFormatVersion;
    doc["command"] = manifest.command;
    doc["rng_algorithm"] = kRngAlgorithm;
    doc["seed"] = manifest.seed;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [key, value] : manifest.config) cfg[key] = value;
    doc["config"] = cfg;
    doc["outputs"] = manifest.outputs;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << doc.dump(2) << '\n';
}

RunManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open manifest '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("manifest '" + path + "': " + e.what());
    }
    RunManifest manifest;
    try {
        manifest.command = doc.value("command", "");
        manifest.seed = doc.value("seed", std::uint64_t{0});
        for (const auto& [key, value] : doc.at("config").items())
            manifest.config[key] = value.get<std::string>();
        if (doc.contains("outputs"))
            manifest.outputs = doc["outputs"].get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("manifest '" + path + "': " + e.what());
    }
    return manifest;
}

void apply_config_or_manifest(config::Config& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        const RunManifest manifest = read_manifest(path);
        for (const auto& [key, value] : manifest.config) cfg.set(key, value);
    } else {
        cfg.apply_text(text, path);
    }
}

}  // namespace spadsim::cli

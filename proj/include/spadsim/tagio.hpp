#pragma once

#include <string>

#include "spadsim/engine.hpp"

namespace spadsim::tagio {

inline constexpr char kMagic[4] = {'S', 'P', 'T', 'G'};
inline constexpr std::uint16_t kFormatVersion = 1;

/// Writes the binary tag format: magic "SPTG", u16 version, u32 TDC
/// resolution (ps), u64 tag count, then the tags as u64 picoseconds,
/// ascending. All integers little-endian.
void write_tag_file(const std::string& path, const engine::TagStream& stream);

/// Reads a tag file, validating magic, version, and tag ordering. The
/// format does not carry the run duration; the returned stream's
/// duration_ps is the last tag (0 when empty).
engine::TagStream read_tag_file(const std::string& path);

/// Truth sidecar: one "index,label" line per tag.
void write_truth_sidecar(const std::string& path, const engine::TagStream& stream);
std::vector<engine::TagLabel> read_truth_sidecar(const std::string& path,
                                                 std::uint64_t expected_tags);

}  // namespace spadsim::tagio

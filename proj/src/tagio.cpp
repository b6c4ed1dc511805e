#include "spadsim/tagio.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace spadsim::tagio {

namespace {

template <typename T>
void put_le(std::string& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const unsigned char* p) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        value |= static_cast<T>(p[i]) << (8 * i);
    return value;
}

}  // namespace

void write_tag_file(const std::string& path, const engine::TagStream& stream) {
    std::string buf;
    buf.reserve(18 + 8 * stream.tags.size());
    buf.append(kMagic, 4);
    put_le<std::uint16_t>(buf, kFormatVersion);
    put_le<std::uint32_t>(buf, stream.tdc_resolution_ps);
    put_le<std::uint64_t>(buf, stream.tags.size());
    for (std::uint64_t t : stream.tags) put_le<std::uint64_t>(buf, t);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("short write to '" + path + "'");
}

engine::TagStream read_tag_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::array<unsigned char, 18> header{};
    in.read(reinterpret_cast<char*>(header.data()), header.size());
    if (!in) throw std::runtime_error("'" + path + "': truncated header");
    if (std::memcmp(header.data(), kMagic, 4) != 0)
        throw std::runtime_error("'" + path + "': not a tag file (bad magic)");
    const auto version = get_le<std::uint16_t>(header.data() + 4);
    if (version != kFormatVersion)
        throw std::runtime_error("'" + path + "': unsupported format version " +
                                 std::to_string(version));

    engine::TagStream stream;
    stream.tdc_resolution_ps = get_le<std::uint32_t>(header.data() + 6);
    const auto count = get_le<std::uint64_t>(header.data() + 10);
    stream.tags.resize(count);
    std::vector<unsigned char> body(8 * count);
    in.read(reinterpret_cast<char*>(body.data()),
            static_cast<std::streamsize>(body.size()));
    if (!in) throw std::runtime_error("'" + path + "': truncated body");
    for (std::uint64_t i = 0; i < count; ++i) {
        stream.tags[i] = get_le<std::uint64_t>(body.data() + 8 * i);
        if (i > 0 && stream.tags[i] < stream.tags[i - 1])
            throw std::runtime_error("'" + path + "': tags not ascending");
    }
    stream.duration_ps = count ? stream.tags.back() : 0;
    return stream;
}

void write_truth_sidecar(const std::string& path, const engine::TagStream& stream) {
    if (stream.labels.size() != stream.tags.size())
        throw std::runtime_error("truth sidecar requires labels for every tag");
    std::ostringstream buf;
    for (std::size_t i = 0; i < stream.labels.size(); ++i)
        buf << i << ',' << engine::label_name(stream.labels[i]) << '\n';
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << buf.str();
}

std::vector<engine::TagLabel> read_truth_sidecar(const std::string& path,
                                                 std::uint64_t expected_tags) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::vector<engine::TagLabel> labels;
    labels.reserve(expected_tags);
    std::string line;
    std::uint64_t lineno = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("'" + path + "': malformed line " +
                                     std::to_string(lineno + 1));
        const std::uint64_t index = std::stoull(line.substr(0, comma));
        if (index != lineno)
            throw std::runtime_error("'" + path + "': unexpected index at line " +
                                     std::to_string(lineno + 1));
        labels.push_back(engine::parse_label(line.substr(comma + 1)));
        ++lineno;
    }
    if (labels.size() != expected_tags)
        throw std::runtime_error("'" + path + "': label count mismatch");
    return labels;
}

}  // namespace spadsim::tagio

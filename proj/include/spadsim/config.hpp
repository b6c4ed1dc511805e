#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "spadsim/control.hpp"
#include "spadsim/engine.hpp"
#include "spadsim/model.hpp"

namespace spadsim::config {

/// Flat `key = value` configuration with '#' comments. Every parameter has
/// exactly one canonical key whose suffix names its unit (_ps, _ns, _hz,
/// _min, _s); unknown keys are hard errors so typos in physics parameters
/// cannot pass silently.
class Config {
  public:
    /// All keys present at their default values.
    static Config defaults();

    /// Applies `key = value` lines from a file over the current values.
    void apply_file(const std::string& path);
    void apply_text(const std::string& text, const std::string& source_name);

    /// Applies one KEY=VALUE override (the --set flag).
    void apply_override(const std::string& assignment);

    void set(const std::string& key, const std::string& value);
    const std::string& raw(const std::string& key) const;

    double get_double(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    std::uint32_t get_u32(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    /// Resolved snapshot, ordered by key.
    const std::map<std::string, std::string>& entries() const { return values_; }

    model::DiodeModel diode() const;
    model::BiasPoint bias() const;
    /// Full simulation run configuration; durations and deadtimes are
    /// converted to integer picoseconds here.
    engine::SimConfig sim() const;
    control::DriftModel drift() const;
    control::FeedbackPolicy feedback() const;
    double main_peak_window_ps() const;

  private:
    std::map<std::string, std::string> values_;
};

std::uint64_t seconds_to_ps(double seconds);

}  // namespace spadsim::config

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "phil/coupling.hpp"
#include "phil/gridmodel.hpp"
#include "phil/microgrid.hpp"
#include "phil/transport.hpp"

namespace phil {

inline const std::vector<std::string> kRecorderGroups{"grid", "microgrid", "waveforms", "loadbank", "counters"};

struct RecorderConfig {
    std::vector<std::string> channels = kRecorderGroups;
    std::size_t decimation = 40;
};

struct ScenarioConfig {
    std::string name = "custom";
    std::string description;
    Real dt = 50e-6;
    Real horizon = 10.0;
    Real warmup = 1.0;

    GridParams grid;
    std::vector<LoadStepEvent> events;

    bool droop_enabled = false;
    DroopParams droop;
    PllParams pll;

    ItmVariant itm = ItmVariant::raw;
    LossPolicy grid_loss_policy = LossPolicy::hold_last;
    LossPolicy microgrid_loss_policy = LossPolicy::zero_fill;
    bool reconstruct = true;
    std::size_t ma_window = 0;
    bool stability_guard = true;
    Real guard_window = 0.5;

    TransportConfig transport;

    // Profile paths as written in the file; resolved against base_dir.
    std::optional<std::string> residential_profile;
    std::optional<std::string> heat_pump_profile;
    Real profile_offset_s = 0.0;
    Real v_nominal_rms = 230.0;
    std::optional<Vector3<Real>> loadbank_initial_p;
    std::vector<PhaseOverride> overrides;

    RecorderConfig recorder;
    std::size_t benchmark_probes = 100;
    bool realtime = false;

    std::filesystem::path base_dir = ".";

    std::uint64_t total_steps() const;
    std::uint64_t seed() const { return transport.rng_seed; }
    void validate() const;
};

/// Parses a YAML scenario. Errors carry the origin, line and field path.
ScenarioConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".",
                            const std::string& origin = "<memory>");
ScenarioConfig load_config_file(const std::filesystem::path& path);

/// Lossless YAML serialization (shortest round-trip decimal for reals).
std::string to_yaml(const ScenarioConfig& config);

std::filesystem::path scenario_dir();
std::vector<std::string> bundled_scenarios();

/// A bundled scenario name or a path to a config file.
ScenarioConfig resolve_config(const std::string& name_or_path);

MicrogridConfig build_microgrid_config(const ScenarioConfig& config);

std::string format_real(Real value);

} // namespace phil

#pragma once

// Run configuration: a flat key = value file mirroring the knob names, with
// CLI flags layered on top.  Angles are accepted as rational multiples of pi
// ("pi/5", "2pi/5", "3*pi/10") or as plain radians, so canonical values
// carry no decimal transcription drift.  A previously written manifest.json
// is also accepted as a config source.

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "saddle/experiment.hpp"

namespace saddle {

/// Raised on malformed or constraint-violating configuration; the CLI maps
/// it to exit code 2.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    // system
    double lambda{1.0};
    double mu{1.0};
    double phi{0.6283185307179586};  // pi/5
    double x0{1.0};
    // sweep protocol
    double h{1e-4};
    double delta_h{1e-10};
    long k{10000};
    double theta{0.7853981633974483};  // pi/4
    int bins{100};
    // execution
    std::string stepper{"euler"};      // euler | rk4 | inject
    std::string precision{"double"};   // single | double | emulated:<p>
    double inject_p{23.5};
    double t_max{60.0};
    long long max_steps{200000000};
    std::uint64_t seed{20250808};
    int workers{0};                    // 0 = machine parallelism
};

/// Parses "pi/5", "2pi/5", "3*pi/10", "pi", "0.25", ...; throws config_error.
double parse_angle(const std::string& text);

StepperKind parse_stepper(const std::string& text);
PrecisionPolicy parse_precision(const std::string& text);

/// Reads a key = value file ('#' comments) or a manifest JSON (detected by a
/// leading '{'); unknown keys are rejected.
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});

/// Applies one key = value assignment (the config-file grammar).
void apply_key(RunConfig& cfg, const std::string& key, const std::string& value);

/// Translates to the experiment config; throws config_error on invalid
/// stepper/precision combinations.
SweepConfig to_sweep_config(const RunConfig& cfg);

/// Full resolved configuration plus version, timestamp and seed.  Every
/// output directory gets one; re-running it reproduces the outputs.
nlohmann::json manifest_json(const RunConfig& cfg, const std::string& command);

void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg,
                    const std::string& command);

}  // namespace saddle

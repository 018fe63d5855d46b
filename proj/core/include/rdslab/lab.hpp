#pragma once

#include <cstdint>
#include <stdexcept>
#include <map>
#include <string>
#include <vector>

namespace rdslab {

/// SHA-256 of a byte string, lowercase hex.
std::string sha256_hex(const std::string& bytes);

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parsed and validated experiment configuration.  Unknown fields anywhere
/// in the document are rejected with the offending path; all defaults are
/// materialized so the resolved form is self-contained.
struct ExperimentConfig {
    std::string experiment;    // one of the CLI subcommand kinds
    std::string tuple_json;    // canonical tuple spec (family or custom)
    std::uint64_t seed = 0;
    std::uint64_t streams = 1;
    std::string out_dir = "out";
    bool plots = true;
    std::map<std::string, double> params;  // kind-specific numeric knobs

    std::string resolved_json() const;  // canonical resolved form
};

/// Parses a config document; `experiment_override` (from the subcommand) and
/// the CLI flag overrides are applied before validation.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& experiment_override = "",
                              const std::string& out_override = "",
                              const std::uint64_t* seed_override = nullptr,
                              const std::uint64_t* streams_override = nullptr);

struct RunManifest {
    std::string config_hash;
    std::vector<std::pair<std::string, std::string>> artifacts;  // name, sha256
    double wall_time_s = 0.0;
    std::string version;

    std::string to_json() const;
};

/// Dispatches to the named experiment, writes the CSV/JSON/SVG artifacts and
/// run_manifest.json under the output directory, and returns the manifest.
RunManifest run_experiment(const ExperimentConfig& config);

/// Renders a plain-text summary for a finished run directory.  Throws
/// ConfigError when no manifest is present.
std::string report_run(const std::string& run_dir);

/// Minimal SVG polyline plot (log10 y when log_y is set).
void write_svg_lineplot(const std::string& path, const std::string& title,
                        const std::vector<double>& xs,
                        const std::vector<double>& ys, bool log_y);

}  // namespace rdslab

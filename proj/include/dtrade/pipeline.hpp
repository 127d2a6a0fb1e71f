#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dtrade/analytics.hpp"
#include "dtrade/boosted.hpp"
#include "dtrade/harmonizer.hpp"
#include "dtrade/transport.hpp"

namespace dtrade {

inline constexpr const char* kVersion = "0.1.0";

enum class AllocationMode { subsidiary, parent_hq };
std::string to_string(AllocationMode m);
AllocationMode parse_mode(const std::string& s);

struct PipelineConfig {
    std::string input_dir;
    std::string out_dir = "out";
    std::vector<Year> years;  // empty: every year in the dataset
    std::optional<Year> reference_year;
    std::uint64_t seed = 1;
    int jobs = 1;

    HyperParams params;
    HyperGrid grid;
    bool tune = true;
    std::size_t top_k = 11;
    int importance_shuffles = 5;
    double zero_threshold = 1000.0;
    CleaningOptions cleaning;

    HarmonizeOptions harmonize;

    AllocationMode mode = AllocationMode::subsidiary;
    double domestic_floor_km = 1.0;
    Solver solver = Solver::lp;

    BoundsOptions bounds;

    double top_mass = 0.8;
    int basket_trials = 1000;
    double centrality_teleport = 0.0;
    EmissionBasis emission_basis = EmissionBasis::production;
    bool high_income_only = false;
    bool complexity = true;

    /// INI file; relative paths resolve against the file's directory.
    /// Unknown sections or keys raise UsageError.
    static PipelineConfig load(const std::string& path);
    /// Every setting that can change an output, one "key=value" per line.
    std::string canonical() const;
    std::string digest() const;
};

/// Stage names in execution order.
const std::vector<std::string>& stage_names();

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct OutputDigest {
    std::string file;
    std::string sha256;
};

struct RunManifest {
    std::string version = kVersion;
    std::string config_digest;
    std::string dataset_digest;
    std::uint64_t seed = 0;
    std::vector<StageTiming> stages;
    std::vector<OutputDigest> outputs;
};

/// Runs one stage from persisted intermediates under config.out_dir.
void run_stage(const std::string& stage, const PipelineConfig& config);

/// Runs the given stages (all when empty) and writes manifest.json. A failing
/// stage aborts with its name in the message; earlier outputs stay in place.
RunManifest run_pipeline(const PipelineConfig& config, const std::vector<std::string>& stages = {});

void write_manifest(const RunManifest& manifest, const std::string& path);
RunManifest read_manifest(const std::string& path);

}  // namespace dtrade

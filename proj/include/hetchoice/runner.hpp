#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hetchoice/report.hpp"

namespace hetchoice {

// Exit codes shared by the library entry points and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNotConverged = 2;

struct EstimateArgs {
    std::string model;  // bl|mixl|lcm|lcml|ol|lr
    std::filesystem::path spec_path;
    std::filesystem::path data_path;
    std::optional<std::filesystem::path> schema_path;  // default: <data>.vars.json
    std::filesystem::path out_dir = ".";
    std::optional<int> draws;           // overrides the spec's draw count
    std::optional<std::uint64_t> seed;  // overrides the spec's draw seed
    std::string bic_n = "observations";  // or "individuals"
    int threads = 1;
    std::optional<int> max_iterations;
    std::optional<double> grad_tol;
    std::optional<int> restarts;  // default 5 for LCM/LCML, 1 otherwise
};

/// Fits the model and writes result.json plus result.txt into the out dir.
/// Returns 0 on success, 2 on non-convergence (diagnostics still written).
int run_estimate(const EstimateArgs& args);

struct RecoverArgs {
    std::filesystem::path truth_path;
    std::string model;
    int n_individuals = 1000;
    int seeds = 20;
    int obs_per_individual = 3;
    std::uint64_t base_seed = 1;
    std::filesystem::path out_dir = ".";
    int threads = 1;
    std::optional<int> draws;
    std::optional<int> restarts;
};

/// Simulates and re-estimates per seed; writes recover_report.json. Returns 0
/// iff every parameter's 2-robust-SE coverage is at least 0.9.
int run_recover(const RecoverArgs& args);

struct SimulateArgs {
    std::filesystem::path truth_path;
    std::filesystem::path out_dir = ".";
    std::optional<int> n_individuals;
    std::optional<int> obs_per_individual;
    std::optional<long long> total_observations;
    std::uint64_t seed = 1;
};

/// Writes data.csv, data.vars.json and manifest.json for the given truth.
int run_simulate(const SimulateArgs& args);

struct ClassifyArgs {
    std::filesystem::path data_path;  // one-column CSV, optional header
    int k = 3;
    std::filesystem::path out_dir = ".";
};

/// Jenks natural breaks: writes breaks.json and classified.csv.
int run_classify(const ClassifyArgs& args);

struct CompareArgs {
    std::vector<std::filesystem::path> results;
    std::optional<std::filesystem::path> out_path;
};

/// Side-by-side fit table of several estimation results, sorted by BIC.
int run_compare(const CompareArgs& args);

struct ValidateArgs {
    std::filesystem::path data_path;
    std::optional<std::filesystem::path> schema_path;
    std::optional<std::filesystem::path> out_path;
};

/// Emits the dataset validation report as JSON (stdout or --out).
int run_validate(const ValidateArgs& args);

/// Resolves the default output directory from HETCHOICE_OUT_DIR when the
/// caller left it at ".".
std::filesystem::path resolve_out_dir(const std::filesystem::path& requested);

}  // namespace hetchoice

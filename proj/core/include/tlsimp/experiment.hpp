#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tlsimp {

/// Command-line overrides applied on top of a config file.
struct RunOverrides {
    std::optional<std::uint64_t> seed;
    /// When set, the config's `kind` must equal this value.
    std::optional<std::string> expected_kind;
    /// Sweep worker threads; 0 means hardware concurrency.
    std::optional<unsigned> threads;
};

struct RunReport {
    std::string kind;
    std::filesystem::path out_dir;
    /// File names written into out_dir, manifest last.
    std::vector<std::string> outputs;
    /// FNV-1a 64 of the canonical effective config, 16 hex digits.
    std::string config_hash;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0;
    /// Human-readable result lines.
    std::vector<std::string> summary;
};

/// Experiment kinds accepted in the config's `kind` field.
[[nodiscard]] const std::vector<std::string>& experiment_kinds();

/// Parses, validates and runs a JSON config file. Relative input paths are
/// resolved against the config's directory. An empty out_dir falls back to
/// the config's `output_dir`.
RunReport run_file(const std::filesystem::path& config, const std::filesystem::path& out_dir,
                   const RunOverrides& overrides = {});

/// As run_file, with relative input paths resolved against base_dir.
RunReport run_text(const std::string& config_text, const std::filesystem::path& base_dir,
                   const std::filesystem::path& out_dir, const RunOverrides& overrides = {});

/// 2 for ValidationError, 3 for NumericalError, 4 for IoError, 1 otherwise.
[[nodiscard]] int exit_code_for(const std::exception& e) noexcept;

/// FNV-1a 64-bit hash.
[[nodiscard]] std::uint64_t fnv1a64(const std::string& data) noexcept;

/// Reshapes a result JSON written by run into long-format rows
/// `series,x,y,z`. Line series leave z empty. Returns the row count.
std::size_t emit_plot_data(const std::filesystem::path& result_json, const std::filesystem::path& out_csv);

}  // namespace tlsimp

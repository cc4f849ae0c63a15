#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "tlsimp/analysis/circle_fit.hpp"
#include "tlsimp/analysis/power_law.hpp"
#include "tlsimp/analysis/tunneling.hpp"
#include "tlsimp/spectrum.hpp"
#include "tlsimp/sweeps.hpp"

namespace tlsimp::io {

/// Version written to every file as `schema: 1`.
inline constexpr int kSchemaVersion = 1;

/// Power reported for an exactly zero amplitude, photons/s.
inline constexpr double kPowerFloor = 1e-30;

/// Shortest decimal that round-trips to the same double.
[[nodiscard]] std::string format_number(double value);

/// Parses a full field as a double; throws ValidationError naming `what`.
[[nodiscard]] double parse_number(const std::string& text, const std::string& what);

/// 10*log10(power) with power clamped below at kPowerFloor.
[[nodiscard]] double power_db(double power);

/// Numeric table with `# key: value` metadata lines above the column
/// header and free `# ...` comment lines after the rows.
struct CsvTable {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> trailer;

    /// Value of a metadata key; throws ValidationError when absent.
    [[nodiscard]] const std::string& meta_value(const std::string& key) const;
    [[nodiscard]] bool has_meta(const std::string& key) const;
};

/// Writes `# schema: 1` and `# kind: <kind>` before the table's own metadata.
void write_csv(const std::filesystem::path& path, const std::string& kind, const CsvTable& table);

/// Reads a table written by write_csv, checking schema, kind and the exact
/// column list.
[[nodiscard]] CsvTable read_csv(const std::filesystem::path& path, const std::string& kind,
                                const std::vector<std::string>& columns);

void write_text(const std::filesystem::path& path, const std::string& text);
[[nodiscard]] std::string read_text(const std::filesystem::path& path);

/// Output and input fields on one detection comb, rotating frame.
struct SpectrumFile {
    ComplexSpectrum output;
    ComplexSpectrum drive;
};

inline const std::vector<std::string> kSpectrumColumns{"freq_hz", "re_aout", "im_aout", "re_ain", "im_ain"};
inline const std::vector<std::string> kS21Columns{"freq_hz", "re_s21", "im_s21"};
inline const std::vector<std::string> kQiColumns{"photons", "q_i"};
inline const std::vector<std::string> kPowerLawColumns{"photons", "power"};

void write_spectrum_csv(const std::filesystem::path& path, const ComplexSpectrum& output,
                        const ComplexSpectrum& drive,
                        const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
[[nodiscard]] SpectrumFile read_spectrum_csv(const std::filesystem::path& path);

void write_s21_csv(const std::filesystem::path& path, const analysis::S21Trace& trace,
                   const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
[[nodiscard]] analysis::S21Trace read_s21_csv(const std::filesystem::path& path);

void write_qi_csv(const std::filesystem::path& path, const std::vector<analysis::QiPoint>& points,
                  const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
[[nodiscard]] std::vector<analysis::QiPoint> read_qi_csv(const std::filesystem::path& path);

void write_powerlaw_csv(const std::filesystem::path& path, const std::vector<analysis::PowerLawPoint>& points,
                        const std::vector<std::pair<std::string, std::string>>& extra_meta = {});
[[nodiscard]] std::vector<analysis::PowerLawPoint> read_powerlaw_csv(const std::filesystem::path& path);

/// Column names of a sweep table: axis, IMP orders, drive tone.
[[nodiscard]] std::vector<std::string> sweep_columns(const SweepResult& result);

/// One row per axis point. Power-law fits, when given, are appended as
/// `# fit: order=<m> k=<k> l=<l> stderr_k=<s> n_min=<a> n_max=<b>` lines.
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& result,
                     const std::vector<std::pair<int, analysis::PowerLawFit>>& fits = {});

}  // namespace tlsimp::io

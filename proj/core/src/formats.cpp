#include "tlsimp/formats.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "tlsimp/errors.hpp"

namespace tlsimp::io {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, sep)) out.push_back(trim(field));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string join(const std::vector<std::string>& xs, char sep) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += xs[i];
    }
    return out;
}

std::string where(const fs::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

using Meta = std::vector<std::pair<std::string, std::string>>;

}  // namespace

std::string format_number(double value) {
    if (!std::isfinite(value)) throw ValidationError("format_number: value is not finite");
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), res.ptr);
}

double parse_number(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc{} || res.ptr != t.data() + t.size() || !std::isfinite(v))
        throw ValidationError(what + ": '" + text + "' is not a finite number");
    return v;
}

double power_db(double power) { return 10.0 * std::log10(std::max(power, kPowerFloor)); }

const std::string& CsvTable::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta) {
        if (k == key) return v;
    }
    throw ValidationError("missing header field '" + key + "'");
}

bool CsvTable::has_meta(const std::string& key) const {
    return std::any_of(meta.begin(), meta.end(), [&](const auto& kv) { return kv.first == key; });
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream os;
    os << in.rdbuf();
    if (in.bad()) throw IoError("read from '" + path.string() + "' failed");
    return os.str();
}

void write_csv(const fs::path& path, const std::string& kind, const CsvTable& table) {
    std::string text;
    text += "# schema: " + std::to_string(kSchemaVersion) + "\n";
    text += "# kind: " + kind + "\n";
    for (const auto& [k, v] : table.meta) text += "# " + k + ": " + v + "\n";
    text += join(table.columns, ',') + "\n";
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size())
            throw ValidationError("write_csv: row width does not match the column count");
        std::vector<std::string> cells;
        cells.reserve(row.size());
        for (double v : row) cells.push_back(format_number(v));
        text += join(cells, ',') + "\n";
    }
    for (const auto& line : table.trailer) text += "# " + line + "\n";
    write_text(path, text);
}

CsvTable read_csv(const fs::path& path, const std::string& kind, const std::vector<std::string>& columns) {
    const std::string text = read_text(path);
    std::istringstream is(text);
    CsvTable table;
    std::string line;
    std::size_t lineno = 0;
    bool header_done = false;
    while (std::getline(is, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '#') {
            const std::string body = trim(line.substr(1));
            if (header_done) {
                table.trailer.push_back(body);
                continue;
            }
            const auto colon = body.find(':');
            if (colon == std::string::npos)
                throw ValidationError(where(path, lineno) + ": header line must be '# key: value'");
            table.meta.emplace_back(trim(body.substr(0, colon)), trim(body.substr(colon + 1)));
            continue;
        }
        if (!header_done) {
            table.columns = split(line, ',');
            if (table.columns != columns)
                throw ValidationError(where(path, lineno) + ": expected columns '" + join(columns, ',') +
                                      "', found '" + line + "'");
            header_done = true;
            continue;
        }
        if (!table.trailer.empty())
            throw ValidationError(where(path, lineno) + ": data row after trailing comment lines");
        const auto cells = split(line, ',');
        if (cells.size() != columns.size())
            throw ValidationError(where(path, lineno) + ": expected " + std::to_string(columns.size()) +
                                  " fields, found " + std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j)
            row.push_back(parse_number(cells[j], where(path, lineno) + " column " + columns[j]));
        table.rows.push_back(std::move(row));
    }
    if (!header_done) throw ValidationError(path.string() + ": no column header line");

    const std::string schema = table.has_meta("schema") ? table.meta_value("schema") : "";
    if (schema != std::to_string(kSchemaVersion))
        throw ValidationError(path.string() + ": unsupported schema '" + schema + "' (expected " +
                              std::to_string(kSchemaVersion) + ")");
    const std::string found_kind = table.has_meta("kind") ? table.meta_value("kind") : "";
    if (found_kind != kind)
        throw ValidationError(path.string() + ": expected kind '" + kind + "', found '" + found_kind + "'");
    table.meta.erase(table.meta.begin(), table.meta.begin() + 2);
    return table;
}

void write_spectrum_csv(const fs::path& path, const ComplexSpectrum& output, const ComplexSpectrum& drive,
                        const Meta& extra_meta) {
    if (!output.same_grid(drive)) throw ValidationError("write_spectrum_csv: output and drive grids differ");
    if (output.frame().kind != Frame::Kind::rotating)
        throw ValidationError("write_spectrum_csv: spectrum must be in a rotating frame");
    CsvTable t;
    t.meta.emplace_back("frame_hz", format_number(output.frame().ref_hz));
    t.meta.emplace_back("units", "amplitudes in sqrt(photons/s)");
    t.meta.insert(t.meta.end(), extra_meta.begin(), extra_meta.end());
    t.columns = kSpectrumColumns;
    for (std::size_t i = 0; i < output.size(); ++i) {
        const Complex a = output.amplitude(i);
        const Complex b = drive.amplitude(i);
        t.rows.push_back({output.frequency(i), a.real(), a.imag(), b.real(), b.imag()});
    }
    write_csv(path, "spectrum", t);
}

SpectrumFile read_spectrum_csv(const fs::path& path) {
    const auto t = read_csv(path, "spectrum", kSpectrumColumns);
    const double frame = parse_number(t.meta_value("frame_hz"), path.string() + " frame_hz");
    std::vector<double> f;
    std::vector<Complex> out;
    std::vector<Complex> in;
    for (const auto& r : t.rows) {
        f.push_back(r[0]);
        out.emplace_back(r[1], r[2]);
        in.emplace_back(r[3], r[4]);
    }
    try {
        return {ComplexSpectrum(Frame::rotating(frame), f, std::move(out)),
                ComplexSpectrum(Frame::rotating(frame), f, std::move(in))};
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_s21_csv(const fs::path& path, const analysis::S21Trace& trace, const Meta& extra_meta) {
    if (trace.frequencies_hz.size() != trace.s21.size())
        throw ValidationError("write_s21_csv: frequency and S21 lengths differ");
    CsvTable t;
    if (std::isfinite(trace.power_dbm)) t.meta.emplace_back("power_dbm", format_number(trace.power_dbm));
    if (std::isfinite(trace.temperature_k)) t.meta.emplace_back("temperature_k", format_number(trace.temperature_k));
    t.meta.insert(t.meta.end(), extra_meta.begin(), extra_meta.end());
    t.columns = kS21Columns;
    for (std::size_t i = 0; i < trace.s21.size(); ++i)
        t.rows.push_back({trace.frequencies_hz[i], trace.s21[i].real(), trace.s21[i].imag()});
    write_csv(path, "s21", t);
}

analysis::S21Trace read_s21_csv(const fs::path& path) {
    const auto t = read_csv(path, "s21", kS21Columns);
    analysis::S21Trace trace;
    if (t.has_meta("power_dbm")) trace.power_dbm = parse_number(t.meta_value("power_dbm"), "power_dbm");
    if (t.has_meta("temperature_k"))
        trace.temperature_k = parse_number(t.meta_value("temperature_k"), "temperature_k");
    for (const auto& r : t.rows) {
        trace.frequencies_hz.push_back(r[0]);
        trace.s21.emplace_back(r[1], r[2]);
    }
    return trace;
}

void write_qi_csv(const fs::path& path, const std::vector<analysis::QiPoint>& points, const Meta& extra_meta) {
    CsvTable t;
    t.meta = extra_meta;
    t.columns = kQiColumns;
    for (const auto& p : points) t.rows.push_back({p.photons, p.q_i});
    write_csv(path, "qi", t);
}

std::vector<analysis::QiPoint> read_qi_csv(const fs::path& path) {
    const auto t = read_csv(path, "qi", kQiColumns);
    std::vector<analysis::QiPoint> out;
    for (const auto& r : t.rows) out.push_back({r[0], r[1]});
    return out;
}

void write_powerlaw_csv(const fs::path& path, const std::vector<analysis::PowerLawPoint>& points,
                        const Meta& extra_meta) {
    CsvTable t;
    t.meta = extra_meta;
    t.columns = kPowerLawColumns;
    for (const auto& p : points) t.rows.push_back({p.photons, p.power});
    write_csv(path, "powerlaw", t);
}

std::vector<analysis::PowerLawPoint> read_powerlaw_csv(const fs::path& path) {
    const auto t = read_csv(path, "powerlaw", kPowerLawColumns);
    std::vector<analysis::PowerLawPoint> out;
    for (const auto& r : t.rows) out.push_back({r[0], r[1]});
    return out;
}

std::vector<std::string> sweep_columns(const SweepResult& result) {
    std::vector<std::string> cols{result.axis_kind == SweepAxis::photons ? "photons" : "f_center_hz"};
    for (int m : result.orders) cols.push_back("imp_order_" + std::to_string(m) + "_db");
    cols.emplace_back("drive_db");
    cols.emplace_back("drive_transmission_db");
    return cols;
}

void write_sweep_csv(const fs::path& path, const SweepResult& result,
                     const std::vector<std::pair<int, analysis::PowerLawFit>>& fits) {
    CsvTable t;
    t.meta.emplace_back("axis", result.axis_kind == SweepAxis::photons ? "photons" : "f_center_hz");
    t.meta.emplace_back("db_reference", "10*log10(|a_out|^2 / (1 photon/s))");
    t.columns = sweep_columns(result);
    for (std::size_t i = 0; i < result.axis.size(); ++i) {
        std::vector<double> row{result.axis[i]};
        for (double p : result.imp_powers[i]) row.push_back(power_db(p));
        row.push_back(power_db(result.drive_powers[i]));
        row.push_back(power_db(result.drive_transmission[i]));
        t.rows.push_back(std::move(row));
    }
    for (const auto& [order, fit] : fits) {
        t.trailer.push_back("fit: order=" + std::to_string(order) + " k=" + format_number(fit.k) +
                            " l=" + format_number(fit.l) + " stderr_k=" + format_number(fit.stderr_k) +
                            " n_min=" + format_number(fit.n_min) + " n_max=" + format_number(fit.n_max));
    }
    write_csv(path, "sweep", t);
}

}  // namespace tlsimp::io

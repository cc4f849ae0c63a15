#include <string>
#include <vector>

#include <json.hpp>

#include "tlsimp/errors.hpp"
#include "tlsimp/experiment.hpp"
#include "tlsimp/formats.hpp"

namespace tlsimp {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

class Rows {
public:
    void line(const std::string& series, double x, double y) {
        text_ += series + "," + io::format_number(x) + "," + io::format_number(y) + ",\n";
        ++count_;
    }
    void cell(const std::string& series, double x, double y, double z) {
        text_ += series + "," + io::format_number(x) + "," + io::format_number(y) + "," + io::format_number(z) + "\n";
        ++count_;
    }
    [[nodiscard]] const std::string& text() const noexcept { return text_; }
    [[nodiscard]] std::size_t count() const noexcept { return count_; }

private:
    std::string text_;
    std::size_t count_ = 0;
};

const json& field(const json& j, const std::string& key, const fs::path& path) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(path.string() + ": missing field '" + key + "'");
    return j.at(key);
}

std::vector<double> numbers(const json& j, const std::string& key, const fs::path& path) {
    const json& v = field(j, key, path);
    if (!v.is_array()) throw ValidationError(path.string() + ": field '" + key + "' must be an array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ValidationError(path.string() + ": field '" + key + "' holds a non-number");
        out.push_back(x.get<double>());
    }
    return out;
}

void sweep_rows(const json& j, const fs::path& path, Rows& rows) {
    const auto axis = numbers(j, "axis", path);
    const auto& orders = field(j, "orders", path);
    const auto& imp_db = field(j, "imp_db", path);
    if (!imp_db.is_array() || imp_db.size() != axis.size())
        throw ValidationError(path.string() + ": imp_db does not match the axis length");
    for (std::size_t o = 0; o < orders.size(); ++o) {
        const std::string series = "imp_order_" + std::to_string(orders[o].get<int>()) + "_db";
        for (std::size_t i = 0; i < axis.size(); ++i) rows.line(series, axis[i], imp_db[i].at(o).get<double>());
    }
    const auto drive = numbers(j, "drive_power", path);
    const auto trans = numbers(j, "drive_transmission", path);
    for (std::size_t i = 0; i < axis.size(); ++i) rows.line("drive_db", axis[i], io::power_db(drive.at(i)));
    for (std::size_t i = 0; i < axis.size(); ++i)
        rows.line("drive_transmission_db", axis[i], io::power_db(trans.at(i)));
    if (field(j, "axis_kind", path) == "f_center_hz") {
        for (const auto& s : field(j, "spectra", path)) {
            const double fc = field(s, "axis", path).get<double>();
            const auto f = numbers(s, "frequencies_hz", path);
            const auto db = numbers(s, "output_db", path);
            for (std::size_t k = 0; k < f.size(); ++k) rows.cell("heatmap_db", fc, f[k], db.at(k));
        }
    }
}

void reconstruction_rows(const json& j, const fs::path& path, Rows& rows) {
    const json& c = field(j, "curve", path);
    const auto amp = numbers(c, "amplitude", path);
    const auto rec = numbers(c, "reconstructed_hz", path);
    const auto fit = numbers(c, "model_hz", path);
    for (std::size_t i = 0; i < amp.size(); ++i) rows.line("kappa_tls_reconstructed_hz", amp[i], rec.at(i));
    for (std::size_t i = 0; i < amp.size(); ++i) rows.line("kappa_tls_fitted_hz", amp[i], fit.at(i));
    if (c.contains("truth_hz")) {
        const auto truth = numbers(c, "truth_hz", path);
        for (std::size_t i = 0; i < amp.size(); ++i) rows.line("kappa_tls_true_hz", amp[i], truth.at(i));
    }
}

void beta_rows(const json& j, const fs::path& path, Rows& rows) {
    for (const auto& s : field(j, "slopes", path))
        rows.line("k_vs_beta", field(s, "beta", path).get<double>(), field(s, "k", path).get<double>());
}

void simulation_rows(const json& j, const fs::path& path, Rows& rows) {
    const auto f = numbers(j, "frequencies_hz", path);
    const auto db = numbers(j, "output_db", path);
    for (std::size_t i = 0; i < f.size(); ++i) rows.line("output_db", f[i], db.at(i));
}

}  // namespace

std::size_t emit_plot_data(const fs::path& result_json, const fs::path& out_csv) {
    json j;
    try {
        j = json::parse(io::read_text(result_json));
    } catch (const json::exception& e) {
        throw ValidationError(result_json.string() + ": not valid JSON: " + e.what());
    }
    if (!j.is_object() || j.value("schema", 0) != io::kSchemaVersion)
        throw ValidationError(result_json.string() + ": unsupported or missing schema (expected " +
                              std::to_string(io::kSchemaVersion) + ")");
    const std::string kind = j.value("kind", "");
    Rows rows;
    try {
        if (kind == "sweep") {
            sweep_rows(j, result_json, rows);
        } else if (kind == "reconstruction" || kind == "roundtrip") {
            reconstruction_rows(j, result_json, rows);
        } else if (kind == "beta-scan") {
            beta_rows(j, result_json, rows);
        } else if (kind == "simulation") {
            simulation_rows(j, result_json, rows);
        } else {
            throw ValidationError(result_json.string() + ": no plot data for result kind '" + kind + "'");
        }
    } catch (const json::exception& e) {
        throw ValidationError(result_json.string() + ": malformed result: " + e.what());
    }
    io::write_text(out_csv, "# schema: " + std::to_string(io::kSchemaVersion) + "\n# kind: plot-data\n# source: " +
                                kind + "\nseries,x,y,z\n" + rows.text());
    return rows.count();
}

}  // namespace tlsimp

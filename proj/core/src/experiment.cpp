#include "tlsimp/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>

#include "tlsimp/analysis/circle_fit.hpp"
#include "tlsimp/analysis/power_law.hpp"
#include "tlsimp/analysis/tunneling.hpp"
#include "tlsimp/errors.hpp"
#include "tlsimp/formats.hpp"
#include "tlsimp/reconstruction.hpp"
#include "tlsimp/simulator.hpp"
#include "tlsimp/sweeps.hpp"

#ifndef TLSIMP_VERSION
#define TLSIMP_VERSION "0.0.0"
#endif

namespace tlsimp {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

/// Read access to one config object that remembers which keys were used,
/// so leftovers can be reported as unknown.
class Section {
public:
    Section(const json& node, std::string path) : node_(&node), path_(std::move(path)) {
        if (!node.is_object()) fail("", "must be an object");
    }

    [[nodiscard]] const std::string& path() const noexcept { return path_; }
    [[nodiscard]] bool has(const std::string& key) const { return node_->contains(key); }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        throw ValidationError((key.empty() ? path_ : path_ + "." + key) + ": " + msg);
    }

    const json& raw(const std::string& key) {
        if (!has(key)) fail(key, "required field is missing");
        used_.insert(key);
        return node_->at(key);
    }

    double number(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number()) fail(key, "must be a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(key, "must be finite");
        return x;
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }
    std::optional<double> optional_number(const std::string& key) {
        return has(key) ? std::optional<double>(number(key)) : std::nullopt;
    }

    std::int64_t integer(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number_integer()) fail(key, "must be an integer");
        return v.get<std::int64_t>();
    }
    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        return has(key) ? integer(key) : fallback;
    }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_boolean()) fail(key, "must be true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_string() || v.get<std::string>().empty()) fail(key, "must be a non-empty string");
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback) {
        return has(key) ? string(key) : fallback;
    }

    std::vector<double> numbers(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_array() || v.empty()) fail(key, "must be a non-empty array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number() || !std::isfinite(v[i].get<double>()))
                fail(key + "[" + std::to_string(i) + "]", "must be a finite number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    Section child(const std::string& key) { return Section(raw(key), path_ + "." + key); }

    /// Rejects keys that were never read.
    void finish() const {
        for (const auto& item : node_->items()) {
            if (!used_.count(item.key())) fail(item.key(), "unknown key");
        }
    }

private:
    const json* node_;
    std::string path_;
    std::set<std::string> used_;
};

int to_int(Section& s, const std::string& key, std::int64_t fallback, std::int64_t lo, std::int64_t hi) {
    const auto v = s.integer(key, fallback);
    if (v < lo || v > hi) s.fail(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(v);
}

double positive(Section& s, const std::string& key) {
    const double v = s.number(key);
    if (!(v > 0.0)) s.fail(key, "must be positive");
    return v;
}

double positive(Section& s, const std::string& key, double fallback) {
    return s.has(key) ? positive(s, key) : fallback;
}

/// Wraps library validation so messages carry the config path.
template <typename Fn>
void checked(const std::string& path, Fn&& fn) {
    try {
        fn();
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Config sections

ResonatorModel parse_model(Section s, bool with_beta) {
    ResonatorModel m;
    m.f0_hz = s.number("f0_hz");
    m.kappa0_hz = s.number("kappa0_hz");
    m.kappa_ext_hz = s.number("kappa_ext_hz");
    m.kappa_tls_hz = s.number("kappa_tls_hz");
    m.a_c = s.number("a_c");
    if (!with_beta && s.has("beta")) s.fail("beta", "not allowed; beta_scan.betas sets it");
    m.beta = with_beta ? s.number("beta") : 0.5;
    s.finish();
    checked(s.path(), [&] { m.validate(); });
    return m;
}

enum class DriveLevel { required, forbidden, optional };

struct DriveSpec {
    DriveComb drive;
    std::optional<double> photons;
    bool amplitude_given = false;
};

DriveSpec parse_drive(Section s, const ResonatorModel& model, DriveLevel level, bool center_allowed) {
    DriveSpec d;
    d.drive.delta_hz = positive(s, "delta_hz", 100.0);
    d.drive.phase1 = s.number("phase1", 0.0);
    d.drive.phase2 = s.number("phase2", 0.0);
    d.drive.f_center_hz = model.f0_hz;
    if (center_allowed) d.drive.f_center_hz = s.number("f_center_hz", model.f0_hz);
    const bool has_photons = s.has("photons");
    const bool has_amplitude = s.has("amplitude");
    if (level == DriveLevel::forbidden) {
        if (has_photons || has_amplitude)
            s.fail(has_photons ? "photons" : "amplitude", "not allowed; the sweep sets the drive level");
    } else {
        if (has_photons && has_amplitude) s.fail("photons", "give either photons or amplitude, not both");
        if (level == DriveLevel::required && !has_photons && !has_amplitude)
            s.fail("photons", "required field is missing (or give amplitude)");
        if (has_photons) {
            d.photons = s.number("photons");
            if (!(*d.photons >= 0.0)) s.fail("photons", "must be non-negative");
            d.drive.amplitude = drive_for_photon_number(model, *d.photons);
        } else if (has_amplitude) {
            d.drive.amplitude = s.number("amplitude");
            if (!(d.drive.amplitude >= 0.0)) s.fail("amplitude", "must be non-negative");
            d.amplitude_given = true;
        }
    }
    s.finish();
    checked(s.path(), [&] { d.drive.validate(); });
    return d;
}

int parse_detection(Section s) {
    const int n = to_int(s, "n_tones", 31, 3, 100001);
    if (n % 2 == 0) s.fail("n_tones", "must be odd");
    s.finish();
    return n;
}

struct SimulationSpec {
    SimulationConfig cfg;
    std::optional<double> noise_dbc;
};

SimulationSpec parse_simulation(Section s, bool allow_dbc) {
    SimulationSpec out;
    auto& c = out.cfg;
    c.frame_hz = s.optional_number("frame_hz");
    c.transient_periods = to_int(s, "transient_periods", c.transient_periods, 1, 1000000);
    c.measure_periods = to_int(s, "measure_periods", c.measure_periods, 1, 1000000);
    c.rel_tol = positive(s, "rel_tol", c.rel_tol);
    c.abs_tol = positive(s, "abs_tol", c.abs_tol);
    c.max_step_s = s.number("max_step_s", c.max_step_s);
    c.samples_per_period = to_int(s, "samples_per_period", c.samples_per_period, 8, 1 << 24);
    c.max_settle_windows = to_int(s, "max_settle_windows", c.max_settle_windows, 1, 1000000);
    c.steady_state_tol = positive(s, "steady_state_tol", c.steady_state_tol);
    c.noise_amplitude = s.number("noise_amplitude", 0.0);
    if (allow_dbc && s.has("noise_dbc")) {
        if (s.has("noise_amplitude")) s.fail("noise_dbc", "give either noise_amplitude or noise_dbc, not both");
        out.noise_dbc = s.number("noise_dbc");
    }
    s.finish();
    checked(s.path(), [&] { c.validate(); });
    return out;
}

struct PhotonAxis {
    std::vector<double> photons;
    double fit_min = 0.0;
    double fit_max = 0.0;
};

PhotonAxis parse_photon_axis(Section s) {
    PhotonAxis a;
    if (s.has("photons")) {
        if (s.has("photons_min") || s.has("photons_max") || s.has("points"))
            s.fail("photons", "give either a photons list or photons_min/photons_max/points");
        a.photons = s.numbers("photons");
        for (std::size_t i = 0; i < a.photons.size(); ++i) {
            if (!(a.photons[i] > 0.0)) s.fail("photons", "entries must be positive");
            if (i && !(a.photons[i] > a.photons[i - 1])) s.fail("photons", "must be strictly ascending");
        }
    } else {
        const double lo = positive(s, "photons_min");
        const double hi = positive(s, "photons_max");
        if (!(hi > lo)) s.fail("photons_max", "must exceed photons_min");
        const int points = to_int(s, "points", 15, 2, 100000);
        a.photons = log_space(lo, hi, points);
    }
    a.fit_min = positive(s, "fit_min_photons", a.photons.front());
    a.fit_max = positive(s, "fit_max_photons", a.photons.back());
    if (!(a.fit_max > a.fit_min)) s.fail("fit_max_photons", "must exceed fit_min_photons");
    s.finish();
    return a;
}

std::vector<double> parse_centers(Section s, const ResonatorModel& model) {
    std::vector<double> c;
    if (s.has("centers_hz")) {
        if (s.has("span_hz") || s.has("points")) s.fail("centers_hz", "give either centers_hz or span_hz/points");
        c = s.numbers("centers_hz");
        for (std::size_t i = 1; i < c.size(); ++i) {
            if (!(c[i] > c[i - 1])) s.fail("centers_hz", "must be strictly ascending");
        }
    } else {
        const double span = positive(s, "span_hz");
        const int points = to_int(s, "points", 41, 2, 100000);
        for (int i = 0; i < points; ++i) c.push_back(model.f0_hz - 0.5 * span + span * i / (points - 1));
    }
    s.finish();
    return c;
}

struct ReconstructionSpec {
    recon::ReconstructionOptions opts;
    double kappa_ext_guess_hz = 0.0;
};

ReconstructionSpec parse_reconstruction(Section s) {
    ReconstructionSpec r;
    auto& o = r.opts;
    r.kappa_ext_guess_hz = positive(s, "kappa_ext_guess_hz");
    o.kappa0_fixed_hz = s.number("kappa0_hz");
    if (!(o.kappa0_fixed_hz >= 0.0)) s.fail("kappa0_hz", "must be non-negative");
    o.order = to_int(s, "order", o.order, 1, 99);
    o.odd_only = s.boolean("odd_only", o.odd_only);
    o.cutoff = positive(s, "cutoff", o.cutoff);
    o.oversample = to_int(s, "oversample", o.oversample, 2, 1024);
    o.beta_fixed = s.number("beta", o.beta_fixed);
    if (!(o.beta_fixed > 0.0 && o.beta_fixed <= 1.0)) s.fail("beta", "must lie in (0, 1]");
    o.fit_beta = s.boolean("fit_beta", o.fit_beta);
    o.two_pass = s.boolean("two_pass", o.two_pass);
    o.selection.max_tones = static_cast<std::size_t>(to_int(s, "max_tones", 16, 2, 100001));
    o.selection.min_relative_amplitude = s.number("min_relative_amplitude", o.selection.min_relative_amplitude);
    o.curve_points = to_int(s, "curve_points", o.curve_points, 2, 100000);
    s.finish();
    return r;
}

fs::path parse_input(Section s, const std::string& key) {
    const fs::path p = s.string(key);
    s.finish();
    return p;
}

// ---------------------------------------------------------------------------
// JSON views of results

json complex_parts(std::span<const Complex> xs) {
    json re = json::array();
    json im = json::array();
    for (const auto& z : xs) {
        re.push_back(z.real());
        im.push_back(z.imag());
    }
    return json{{"re", re}, {"im", im}};
}

json fit_json(int order, const analysis::PowerLawFit& f) {
    return json{{"order", order},       {"k", f.k},         {"l", f.l},
                {"stderr_k", f.stderr_k}, {"stderr_l", f.stderr_l}, {"n_min", f.n_min},
                {"n_max", f.n_max},     {"points_used", f.points_used}};
}

json model_json(const ResonatorModel& m) {
    return json{{"f0_hz", m.f0_hz},       {"kappa0_hz", m.kappa0_hz}, {"kappa_ext_hz", m.kappa_ext_hz},
                {"kappa_tls_hz", m.kappa_tls_hz}, {"a_c", m.a_c},   {"beta", m.beta}};
}

json stats_json(const IntegratorStats& s) {
    return json{{"accepted_steps", s.accepted_steps},
                {"rejected_steps", s.rejected_steps},
                {"simulated_s", s.simulated_s},
                {"windows", s.windows},
                {"steady_state_change", s.steady_state_change}};
}

json sweep_json(const SweepResult& r, const std::vector<std::pair<int, analysis::PowerLawFit>>& fits) {
    json j;
    j["schema"] = io::kSchemaVersion;
    j["kind"] = "sweep";
    j["axis_kind"] = r.axis_kind == SweepAxis::photons ? "photons" : "f_center_hz";
    j["db_reference"] = "10*log10(|a_out|^2 / (1 photon/s))";
    j["axis"] = r.axis;
    j["orders"] = r.orders;
    json imp_db = json::array();
    for (const auto& row : r.imp_powers) {
        json dbs = json::array();
        for (double p : row) dbs.push_back(io::power_db(p));
        imp_db.push_back(dbs);
    }
    j["imp_power"] = r.imp_powers;
    j["imp_db"] = imp_db;
    j["drive_power"] = r.drive_powers;
    j["drive_transmission"] = r.drive_transmission;
    json f = json::array();
    for (const auto& [order, fit] : fits) f.push_back(fit_json(order, fit));
    j["fits"] = f;
    json spectra = json::array();
    for (std::size_t i = 0; i < r.responses.size(); ++i) {
        const auto& out = r.responses[i].output;
        json db = json::array();
        for (const auto& a : out.amplitudes()) db.push_back(io::power_db(std::norm(a)));
        spectra.push_back(json{{"axis", r.axis[i]},
                               {"frame_hz", out.frame().ref_hz},
                               {"frequencies_hz", std::vector<double>(out.frequencies().begin(), out.frequencies().end())},
                               {"output_db", db},
                               {"stats", stats_json(r.responses[i].stats)}});
    }
    j["spectra"] = spectra;
    return j;
}

json reconstruction_json(const recon::ReconstructionResult& r) {
    json j;
    j["schema"] = io::kSchemaVersion;
    j["kind"] = "reconstruction";
    j["kappa_ext_hz"] = r.kappa_ext_hz;
    j["kappa_ext_first_pass_hz"] = r.kappa_ext_first_pass_hz;
    j["f0_hz"] = r.f0_hz;
    j["c"] = r.c;
    j["kappa_tls_hz"] = r.kappa_tls_hz;
    j["a_c"] = r.a_c;
    j["beta"] = r.beta;
    j["beta_fitted"] = r.beta_fitted;
    j["residual_norm"] = r.residual_norm;
    j["condition_number"] = r.condition_number;
    j["singular_values"] = r.singular_values;
    j["max_amplitude"] = r.max_amplitude;
    j["tones_used"] = r.tones_used;
    j["tls_fit_rms_hz"] = r.tls_fit_rms_hz;
    j["warning"] = r.warning;
    j["curve"] = json{{"amplitude", r.curve_amplitude},
                      {"reconstructed_hz", r.curve_reconstructed_hz},
                      {"model_hz", r.curve_model_hz}};
    return j;
}

json notch_json(const analysis::NotchParameters& p) {
    return json{{"a", p.a},     {"alpha", p.alpha},     {"tau_s", p.tau_s}, {"f_r_hz", p.f_r_hz},
                {"q_l", p.q_l}, {"q_c_mag", p.q_c_mag}, {"phi", p.phi}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Experiments

struct Outputs {
    fs::path dir;
    std::vector<std::string> files;
    std::vector<std::string> summary;

    fs::path add(const std::string& name) {
        files.push_back(name);
        return dir / name;
    }
    void note(const std::string& line) { summary.push_back(line); }
};

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

struct Plan {
    std::string kind;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    ResonatorModel model;
    DriveSpec drive;
    int n_tones = 31;
    SimulationSpec sim;
    PhotonAxis photon_axis;
    std::vector<double> centers;
    std::vector<double> betas;
    ReconstructionSpec recon;
    fs::path input;
    analysis::CircleFitOptions circle;
    analysis::NotchParameters notch;
    double gen_f_start = 0.0;
    double gen_f_stop = 0.0;
    int gen_points = 0;
    double gen_noise = 0.0;
    double tls_f_r = 0.0;
    double tls_temperature = 0.010;
    bool tls_fit_beta = true;
    analysis::Weighting tls_weighting = analysis::Weighting::local_scatter;
    double pl_min = 0.0;
    double pl_max = 0.0;
};

SimulationConfig seeded(const Plan& p, double drive_amplitude) {
    SimulationConfig cfg = p.sim.cfg;
    cfg.rng_seed = p.seed;
    if (p.sim.noise_dbc) cfg.noise_amplitude = drive_amplitude * std::pow(10.0, *p.sim.noise_dbc / 20.0);
    return cfg;
}

TwoToneResponse run_simulation(const Plan& p) {
    const auto comb = DetectionComb::for_drive(p.drive.drive, p.n_tones);
    return simulate_two_tone(p.model, p.drive.drive, comb, seeded(p, p.drive.drive.amplitude));
}

void write_simulation(Outputs& out, const std::string& kind, const TwoToneResponse& r) {
    io::write_spectrum_csv(out.add("spectrum.csv"), r.output, r.drive);
    json j;
    j["schema"] = io::kSchemaVersion;
    j["kind"] = kind;
    j["frame_hz"] = r.output.frame().ref_hz;
    j["frequencies_hz"] = std::vector<double>(r.output.frequencies().begin(), r.output.frequencies().end());
    j["output"] = complex_parts(r.output.amplitudes());
    j["drive"] = complex_parts(r.drive.amplitudes());
    j["intracavity"] = complex_parts(r.intracavity.amplitudes());
    json db = json::array();
    for (const auto& a : r.output.amplitudes()) db.push_back(io::power_db(std::norm(a)));
    j["output_db"] = db;
    j["stats"] = stats_json(r.stats);
    io::write_text(out.add("simulation.json"), dump(j));
}

void exec_simulate(const Plan& p, Outputs& out) {
    const auto r = run_simulation(p);
    write_simulation(out, "simulation", r);
    const int h = (p.n_tones - 1) / 2;
    for (int m : {3, 5}) {
        if (m <= h)
            out.note("IMP order " + std::to_string(m) + ": " +
                     fmt(io::power_db(std::norm(r.output.amplitude(static_cast<std::size_t>(m + h))))) + " dB");
    }
}

std::vector<std::pair<int, analysis::PowerLawFit>> fit_orders(const SweepResult& r, double lo, double hi) {
    std::vector<std::pair<int, analysis::PowerLawFit>> fits;
    for (std::size_t j = 0; j < r.orders.size(); ++j) {
        std::vector<analysis::PowerLawPoint> pts;
        for (std::size_t i = 0; i < r.axis.size(); ++i) pts.push_back({r.axis[i], r.imp_powers[i][j]});
        fits.emplace_back(r.orders[j], analysis::fit_power_law(pts, lo, hi));
    }
    return fits;
}

void exec_sweep_power(const Plan& p, Outputs& out) {
    const auto comb = DetectionComb::for_drive(p.drive.drive, p.n_tones);
    SimulationConfig cfg = p.sim.cfg;
    cfg.rng_seed = p.seed;
    const auto r = sweep_power(p.model, p.drive.drive, comb, cfg, p.photon_axis.photons, {p.threads});
    const auto fits = fit_orders(r, p.photon_axis.fit_min, p.photon_axis.fit_max);
    io::write_sweep_csv(out.add("sweep.csv"), r, fits);
    io::write_text(out.add("sweep.json"), dump(sweep_json(r, fits)));
    for (const auto& [order, f] : fits)
        out.note("order " + std::to_string(order) + " slope k = " + fmt(f.k) + " +/- " + fmt(f.stderr_k));
}

void exec_sweep_frequency(const Plan& p, Outputs& out) {
    const auto comb = DetectionComb::for_drive(p.drive.drive, p.n_tones);
    const auto r = sweep_frequency(p.model, p.drive.drive, comb, seeded(p, p.drive.drive.amplitude), p.centers,
                                   {p.threads});
    io::write_sweep_csv(out.add("sweep.csv"), r);
    io::write_text(out.add("sweep.json"), dump(sweep_json(r, {})));
    std::size_t peak = 0;
    for (std::size_t i = 1; i < r.axis.size(); ++i) {
        if (r.imp_powers[i][0] > r.imp_powers[peak][0]) peak = i;
    }
    out.note("3rd-order IMP peaks at f_c - f0 = " + fmt(r.axis[peak] - p.model.f0_hz) + " Hz");
}

void exec_beta_scan(const Plan& p, Outputs& out) {
    const auto comb = DetectionComb::for_drive(p.drive.drive, p.n_tones);
    SimulationConfig cfg = p.sim.cfg;
    cfg.rng_seed = p.seed;
    const auto rows = beta_slope_scan(p.model, p.betas, p.drive.drive, comb, cfg, p.photon_axis.photons,
                                      p.photon_axis.fit_min, p.photon_axis.fit_max, {p.threads});
    io::CsvTable t;
    t.meta.emplace_back("order", "3");
    t.meta.emplace_back("fit_min_photons", io::format_number(p.photon_axis.fit_min));
    t.meta.emplace_back("fit_max_photons", io::format_number(p.photon_axis.fit_max));
    t.columns = {"beta", "k", "stderr_k"};
    json j;
    j["schema"] = io::kSchemaVersion;
    j["kind"] = "beta-scan";
    j["order"] = 3;
    j["fit_min_photons"] = p.photon_axis.fit_min;
    j["fit_max_photons"] = p.photon_axis.fit_max;
    json arr = json::array();
    for (const auto& row : rows) {
        t.rows.push_back({row.beta, row.k, row.stderr_k});
        arr.push_back(json{{"beta", row.beta}, {"k", row.k}, {"stderr_k", row.stderr_k}});
        out.note("beta " + fmt(row.beta) + ": k = " + fmt(row.k));
    }
    j["slopes"] = arr;
    io::write_csv(out.add("beta_scan.csv"), "beta-scan", t);
    io::write_text(out.add("beta_scan.json"), dump(j));
}

void note_reconstruction(Outputs& out, const recon::ReconstructionResult& r) {
    out.note("kappa_ext = " + fmt(r.kappa_ext_hz) + " Hz, f0 = " + fmt(r.f0_hz) + " Hz");
    out.note("kappa_TLS = " + fmt(r.kappa_tls_hz) + " Hz, a_c = " + fmt(r.a_c) + ", beta = " + fmt(r.beta));
    if (!r.warning.empty()) out.note("warning: " + r.warning);
}

void exec_reconstruct(const Plan& p, Outputs& out) {
    const auto spec = io::read_spectrum_csv(p.input);
    const auto r = recon::reconstruct(spec.output, spec.drive, p.recon.kappa_ext_guess_hz, p.recon.opts);
    io::write_text(out.add("reconstruction.json"), dump(reconstruction_json(r)));
    note_reconstruction(out, r);
}

void exec_roundtrip(const Plan& p, Outputs& out) {
    const auto sim = run_simulation(p);
    write_simulation(out, "simulation", sim);
    const auto r = recon::reconstruct(sim.output, sim.drive, p.recon.kappa_ext_guess_hz, p.recon.opts);

    json j = reconstruction_json(r);
    j["kind"] = "roundtrip";
    j["truth"] = model_json(p.model);
    std::vector<double> truth_curve;
    double curve_err = 0.0;
    for (std::size_t i = 0; i < r.curve_amplitude.size(); ++i) {
        const double t = tls_damping_rate(p.model, r.curve_amplitude[i]);
        truth_curve.push_back(t);
        if (t > 0.0) curve_err = std::max(curve_err, std::abs(r.curve_reconstructed_hz[i] - t) / t);
    }
    j["curve"]["truth_hz"] = truth_curve;
    j["curve_max_relative_error"] = curve_err;
    io::write_text(out.add("reconstruction.json"), dump(j));

    std::string table = "# schema: " + std::to_string(io::kSchemaVersion) +
                        "\n# kind: comparison\nparameter,truth,recovered,abs_error,rel_error\n";
    auto row = [&](const std::string& name, double truth, double got) {
        const double d = std::abs(got - truth);
        table += name + "," + io::format_number(truth) + "," + io::format_number(got) + "," + io::format_number(d) +
                 "," + io::format_number(truth != 0.0 ? d / std::abs(truth) : d) + "\n";
    };
    row("kappa_ext_hz", p.model.kappa_ext_hz, r.kappa_ext_hz);
    row("f0_hz", p.model.f0_hz, r.f0_hz);
    row("kappa_tls_hz", p.model.kappa_tls_hz, r.kappa_tls_hz);
    row("a_c", p.model.a_c, r.a_c);
    row("beta", p.model.beta, r.beta);
    table += "# curve_max_rel_error: " + io::format_number(curve_err) + "\n";
    io::write_text(out.add("comparison.csv"), table);

    note_reconstruction(out, r);
    out.note("kappa_ext error " + fmt(100.0 * std::abs(r.kappa_ext_hz - p.model.kappa_ext_hz) / p.model.kappa_ext_hz) +
             " %, f0 error " + fmt(std::abs(r.f0_hz - p.model.f0_hz)) + " Hz, curve error " +
             fmt(100.0 * curve_err) + " %");
}

void exec_circle_fit(const Plan& p, Outputs& out) {
    const auto trace = io::read_s21_csv(p.input);
    const auto r = analysis::circle_fit(trace, p.circle);
    json j;
    j["schema"] = io::kSchemaVersion;
    j["kind"] = "circle-fit";
    j["params"] = notch_json(r.params);
    j["q_i"] = r.q_i;
    j["rms_residual"] = r.rms_residual;
    j["circle_radius"] = r.circle_radius;
    j["circle_scatter"] = r.circle_scatter;
    j["ill_conditioned"] = r.ill_conditioned;
    if (std::isfinite(trace.power_dbm)) j["power_dbm"] = trace.power_dbm;
    if (std::isfinite(trace.temperature_k)) j["temperature_k"] = trace.temperature_k;
    io::write_text(out.add("circle_fit.json"), dump(j));
    out.note("f_r = " + fmt(r.params.f_r_hz) + " Hz, Q_l = " + fmt(r.params.q_l) + ", |Q_c| = " +
             fmt(r.params.q_c_mag) + ", Q_i = " + fmt(r.q_i));
    if (r.ill_conditioned) out.note("warning: circle radius is small compared with its scatter");
}

void exec_generate_s21(const Plan& p, Outputs& out) {
    const auto trace = analysis::generate_s21(p.notch, p.gen_f_start, p.gen_f_stop, p.gen_points, p.gen_noise, p.seed);
    std::vector<std::pair<std::string, std::string>> meta{
        {"a", io::format_number(p.notch.a)},         {"alpha", io::format_number(p.notch.alpha)},
        {"tau_s", io::format_number(p.notch.tau_s)}, {"f_r_hz", io::format_number(p.notch.f_r_hz)},
        {"q_l", io::format_number(p.notch.q_l)},     {"q_c_mag", io::format_number(p.notch.q_c_mag)},
        {"phi", io::format_number(p.notch.phi)},     {"noise_std", io::format_number(p.gen_noise)},
        {"seed", std::to_string(p.seed)}};
    io::write_s21_csv(out.add("s21.csv"), trace, meta);
    out.note(std::to_string(p.gen_points) + " points written");
}

json tunneling_json(const analysis::TunnelingFitResult& f) {
    json cov = json::array();
    for (int a = 0; a < 4; ++a) {
        json row = json::array();
        for (int b = 0; b < 4; ++b) row.push_back(f.covariance(a, b));
        cov.push_back(row);
    }
    return json{{"f_delta0_tls", f.f_delta0_tls}, {"n_c", f.n_c},     {"beta", f.beta},
                {"delta0", f.delta0},             {"beta_free", f.beta_free},
                {"chi2", f.chi2},                 {"rms_relative", f.rms_relative},
                {"thermal_factor", f.thermal_factor}, {"iterations", f.iterations},
                {"covariance", cov}};
}

void exec_fit_tls(const Plan& p, Outputs& out) {
    const auto pts = io::read_qi_csv(p.input);
    const auto f = analysis::fit_tunneling_model(pts, p.tls_f_r, p.tls_temperature, p.tls_fit_beta, p.tls_weighting);
    json j;
    j["schema"] = io::kSchemaVersion;
    j["kind"] = "tunneling-fit";
    j["fit"] = tunneling_json(f);
    out.note("F*delta0_TLS = " + fmt(f.f_delta0_tls) + ", n_c = " + fmt(f.n_c) + ", beta = " + fmt(f.beta) +
             ", delta0 = " + fmt(f.delta0));
    if (p.tls_fit_beta) {
        const auto fixed = analysis::fit_tunneling_model(pts, p.tls_f_r, p.tls_temperature, false, p.tls_weighting);
        j["beta_fixed_fit"] = tunneling_json(fixed);
        out.note("chi2 beta free " + fmt(f.chi2) + " vs beta = 0.5 " + fmt(fixed.chi2));
    }
    io::write_text(out.add("tunneling_fit.json"), dump(j));
}

void exec_fit_powerlaw(const Plan& p, Outputs& out) {
    const auto pts = io::read_powerlaw_csv(p.input);
    const auto f = analysis::fit_power_law(pts, p.pl_min, p.pl_max);
    json j = fit_json(0, f);
    j.erase("order");
    j["schema"] = io::kSchemaVersion;
    j["kind"] = "power-law-fit";
    io::write_text(out.add("powerlaw_fit.json"), dump(j));
    out.note("k = " + fmt(f.k) + " +/- " + fmt(f.stderr_k) + ", l = " + fmt(f.l));
}

// ---------------------------------------------------------------------------

json parse_config_text(const std::string& text) {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ValidationError("config: file is empty");
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: not valid JSON: ") + e.what());
    }
}

/// Rewrites relative input paths against base_dir so the embedded config is
/// location independent.
void resolve_inputs(json& cfg, const fs::path& base_dir) {
    if (!cfg.contains("input") || !cfg["input"].is_object()) return;
    for (auto& item : cfg["input"].items()) {
        if (!item.value().is_string()) continue;
        fs::path p = item.value().get<std::string>();
        if (p.is_relative()) p = fs::absolute(base_dir / p).lexically_normal();
        item.value() = p.string();
    }
}

Plan build_plan(const json& cfg, const RunOverrides& ov) {
    if (cfg.is_object() && cfg.empty()) throw ValidationError("config: no fields; 'kind' is required");
    Section top(cfg, "config");
    Plan p;
    p.kind = top.string("kind");
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), p.kind) == kinds.end()) {
        std::string list;
        for (const auto& k : kinds) list += (list.empty() ? "" : ", ") + k;
        top.fail("kind", "unknown experiment '" + p.kind + "' (expected one of " + list + ")");
    }
    if (ov.expected_kind && *ov.expected_kind != p.kind)
        top.fail("kind", "is '" + p.kind + "' but the '" + *ov.expected_kind + "' command was used");
    const auto seed = top.integer("seed", 0);
    if (seed < 0) top.fail("seed", "must be non-negative");
    p.seed = static_cast<std::uint64_t>(seed);
    const auto threads = top.integer("threads", 0);
    if (threads < 0 || threads > 4096) top.fail("threads", "must lie in [0, 4096]");
    p.threads = static_cast<unsigned>(threads);
    if (top.has("output_dir")) (void)top.string("output_dir");

    const std::string& k = p.kind;
    const bool simulates = k == "simulate" || k == "sweep-power" || k == "sweep-frequency" || k == "beta-scan" ||
                           k == "roundtrip";
    if (simulates) {
        p.model = parse_model(top.child("model"), k != "beta-scan");
        const DriveLevel level = (k == "sweep-power" || k == "beta-scan") ? DriveLevel::forbidden
                                 : k == "roundtrip"                       ? DriveLevel::optional
                                                                          : DriveLevel::required;
        p.drive = parse_drive(top.has("drive") ? top.child("drive") : Section(json::object(), "config.drive"),
                              p.model, level, k != "sweep-frequency");
        if (k == "roundtrip" && !p.drive.photons && !p.drive.amplitude_given) {
            p.drive.photons = p.model.a_c * p.model.a_c;
            p.drive.drive.amplitude = drive_for_photon_number(p.model, *p.drive.photons);
        }
        p.n_tones = top.has("detection") ? parse_detection(top.child("detection")) : 31;
        const bool allow_dbc = k == "simulate" || k == "roundtrip" || k == "sweep-frequency";
        p.sim = top.has("simulation") ? parse_simulation(top.child("simulation"), allow_dbc)
                                      : parse_simulation(Section(json::object(), "config.simulation"), allow_dbc);
    }
    if (k == "sweep-power" || k == "beta-scan") p.photon_axis = parse_photon_axis(top.child("sweep"));
    if (k == "sweep-frequency") p.centers = parse_centers(top.child("frequency"), p.model);
    if (k == "beta-scan") {
        Section s = top.child("beta_scan");
        p.betas = s.numbers("betas");
        for (double b : p.betas) {
            if (!(b >= 0.0 && b <= 1.0)) s.fail("betas", "entries must lie in [0, 1]");
        }
        s.finish();
    }
    if (k == "reconstruct" || k == "roundtrip") p.recon = parse_reconstruction(top.child("reconstruction"));
    if (k == "reconstruct") p.input = parse_input(top.child("input"), "spectrum");
    if (k == "circle-fit") {
        p.input = parse_input(top.child("input"), "s21");
        if (top.has("circle_fit")) {
            Section s = top.child("circle_fit");
            p.circle.delay_window = s.number("delay_window", p.circle.delay_window);
            if (!(p.circle.delay_window > 0.0 && p.circle.delay_window < 0.5))
                s.fail("delay_window", "must lie in (0, 0.5)");
            s.finish();
        }
    }
    if (k == "generate-s21") {
        Section s = top.child("generate_s21");
        p.notch.a = positive(s, "a", 1.0);
        p.notch.alpha = s.number("alpha", 0.0);
        p.notch.tau_s = s.number("tau_s", 0.0);
        p.notch.f_r_hz = positive(s, "f_r_hz");
        p.notch.q_l = positive(s, "q_l");
        p.notch.q_c_mag = positive(s, "q_c_mag");
        p.notch.phi = s.number("phi", 0.0);
        p.gen_f_start = positive(s, "f_start_hz");
        p.gen_f_stop = positive(s, "f_stop_hz");
        if (!(p.gen_f_stop > p.gen_f_start)) s.fail("f_stop_hz", "must exceed f_start_hz");
        p.gen_points = to_int(s, "points", 1001, 20, 10000000);
        p.gen_noise = s.number("noise_std", 0.0);
        if (!(p.gen_noise >= 0.0)) s.fail("noise_std", "must be non-negative");
        s.finish();
    }
    if (k == "fit-tls") {
        p.input = parse_input(top.child("input"), "qi");
        Section s = top.child("fit_tls");
        p.tls_f_r = positive(s, "f_r_hz");
        p.tls_temperature = positive(s, "temperature_k", p.tls_temperature);
        p.tls_fit_beta = s.boolean("fit_beta", true);
        const auto w = s.string("weighting", "local_scatter");
        if (w == "local_scatter") {
            p.tls_weighting = analysis::Weighting::local_scatter;
        } else if (w == "unweighted") {
            p.tls_weighting = analysis::Weighting::unweighted;
        } else {
            s.fail("weighting", "must be 'local_scatter' or 'unweighted'");
        }
        s.finish();
    }
    if (k == "fit-powerlaw") {
        p.input = parse_input(top.child("input"), "powerlaw");
        Section s = top.child("fit_powerlaw");
        p.pl_min = positive(s, "n_min");
        p.pl_max = positive(s, "n_max");
        if (!(p.pl_max > p.pl_min)) s.fail("n_max", "must exceed n_min");
        s.finish();
    }
    top.finish();
    return p;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

}  // namespace

const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds{"simulate",     "sweep-power", "sweep-frequency", "beta-scan",
                                                "reconstruct",  "circle-fit",  "fit-tls",         "fit-powerlaw",
                                                "roundtrip",    "generate-s21"};
    return kinds;
}

std::uint64_t fnv1a64(const std::string& data) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const ValidationError*>(&e)) return 2;
    if (dynamic_cast<const NumericalError*>(&e)) return 3;
    if (dynamic_cast<const IoError*>(&e)) return 4;
    return 1;
}

RunReport run_text(const std::string& config_text, const fs::path& base_dir, const fs::path& out_dir,
                   const RunOverrides& overrides) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string started = utc_now();

    json cfg = parse_config_text(config_text);
    if (!cfg.is_object()) throw ValidationError("config: top level must be an object");
    if (overrides.seed) cfg["seed"] = *overrides.seed;
    if (overrides.threads) cfg["threads"] = *overrides.threads;
    resolve_inputs(cfg, base_dir);
    const Plan plan = build_plan(cfg, overrides);

    fs::path dir = out_dir;
    if (dir.empty()) {
        if (!cfg.contains("output_dir")) throw ValidationError("config.output_dir: required when --out is not given");
        dir = cfg["output_dir"].get<std::string>();
        if (dir.is_relative()) dir = base_dir / dir;
    }
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());

    Outputs out{dir, {}, {}};
    const std::string& k = plan.kind;
    try {
        if (k == "simulate") exec_simulate(plan, out);
        else if (k == "sweep-power") exec_sweep_power(plan, out);
        else if (k == "sweep-frequency") exec_sweep_frequency(plan, out);
        else if (k == "beta-scan") exec_beta_scan(plan, out);
        else if (k == "reconstruct") exec_reconstruct(plan, out);
        else if (k == "roundtrip") exec_roundtrip(plan, out);
        else if (k == "circle-fit") exec_circle_fit(plan, out);
        else if (k == "generate-s21") exec_generate_s21(plan, out);
        else if (k == "fit-tls") exec_fit_tls(plan, out);
        else if (k == "fit-powerlaw") exec_fit_powerlaw(plan, out);
    } catch (const NumericalError& e) {
        throw NumericalError(k + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(k + ": " + e.what());
    }

    const std::string canonical = cfg.dump();
    RunReport report;
    report.kind = k;
    report.out_dir = dir;
    report.config_hash = hex64(fnv1a64(canonical));
    report.seed = plan.seed;
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.summary = out.summary;
    report.outputs = out.files;
    report.outputs.emplace_back("run-manifest.json");

    json manifest;
    manifest["schema"] = io::kSchemaVersion;
    manifest["kind"] = k;
    manifest["config"] = cfg;
    manifest["config_hash"] = report.config_hash;
    manifest["seed"] = plan.seed;
    manifest["versions"] = json{{"tlsimp", TLSIMP_VERSION},
                                {"compiler", __VERSION__},
                                {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                              std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                              std::to_string(EIGEN_MINOR_VERSION)},
                                {"boost", BOOST_LIB_VERSION},
                                {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                      std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                      std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    manifest["started_utc"] = started;
    manifest["wall_time_s"] = report.wall_time_s;
    manifest["outputs"] = out.files;
    io::write_text(dir / "run-manifest.json", dump(manifest));
    return report;
}

RunReport run_file(const fs::path& config, const fs::path& out_dir, const RunOverrides& overrides) {
    const std::string text = io::read_text(config);
    return run_text(text, fs::absolute(config).parent_path(), out_dir, overrides);
}

}  // namespace tlsimp

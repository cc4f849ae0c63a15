#include "tlsimp/sweeps.hpp"

#include <cmath>
#include <sstream>

#include "parallel.hpp"
#include "tlsimp/analysis/power_law.hpp"
#include "tlsimp/errors.hpp"

namespace tlsimp {

namespace {

void require_ascending(const std::vector<double>& xs, const char* what) {
    if (xs.empty()) throw ValidationError(std::string(what) + ": axis is empty");
    for (std::size_t i = 1; i < xs.size(); ++i) {
        if (!(xs[i] > xs[i - 1])) throw ValidationError(std::string(what) + ": axis must be strictly ascending");
    }
}

/// Rethrows a per-point failure with the axis point attached.
template <typename Fn>
void run_point(const char* what, std::size_t i, double axis_value, Fn&& fn) {
    try {
        fn();
    } catch (const ValidationError& e) {
        std::ostringstream os;
        os << what << ": point " << i << " (axis " << axis_value << "): " << e.what();
        throw ValidationError(os.str());
    } catch (const NumericalError& e) {
        std::ostringstream os;
        os << what << ": point " << i << " (axis " << axis_value << "): " << e.what();
        throw NumericalError(os.str());
    }
}

void tabulate(SweepResult& result, int half_width) {
    const std::size_t n = result.responses.size();
    result.imp_powers.assign(n, std::vector<double>(result.orders.size(), 0.0));
    result.drive_powers.assign(n, 0.0);
    result.drive_transmission.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& out = result.responses[i].output;
        const auto& in = result.responses[i].drive;
        for (std::size_t j = 0; j < result.orders.size(); ++j) {
            const int m = result.orders[j];
            if (m > half_width) continue;
            result.imp_powers[i][j] = std::norm(out.amplitude(static_cast<std::size_t>(m + half_width)));
        }
        const auto pos1 = static_cast<std::size_t>(half_width - 1);
        result.drive_powers[i] = std::norm(out.amplitude(pos1));
        const double p_in = std::norm(in.amplitude(pos1));
        result.drive_transmission[i] = p_in > 0.0 ? result.drive_powers[i] / p_in : 0.0;
    }
}

}  // namespace

std::vector<double> log_space(double lo, double hi, int points) {
    if (!(lo > 0.0) || !(hi >= lo) || points < 1) throw ValidationError("log_space: invalid range");
    std::vector<double> out(static_cast<std::size_t>(points));
    if (points == 1) {
        out[0] = lo;
        return out;
    }
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (int i = 0; i < points; ++i) out[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (points - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

SweepResult sweep_power(const ResonatorModel& model, const DriveComb& drive_template,
                        const DetectionComb& comb_template, const SimulationConfig& cfg,
                        const std::vector<double>& photon_targets, const SweepOptions& opts) {
    model.validate();
    require_ascending(photon_targets, "sweep_power");
    for (double n : photon_targets) {
        if (!(n > 0.0)) throw ValidationError("sweep_power: photon targets must be positive");
    }

    SweepResult result;
    result.axis_kind = SweepAxis::photons;
    result.axis = photon_targets;
    result.responses.resize(photon_targets.size());
    const DetectionComb comb = DetectionComb::for_drive(drive_template, comb_template.n_tones);

    detail::parallel_for(photon_targets.size(), opts.threads, [&](std::size_t i) {
        run_point("sweep_power", i, photon_targets[i], [&] {
            DriveComb drive = drive_template;
            drive.amplitude = drive_for_photon_number(model, photon_targets[i]);
            result.responses[i] = simulate_two_tone(model, drive, comb, cfg);
        });
    });
    tabulate(result, comb.half_width());
    return result;
}

SweepResult sweep_frequency(const ResonatorModel& model, const DriveComb& drive_template,
                            const DetectionComb& comb_template, const SimulationConfig& cfg,
                            const std::vector<double>& centers_hz, const SweepOptions& opts) {
    model.validate();
    require_ascending(centers_hz, "sweep_frequency");

    SweepResult result;
    result.axis_kind = SweepAxis::center_frequency;
    result.axis = centers_hz;
    result.responses.resize(centers_hz.size());

    detail::parallel_for(centers_hz.size(), opts.threads, [&](std::size_t i) {
        run_point("sweep_frequency", i, centers_hz[i], [&] {
            DriveComb drive = drive_template;
            drive.f_center_hz = centers_hz[i];
            const DetectionComb comb = DetectionComb::for_drive(drive, comb_template.n_tones);
            result.responses[i] = simulate_two_tone(model, drive, comb, cfg);
        });
    });
    tabulate(result, comb_template.half_width());
    return result;
}

std::vector<BetaSlope> beta_slope_scan(const ResonatorModel& model_template, const std::vector<double>& betas,
                                       const DriveComb& drive_template, const DetectionComb& comb_template,
                                       const SimulationConfig& cfg, const std::vector<double>& photon_targets,
                                       double fit_min, double fit_max, const SweepOptions& opts) {
    if (betas.empty()) throw ValidationError("beta_slope_scan: no beta values");
    for (double b : betas) {
        if (!(b >= 0.0 && b <= 1.0)) throw ValidationError("beta_slope_scan: beta must lie in [0, 1]");
    }

    std::vector<BetaSlope> out;
    out.reserve(betas.size());
    for (double beta : betas) {
        ResonatorModel model = model_template;
        model.beta = beta;
        const SweepResult sweep = sweep_power(model, drive_template, comb_template, cfg, photon_targets, opts);
        std::vector<analysis::PowerLawPoint> pts;
        for (std::size_t i = 0; i < sweep.axis.size(); ++i) pts.push_back({sweep.axis[i], sweep.imp_powers[i][0]});
        const auto fit = analysis::fit_power_law(pts, fit_min, fit_max);
        out.push_back({beta, fit.k, fit.stderr_k});
    }
    return out;
}

}  // namespace tlsimp

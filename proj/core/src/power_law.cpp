#include "tlsimp/analysis/power_law.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "tlsimp/errors.hpp"

namespace tlsimp::analysis {

PowerLawFit fit_power_law(std::span<const PowerLawPoint> points, double n_min, double n_max) {
    if (!(n_min > 0.0) || !(n_max >= n_min)) throw ValidationError("fit_power_law: invalid photon-number range");

    std::vector<double> xs;
    std::vector<double> ys;
    for (const auto& p : points) {
        if (p.photons < n_min || p.photons > n_max) continue;
        if (!(p.power > 0.0) || !std::isfinite(p.power))
            throw ValidationError("fit_power_law: powers inside the fit range must be positive");
        xs.push_back(std::log10(p.photons));
        ys.push_back(std::log10(p.power));
    }
    if (xs.empty()) throw ValidationError("fit_power_law: no points inside the fit range");
    if (xs.size() < 4) throw ValidationError("fit_power_law: fewer than four points inside the fit range");

    const auto n = static_cast<double>(xs.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (!(sxx > 0.0)) throw ValidationError("fit_power_law: points do not span a range of photon numbers");

    PowerLawFit fit;
    fit.k = sxy / sxx;
    fit.l = my - fit.k * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - (fit.l + fit.k * xs[i]);
        ssr += r * r;
    }
    const double s2 = xs.size() > 2 ? ssr / (n - 2.0) : 0.0;
    fit.stderr_k = std::sqrt(s2 / sxx);
    fit.stderr_l = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
    fit.n_min = n_min;
    fit.n_max = n_max;
    fit.points_used = xs.size();
    return fit;
}

}  // namespace tlsimp::analysis

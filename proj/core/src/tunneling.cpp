#include "tlsimp/analysis/tunneling.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "least_squares.hpp"
#include "tlsimp/errors.hpp"
#include "tlsimp/physics.hpp"

namespace tlsimp::analysis {

namespace {

double thermal_factor(double f_r_hz, double temperature_k) {
    return std::tanh(constants::kPlanck * f_r_hz / (2.0 * constants::kBoltzmann * temperature_k));
}

/// Relative scatter of each point from second differences of log(1/Q_i)
/// over a neighbourhood of kScatterHalfWidth points on either side.
constexpr std::size_t kScatterHalfWidth = 10;

std::vector<double> local_relative_scatter(const std::vector<double>& log_y) {
    const std::size_t n = log_y.size();
    std::vector<double> d2(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double d = log_y[i - 1] - 2.0 * log_y[i] + log_y[i + 1];
        d2[i] = d * d;
    }
    std::vector<double> s(n, 0.0);
    double pooled = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) pooled += d2[i];
    pooled = n > 2 ? std::sqrt(pooled / (6.0 * static_cast<double>(n - 2))) : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        int count = 0;
        const std::size_t lo = i >= kScatterHalfWidth ? i - kScatterHalfWidth : 0;
        for (std::size_t j = lo; j <= std::min(n - 1, i + kScatterHalfWidth); ++j) {
            if (j == 0 || j + 1 == n) continue;
            acc += d2[j];
            ++count;
        }
        s[i] = count > 0 ? std::sqrt(acc / (6.0 * count)) : pooled;
        // Local windows with a chance-small scatter must not dominate.
        s[i] = std::max(s[i], 0.25 * pooled);
        if (!(s[i] > 0.0)) s[i] = 1.0;
    }
    return s;
}

}  // namespace

double tunneling_loss(const TunnelingParameters& p, double photons, double f_r_hz, double temperature_k) {
    return p.f_delta0_tls * thermal_factor(f_r_hz, temperature_k) / std::pow(1.0 + photons / p.n_c, p.beta) +
           p.delta0;
}

TunnelingFitResult fit_tunneling_model(std::span<const QiPoint> points, double f_r_hz, double temperature_k,
                                       bool fit_beta, Weighting weighting) {
    if (points.size() < 5) throw ValidationError("fit_tunneling_model: need at least five points");
    if (!(f_r_hz > 0.0) || !(temperature_k > 0.0))
        throw ValidationError("fit_tunneling_model: frequency and temperature must be positive");

    std::vector<QiPoint> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](const QiPoint& a, const QiPoint& b) { return a.photons < b.photons; });
    for (const auto& p : pts) {
        if (!(p.photons > 0.0) || !(p.q_i > 0.0) || !std::isfinite(p.q_i))
            throw ValidationError("fit_tunneling_model: photon numbers and Q_i must be positive");
    }
    if (pts.back().photons / pts.front().photons < 100.0)
        throw ValidationError("fit_tunneling_model: points must span at least two decades in photon number");

    const std::size_t n = pts.size();
    std::vector<double> y(n);
    std::vector<double> log_y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = 1.0 / pts[i].q_i;
        log_y[i] = std::log(y[i]);
    }
    std::vector<double> sigma(n, 1.0);
    if (weighting == Weighting::local_scatter) {
        const auto s = local_relative_scatter(log_y);
        for (std::size_t i = 0; i < n; ++i) sigma[i] = y[i] * s[i];
    } else {
        // Keep the residuals O(1) so the optimizer tolerances behave.
        const double scale = *std::max_element(y.begin(), y.end());
        std::fill(sigma.begin(), sigma.end(), scale);
    }

    const double tf = thermal_factor(f_r_hz, temperature_k);
    const double y_min = *std::min_element(y.begin(), y.end());
    const double y_max = *std::max_element(y.begin(), y.end());
    double delta0_start = 0.9 * y_min;
    double fd_start = std::max(y_max - delta0_start, 1e-3 * y_max) / tf;
    double nc_start = pts[n / 2].photons;
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] - delta0_start <= 0.5 * (y_max - delta0_start)) {
            nc_start = pts[i].photons;
            break;
        }
    }

    const detail::ResidualFn residual = [&](const Eigen::VectorXd& q, Eigen::VectorXd& r) {
        const TunnelingParameters p{std::exp(q[0]), std::exp(q[1]), fit_beta ? q[2] : 0.5,
                                    std::exp(q[fit_beta ? 3 : 2])};
        for (std::size_t i = 0; i < n; ++i)
            r[static_cast<Eigen::Index>(i)] = (tunneling_loss(p, pts[i].photons, f_r_hz, temperature_k) - y[i]) / sigma[i];
    };

    Eigen::VectorXd q0(fit_beta ? 4 : 3);
    q0[0] = std::log(fd_start);
    q0[1] = std::log(nc_start);
    if (fit_beta) q0[2] = 0.5;
    q0[fit_beta ? 3 : 2] = std::log(delta0_start);

    const auto res = detail::levenberg_marquardt(residual, q0, static_cast<int>(n));
    if (!res.converged) throw NumericalError("fit_tunneling_model: optimizer did not converge; " + res.describe());

    TunnelingFitResult out;
    out.f_delta0_tls = std::exp(res.x[0]);
    out.n_c = std::exp(res.x[1]);
    out.beta = fit_beta ? res.x[2] : 0.5;
    out.delta0 = std::exp(res.x[fit_beta ? 3 : 2]);
    out.beta_free = fit_beta;
    out.chi2 = res.norm * res.norm;
    out.thermal_factor = tf;
    out.iterations = res.iterations;

    double rel = 0.0;
    const auto p = out.parameters();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (tunneling_loss(p, pts[i].photons, f_r_hz, temperature_k) - y[i]) / y[i];
        rel += d * d;
    }
    out.rms_relative = std::sqrt(rel / static_cast<double>(n));

    // Covariance in the fit parameters, mapped to physical ones.
    const auto dof = static_cast<double>(n) - static_cast<double>(res.x.size());
    const Eigen::MatrixXd jtj = res.jacobian.transpose() * res.jacobian;
    Eigen::MatrixXd cov_q = jtj.completeOrthogonalDecomposition().pseudoInverse();
    if (dof > 0.0 && weighting == Weighting::unweighted) cov_q *= out.chi2 / dof;
    std::vector<int> map = fit_beta ? std::vector<int>{0, 1, 2, 3} : std::vector<int>{0, 1, 3};
    Eigen::VectorXd grad(res.x.size());
    for (Eigen::Index j = 0; j < res.x.size(); ++j) {
        const int phys = map[static_cast<std::size_t>(j)];
        grad[j] = phys == 2 ? 1.0 : std::exp(res.x[j]);
    }
    for (Eigen::Index a = 0; a < res.x.size(); ++a) {
        for (Eigen::Index b = 0; b < res.x.size(); ++b) {
            out.covariance(map[static_cast<std::size_t>(a)], map[static_cast<std::size_t>(b)]) =
                grad[a] * grad[b] * cov_q(a, b);
        }
    }
    return out;
}

}  // namespace tlsimp::analysis

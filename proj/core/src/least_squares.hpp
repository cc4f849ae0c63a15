#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tlsimp::detail {

/// r(x) written into a pre-sized residual vector.
using ResidualFn = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r)>;

struct LeastSquaresOptions {
    double ftol = 1e-14;
    double xtol = 1e-14;
    double gtol = 0.0;
    int max_evaluations = 20000;
    /// Typical magnitude of each parameter, sizing finite-difference steps.
    /// Empty means 1 for every parameter.
    Eigen::VectorXd typical;
};

struct LeastSquaresResult {
    Eigen::VectorXd x;
    Eigen::VectorXd residual;
    /// Jacobian at the solution (central differences).
    Eigen::MatrixXd jacobian;
    double norm = 0.0;
    int iterations = 0;
    int evaluations = 0;
    int status = 0;
    bool converged = false;
    /// Residual norm after each iteration.
    std::vector<double> trace;

    [[nodiscard]] std::string describe() const;
};

/// Levenberg-Marquardt on sum r_i(x)^2 with a central-difference Jacobian.
[[nodiscard]] LeastSquaresResult levenberg_marquardt(const ResidualFn& fn, Eigen::VectorXd x0, int residuals,
                                                     const LeastSquaresOptions& opts = {});

/// Jacobian of fn at x by central differences.
[[nodiscard]] Eigen::MatrixXd numeric_jacobian(const ResidualFn& fn, const Eigen::VectorXd& x, int residuals,
                                               const Eigen::VectorXd& typical);

}  // namespace tlsimp::detail

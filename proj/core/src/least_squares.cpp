#include "least_squares.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <unsupported/Eigen/LevenbergMarquardt>

namespace tlsimp::detail {

namespace {

struct NumericFunctor : Eigen::DenseFunctor<double> {
    NumericFunctor(const ResidualFn& fn, int inputs, int values, Eigen::VectorXd typical)
        : Eigen::DenseFunctor<double>(inputs, values), fn_(fn), typical_(std::move(typical)) {}

    int operator()(const InputType& x, ValueType& fvec) const {
        fvec.resize(values());
        fn_(x, fvec);
        return 0;
    }

    int df(const InputType& x, JacobianType& fjac) const {
        fjac = numeric_jacobian(fn_, x, values(), typical_);
        return 0;
    }

    const ResidualFn& fn_;
    Eigen::VectorXd typical_;
};

}  // namespace

Eigen::MatrixXd numeric_jacobian(const ResidualFn& fn, const Eigen::VectorXd& x, int residuals,
                                 const Eigen::VectorXd& typical) {
    const double step_rel = std::cbrt(std::numeric_limits<double>::epsilon());
    Eigen::MatrixXd jac(residuals, x.size());
    Eigen::VectorXd xp = x;
    Eigen::VectorXd rp(residuals);
    Eigen::VectorXd rm(residuals);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double scale = typical.size() == x.size() ? std::abs(typical[j]) : 1.0;
        const double h = step_rel * std::max(std::abs(x[j]), scale);
        xp[j] = x[j] + h;
        fn(xp, rp);
        xp[j] = x[j] - h;
        fn(xp, rm);
        xp[j] = x[j];
        jac.col(j) = (rp - rm) / (2.0 * h);
    }
    return jac;
}

std::string LeastSquaresResult::describe() const {
    std::ostringstream os;
    os << "status " << status << " after " << iterations << " iterations (" << evaluations
       << " evaluations), residual norm " << norm << "; trace:";
    for (double t : trace) os << ' ' << t;
    return os.str();
}

LeastSquaresResult levenberg_marquardt(const ResidualFn& fn, Eigen::VectorXd x0, int residuals,
                                       const LeastSquaresOptions& opts) {
    NumericFunctor functor(fn, static_cast<int>(x0.size()), residuals, opts.typical);
    Eigen::LevenbergMarquardt<NumericFunctor> lm(functor);
    lm.setFtol(opts.ftol);
    lm.setXtol(opts.xtol);
    lm.setGtol(opts.gtol);
    lm.setMaxfev(opts.max_evaluations);

    LeastSquaresResult result;
    auto status = lm.minimizeInit(x0);
    if (status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters) {
        do {
            status = lm.minimizeOneStep(x0);
            result.trace.push_back(lm.fnorm());
        } while (status == Eigen::LevenbergMarquardtSpace::Running);
    }

    using S = Eigen::LevenbergMarquardtSpace::Status;
    result.status = static_cast<int>(status);
    result.converged = status == S::RelativeReductionTooSmall || status == S::RelativeErrorTooSmall ||
                       status == S::RelativeErrorAndReductionTooSmall || status == S::CosinusTooSmall ||
                       status == S::FtolTooSmall || status == S::XtolTooSmall || status == S::GtolTooSmall;
    result.x = x0;
    result.residual.resize(residuals);
    fn(x0, result.residual);
    result.norm = result.residual.norm();
    result.converged = result.converged && std::isfinite(result.norm) && x0.allFinite();
    result.iterations = static_cast<int>(lm.iterations());
    result.evaluations = static_cast<int>(lm.nfev());
    result.jacobian = numeric_jacobian(fn, x0, residuals, opts.typical);
    return result;
}

}  // namespace tlsimp::detail

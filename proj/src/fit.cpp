#include "fracpeak/fit.hpp"

#include "fracpeak/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace fracpeak {

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ConfigError("fit: need at least two paired points");
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        A(i, 0) = 1.0;
        A(i, 1) = x[static_cast<std::size_t>(i)];
        b(i) = y[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
    LineFit f;
    f.intercept = c(0);
    f.slope = c(1);
    const Eigen::VectorXd r = b - A * c;
    f.residuals.assign(r.data(), r.data() + n);
    f.rms = std::sqrt(r.squaredNorm() / static_cast<double>(n));
    return f;
}

LineFit fit_loglog(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0 && y[i] > 0.0)) throw NumericalError("fit: log-log fit needs positive data");
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(y[i]));
    }
    return fit_line(lx, ly);
}

double parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
    const double d1 = (y1 - y0) / (x1 - x0);
    const double d2 = (y2 - y1) / (x2 - x1);
    const double a = (d2 - d1) / (x2 - x0);
    if (!(a > 0.0)) return x1;
    const double xv = 0.5 * (x0 + x1) - d1 / (2.0 * a);
    return std::clamp(xv, x0, x2);
}

} // namespace fracpeak

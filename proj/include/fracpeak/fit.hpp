#pragma once

#include <span>
#include <vector>

namespace fracpeak {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::vector<double> residuals;
    double rms = 0.0;
};

// ordinary least squares y = intercept + slope * x
LineFit fit_line(std::span<const double> x, std::span<const double> y);
// least squares in log-log coordinates; all inputs must be positive
LineFit fit_loglog(std::span<const double> x, std::span<const double> y);

// vertex of the parabola through three points (abscissa), falling back to
// the middle abscissa when the three are collinear
double parabola_vertex(double x0, double y0, double x1, double y1, double x2, double y2);

} // namespace fracpeak

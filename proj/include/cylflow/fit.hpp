#pragma once

#include <cmath>
#include <vector>

#include "cylflow/errors.hpp"

namespace cylflow {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    CYLFLOW_REQUIRE(x.size() == y.size() && x.size() >= 2, "fit_line: need >= 2 points");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    const double vx = sxx - sx * sx / n;
    const double vy = syy - sy * sy / n;
    const double cxy = sxy - sx * sy / n;
    CYLFLOW_REQUIRE(vx > 0.0, "fit_line: degenerate abscissae");
    LineFit f;
    f.slope = cxy / vx;
    f.intercept = (sy - f.slope * sx) / n;
    f.r2 = vy > 0.0 ? (cxy * cxy) / (vx * vy) : 1.0;
    return f;
}

/// Slope of log|y| against log x, skipping points at or below floor.
inline LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y,
                          double floor = 0.0) {
    std::vector<double> lx, ly;
    for (size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(std::abs(y[i]) > floor)) continue;
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(std::abs(y[i])));
    }
    return fit_line(lx, ly);
}

} // namespace cylflow

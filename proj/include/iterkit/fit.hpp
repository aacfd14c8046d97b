#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace iterkit {

struct SlopeFit {
    double slope = 0;
    double intercept = 0;
    double se = 0;   // standard error of the slope
    double r2 = 0;
    double window_lo = 0, window_hi = 0;
    std::size_t points = 0;
};

// Ordinary least squares y = intercept + slope * x.
inline SlopeFit least_squares(const std::vector<double>& x,
                              const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n)
        throw std::invalid_argument("least_squares: need >= 2 points");
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / double(n), my = sy / double(n);
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0) throw std::invalid_argument("least_squares: degenerate x");
    SlopeFit f;
    f.points = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (f.intercept + f.slope * x[i]);
        rss += e * e;
    }
    f.r2 = syy > 0 ? 1.0 - rss / syy : 1.0;
    f.se = n > 2 ? std::sqrt(rss / double(n - 2) / sxx) : 0.0;
    f.window_lo = x.front();
    f.window_hi = x.back();
    return f;
}

}  // namespace iterkit

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "slcnn/rng.hpp"
#include "slcnn/tensor.hpp"

namespace slcnn {

// Result of a finite-difference gradient check. Failing the tolerance is a
// report outcome, not an exception. Coordinates where the two one-sided
// derivatives disagree (maxpool argmax ties, ReLU kinks) are excluded from
// the max and listed.
struct GradCheckReport {
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    long coords_checked = 0;
    std::vector<long> excluded;
    long worst_index = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;

    bool passed() const { return coords_checked > 0 && max_rel_err < tolerance; }
};

// Central-difference check of `analytic` against the scalar function `f`
// at `x`, run in double. Steps h = 1e-5 * max(1, |x_i|) on `min_coords`
// randomly sampled coordinates (all of them if x is small).
inline GradCheckReport grad_check(const std::function<double(const Tensor<double>&)>& f,
                                  const Tensor<double>& x,
                                  const Tensor<double>& analytic,
                                  double tolerance,
                                  long min_coords,
                                  Rng& rng) {
    GradCheckReport report;
    report.tolerance = tolerance;

    const long n = x.size();
    std::vector<long> coords;
    if (n <= min_coords) {
        coords.resize(static_cast<size_t>(n));
        for (long i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
        // sample without replacement
        std::vector<long> all(static_cast<size_t>(n));
        for (long i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
        rng.shuffle(all);
        coords.assign(all.begin(), all.begin() + min_coords);
    }

    Tensor<double> xp = x;
    for (long idx : coords) {
        const double xi = x.flat(idx);
        const double h = 1e-5 * std::max(1.0, std::fabs(xi));

        xp.flat(idx) = xi + h;
        const double f_plus = f(xp);
        xp.flat(idx) = xi - h;
        const double f_minus = f(xp);
        xp.flat(idx) = xi;
        const double f_mid = f(xp);

        const double d_plus = (f_plus - f_mid) / h;
        const double d_minus = (f_mid - f_minus) / h;
        const double kink_scale = std::max({1.0, std::fabs(d_plus), std::fabs(d_minus)});
        if (std::fabs(d_plus - d_minus) > 0.05 * kink_scale) {
            report.excluded.push_back(idx); // non-differentiable here
            continue;
        }

        const double numeric = (f_plus - f_minus) / (2.0 * h);
        const double a = analytic.flat(idx);
        const double denom = std::max(std::fabs(a) + std::fabs(numeric), 1e-6);
        const double rel = std::fabs(a - numeric) / denom;
        ++report.coords_checked;
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_index = idx;
            report.worst_analytic = a;
            report.worst_numeric = numeric;
        }
    }
    return report;
}

} // namespace slcnn

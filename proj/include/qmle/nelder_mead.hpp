#pragma once

#include <functional>
#include <span>
#include <vector>

namespace qmle {

/// Downhill-simplex parameters. Defaults: reflection 1, expansion 2,
/// contraction 0.5, shrink 0.5; stop when the simplex L-inf diameter
/// around the best vertex drops below diameter_tol.
struct SimplexOptions {
    double reflection = 1.0;
    double expansion = 2.0;
    double contraction = 0.5;
    double shrink = 0.5;
    double diameter_tol = 1e-8;
    int max_iterations = 2000;
};

struct SimplexResult {
    std::vector<double> x;
    double fmax;
    bool converged;
    int iterations;
};

/// Maximizes f starting from an axis-aligned simplex at x0 with the given
/// edge step. -inf objective values are legal and are treated as the worst
/// vertex, which steers the simplex back into the feasible region.
/// Deterministic: ties in vertex ordering are broken by insertion order.
SimplexResult maximize_simplex(const std::function<double(std::span<const double>)>& f,
                               std::span<const double> x0, double step,
                               const SimplexOptions& opts = {});

} // namespace qmle

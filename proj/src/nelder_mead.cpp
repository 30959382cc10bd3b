#include "qmle/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qmle {

namespace {

struct Vertex {
    std::vector<double> x;
    double f;
};

double diameter_around_best(const std::vector<Vertex>& simplex) {
    double d = 0.0;
    const auto& best = simplex.front().x;
    for (std::size_t v = 1; v < simplex.size(); ++v) {
        for (std::size_t i = 0; i < best.size(); ++i) {
            d = std::max(d, std::fabs(simplex[v].x[i] - best[i]));
        }
    }
    return d;
}

} // namespace

SimplexResult maximize_simplex(const std::function<double(std::span<const double>)>& f,
                               std::span<const double> x0, double step,
                               const SimplexOptions& opts) {
    const std::size_t n = x0.size();
    if (n == 0) throw std::invalid_argument("maximize_simplex: empty start point");

    std::vector<Vertex> simplex;
    simplex.reserve(n + 1);
    {
        std::vector<double> x(x0.begin(), x0.end());
        simplex.push_back({x, f(x)});
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> xi(x0.begin(), x0.end());
            xi[i] += step;
            simplex.push_back({xi, f(xi)});
        }
    }

    auto order = [&]() {
        std::stable_sort(simplex.begin(), simplex.end(),
                         [](const Vertex& a, const Vertex& b) { return a.f > b.f; });
    };
    order();

    int iter = 0;
    bool converged = false;
    std::vector<double> centroid(n), candidate(n);

    for (; iter < opts.max_iterations; ++iter) {
        if (diameter_around_best(simplex) < opts.diameter_tol) {
            converged = true;
            break;
        }

        // Centroid of all vertices except the worst.
        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t v = 0; v < n; ++v) {
            for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[v].x[i];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        Vertex& worst = simplex[n];
        const double f_best = simplex[0].f;
        const double f_second_worst = simplex[n - 1].f;

        for (std::size_t i = 0; i < n; ++i) {
            candidate[i] = centroid[i] + opts.reflection * (centroid[i] - worst.x[i]);
        }
        const double f_reflect = f(candidate);

        if (f_reflect > f_best) {
            std::vector<double> expanded(n);
            for (std::size_t i = 0; i < n; ++i) {
                expanded[i] = centroid[i] + opts.expansion * (candidate[i] - centroid[i]);
            }
            const double f_expand = f(expanded);
            if (f_expand > f_reflect) {
                worst.x = std::move(expanded);
                worst.f = f_expand;
            } else {
                worst.x = candidate;
                worst.f = f_reflect;
            }
        } else if (f_reflect > f_second_worst) {
            worst.x = candidate;
            worst.f = f_reflect;
        } else {
            const bool outside = f_reflect > worst.f;
            std::vector<double> contracted(n);
            if (outside) {
                for (std::size_t i = 0; i < n; ++i) {
                    contracted[i] = centroid[i] + opts.contraction * (candidate[i] - centroid[i]);
                }
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    contracted[i] = centroid[i] + opts.contraction * (worst.x[i] - centroid[i]);
                }
            }
            const double f_contract = f(contracted);
            if (f_contract > (outside ? f_reflect : worst.f)) {
                worst.x = std::move(contracted);
                worst.f = f_contract;
            } else {
                // Shrink toward the best vertex; the best value never degrades.
                for (std::size_t v = 1; v <= n; ++v) {
                    for (std::size_t i = 0; i < n; ++i) {
                        simplex[v].x[i] =
                            simplex[0].x[i] + opts.shrink * (simplex[v].x[i] - simplex[0].x[i]);
                    }
                    simplex[v].f = f(simplex[v].x);
                }
            }
        }
        order();
    }

    return SimplexResult{simplex[0].x, simplex[0].f, converged, iter};
}

} // namespace qmle

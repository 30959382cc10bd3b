#include "qmle/prob_models.hpp"

#include "qmle/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qmle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Recursive 2-D Simpson rule on squares with Richardson-style acceptance.
class AdaptiveSquareQuadrature {
public:
    AdaptiveSquareQuadrature(double (*f)(double, double, double), double param,
                             double abs_tol)
        : f_(f), param_(param), abs_tol_(abs_tol) {}

    double integrate_unit_square() {
        const double whole = simpson_cell(0.0, 1.0, 0.0, 1.0);
        return refine(0.0, 1.0, 0.0, 1.0, whole, abs_tol_, 0);
    }

private:
    double eval(double u, double v) const { return f_(u, v, param_); }

    // Tensor Simpson over [ua,ub]x[va,vb] (3x3 stencil).
    double simpson_cell(double ua, double ub, double va, double vb) const {
        const double um = 0.5 * (ua + ub), vm = 0.5 * (va + vb);
        const double wu[3] = {1.0, 4.0, 1.0};
        const double us[3] = {ua, um, ub}, vs[3] = {va, vm, vb};
        double s = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) s += wu[i] * wu[j] * eval(us[i], vs[j]);
        return s * (ub - ua) * (vb - va) / 36.0;
    }

    double refine(double ua, double ub, double va, double vb, double whole,
                  double tol, int depth) {
        const double um = 0.5 * (ua + ub), vm = 0.5 * (va + vb);
        const double q00 = simpson_cell(ua, um, va, vm);
        const double q01 = simpson_cell(ua, um, vm, vb);
        const double q10 = simpson_cell(um, ub, va, vm);
        const double q11 = simpson_cell(um, ub, vm, vb);
        const double sum = q00 + q01 + q10 + q11;
        if (depth >= 24 || std::fabs(sum - whole) < 15.0 * tol) {
            return sum + (sum - whole) / 15.0;
        }
        const double child_tol = tol / 4.0;
        return refine(ua, um, va, vm, q00, child_tol, depth + 1) +
               refine(ua, um, vm, vb, q01, child_tol, depth + 1) +
               refine(um, ub, va, vm, q10, child_tol, depth + 1) +
               refine(um, ub, vm, vb, q11, child_tol, depth + 1);
    }

    double (*f_)(double, double, double);
    double param_;
    double abs_tol_;
};

// log(sum_i exp(w_i) - (count - 1)) via the largest exponent, for the
// regime where exp(w_i) would overflow. All w_i >= 0.
double log_generator_sum_large(std::span<const double> w, double w_max) {
    double inner = 0.0;
    for (double wi : w) inner += std::exp(wi - w_max);
    inner -= static_cast<double>(w.size() - 1) * std::exp(-w_max);
    return w_max + std::log(inner);
}

// CDF over interior coordinates (all in (0,1)), theta0 above the
// independence threshold. Uses expm1/log1p in the ordinary regime and a
// log-sum-exp fallback when u^-theta0 would overflow.
double clayton_cdf_interior(std::span<const double> u, double theta0) {
    double s = 0.0;
    double w_max = 0.0;
    for (double ui : u) {
        const double w = -theta0 * std::log(ui);
        w_max = std::max(w_max, w);
        if (w <= 650.0) s += std::expm1(w);
    }
    if (w_max > 650.0) {
        std::vector<double> w(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) w[i] = -theta0 * std::log(u[i]);
        return std::exp(-log_generator_sum_large(w, w_max) / theta0);
    }
    return std::exp(-std::log1p(s) / theta0);
}

double clayton_cdf_value(double u, double v, double theta0) {
    if (u <= 0.0 || v <= 0.0) return 0.0;
    if (u >= 1.0 && v >= 1.0) return 1.0;
    if (v >= 1.0) return u;
    if (u >= 1.0) return v;
    if (theta0 < ClaytonCopula::kIndependenceEps) return u * v;
    const double uv[2] = {u, v};
    return clayton_cdf_interior(uv, theta0);
}

} // namespace

// ---------------------------------------------------------------------------
// GammaMarginal

GammaMarginal::GammaMarginal(double shape_, double scale_) : shape(shape_), scale(scale_) {
    if (!(shape > 0.0)) throw std::invalid_argument("GammaMarginal: shape must be > 0");
    if (!(scale > 0.0)) throw std::invalid_argument("GammaMarginal: scale must be > 0");
}

double GammaMarginal::pdf(double y) const {
    if (y < 0.0) throw std::invalid_argument("GammaMarginal::pdf: y must be >= 0");
    if (y == 0.0) {
        if (shape > 1.0) return 0.0;
        if (shape == 1.0) return 1.0 / scale;
        return kInf; // density diverges at the origin for shape < 1
    }
    return std::exp(log_pdf(y));
}

double GammaMarginal::log_pdf(double y) const {
    if (y < 0.0) throw std::invalid_argument("GammaMarginal::log_pdf: y must be >= 0");
    if (y == 0.0) {
        if (shape > 1.0) return -kInf;
        if (shape == 1.0) return -std::log(scale);
        return kInf;
    }
    return (shape - 1.0) * std::log(y) - y / scale - shape * std::log(scale) -
           std::lgamma(shape);
}

double GammaMarginal::cdf(double y) const {
    if (y < 0.0) throw std::invalid_argument("GammaMarginal::cdf: y must be >= 0");
    return special::regularized_gamma_p(shape, y / scale);
}

double GammaMarginal::quantile(double p) const {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("GammaMarginal::quantile: p must be in (0,1)");
    }
    // Bracket the root, then safeguarded Newton.
    double lo = 0.0;
    double hi = mean() + 10.0 * scale * std::sqrt(shape);
    while (cdf(hi) < p) {
        lo = hi;
        hi *= 2.0;
        if (std::isinf(hi)) throw std::runtime_error("GammaMarginal::quantile: bracket overflow");
    }

    // Wilson-Hilferty starting point.
    const double z = special::standard_normal_quantile(p);
    const double wh = 1.0 - 1.0 / (9.0 * shape) + z / (3.0 * std::sqrt(shape));
    double y = shape * scale * wh * wh * wh;
    if (!(y > lo && y < hi)) y = 0.5 * (lo + hi);

    for (int it = 0; it < 200; ++it) {
        const double err = cdf(y) - p;
        if (std::fabs(err) <= 1e-13) return y;
        if (err > 0.0) hi = y; else lo = y;
        const double deriv = pdf(y);
        double next = (deriv > 0.0 && std::isfinite(deriv)) ? y - err / deriv : 0.0;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        y = next;
    }
    return y; // bisection fallback has converged to ~1e-13 by now
}

// ---------------------------------------------------------------------------
// ClaytonCopula

ClaytonCopula::ClaytonCopula(double theta0_) : theta0(theta0_) {
    if (!(theta0 > 0.0)) throw std::invalid_argument("ClaytonCopula: theta0 must be > 0");
}

double ClaytonCopula::cdf(double u, double v) const {
    if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) {
        throw std::invalid_argument("ClaytonCopula::cdf: arguments must be in [0,1]");
    }
    return clayton_cdf_value(u, v, theta0);
}

double ClaytonCopula::cdf(std::span<const double> u) const {
    bool all_one = true;
    for (double ui : u) {
        if (ui < 0.0 || ui > 1.0) {
            throw std::invalid_argument("ClaytonCopula::cdf: arguments must be in [0,1]");
        }
        if (ui == 0.0) return 0.0;
        if (ui < 1.0) all_one = false;
    }
    if (all_one) return 1.0;
    if (theta0 < kIndependenceEps) {
        double prod = 1.0;
        for (double ui : u) prod *= ui;
        return prod;
    }
    // Coordinates at 1 drop out of the generator sum exactly.
    std::vector<double> interior;
    interior.reserve(u.size());
    for (double ui : u) {
        if (ui < 1.0) interior.push_back(ui);
    }
    return clayton_cdf_interior(interior, theta0);
}

double ClaytonCopula::density(double u, double v) const {
    const double args[2] = {u, v};
    return std::exp(log_density(args));
}

double ClaytonCopula::log_density(std::span<const double> u) const {
    const std::size_t L = u.size();
    for (double ui : u) {
        if (!(ui > 0.0 && ui < 1.0)) {
            throw std::invalid_argument("ClaytonCopula::density: arguments must be in (0,1)");
        }
    }
    if (L <= 1) return 0.0;
    if (theta0 < kIndependenceEps) return 0.0;
    double log_prefactor = 0.0;
    for (std::size_t i = 1; i < L; ++i) {
        log_prefactor += std::log1p(static_cast<double>(i) * theta0);
    }
    double sum_log_u = 0.0;
    double s = 0.0;
    double w_max = 0.0;
    for (double ui : u) {
        const double lu = std::log(ui);
        sum_log_u += lu;
        const double w = -theta0 * lu;
        w_max = std::max(w_max, w);
        if (w <= 650.0) s += std::expm1(w);
    }
    double log_generator;
    if (w_max > 650.0) {
        std::vector<double> w(L);
        for (std::size_t i = 0; i < L; ++i) w[i] = -theta0 * std::log(u[i]);
        log_generator = log_generator_sum_large(w, w_max);
    } else {
        log_generator = std::log1p(s);
    }
    return log_prefactor - (1.0 + theta0) * sum_log_u -
           (static_cast<double>(L) + 1.0 / theta0) * log_generator;
}

double ClaytonCopula::spearman_rho() const {
    AdaptiveSquareQuadrature quad(&clayton_cdf_value, theta0, 1e-5);
    return 12.0 * quad.integrate_unit_square() - 3.0;
}

ClaytonCopula ClaytonCopula::from_spearman(double rho) {
    if (!(rho > 0.0 && rho < 1.0)) {
        throw std::invalid_argument("ClaytonCopula::from_spearman: rho must be in (0,1)");
    }
    double lo = 1e-6, hi = 1.0;
    while (ClaytonCopula(hi).spearman_rho() < rho) {
        hi *= 2.0;
        if (hi > 1e4) throw std::runtime_error("ClaytonCopula::from_spearman: rho out of reach");
    }
    for (int it = 0; it < 80 && hi - lo > 1e-7 * (1.0 + lo); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (ClaytonCopula(mid).spearman_rho() < rho) lo = mid; else hi = mid;
    }
    return ClaytonCopula(0.5 * (lo + hi));
}

// ---------------------------------------------------------------------------
// ParameterVector

ParameterVector::ParameterVector(double theta0_, std::vector<double> shapes)
    : theta0(theta0_), marginal_shapes(std::move(shapes)) {}

std::vector<double> ParameterVector::components() const {
    std::vector<double> c;
    c.reserve(dimension());
    c.push_back(theta0);
    c.insert(c.end(), marginal_shapes.begin(), marginal_shapes.end());
    return c;
}

ParameterVector ParameterVector::from_components(std::span<const double> c) {
    if (c.empty()) throw std::invalid_argument("ParameterVector: empty component list");
    return ParameterVector(c[0], std::vector<double>(c.begin() + 1, c.end()));
}

bool ParameterVector::is_valid() const {
    if (!(theta0 > 0.0) || !std::isfinite(theta0)) return false;
    for (double s : marginal_shapes) {
        if (!(s > 0.0) || !std::isfinite(s)) return false;
    }
    return true;
}

void ParameterVector::validate() const {
    if (!is_valid()) {
        throw std::invalid_argument("ParameterVector: all components must be finite and > 0");
    }
}

// ---------------------------------------------------------------------------
// JointModel

JointModel::JointModel(std::vector<GammaMarginal> marginals, ClaytonCopula copula)
    : marginals_(std::move(marginals)), copula_(copula) {
    if (marginals_.empty()) throw std::invalid_argument("JointModel: needs at least one marginal");
}

JointModel JointModel::from_parameters(const ParameterVector& theta,
                                       std::span<const double> scales) {
    theta.validate();
    if (scales.size() != theta.sensor_count()) {
        throw std::invalid_argument("JointModel: scales/shape count mismatch");
    }
    std::vector<GammaMarginal> ms;
    ms.reserve(scales.size());
    for (std::size_t i = 0; i < scales.size(); ++i) {
        ms.emplace_back(theta.marginal_shapes[i], scales[i]);
    }
    return JointModel(std::move(ms), ClaytonCopula(theta.theta0));
}

JointModel JointModel::at(const ParameterVector& theta) const {
    if (theta.sensor_count() != sensor_count()) {
        throw std::invalid_argument("JointModel::at: parameter dimension mismatch");
    }
    return from_parameters(theta, scales());
}

std::vector<double> JointModel::scales() const {
    std::vector<double> s;
    s.reserve(marginals_.size());
    for (const auto& m : marginals_) s.push_back(m.scale);
    return s;
}

ParameterVector JointModel::parameters() const {
    std::vector<double> shapes;
    shapes.reserve(marginals_.size());
    for (const auto& m : marginals_) shapes.push_back(m.shape);
    return ParameterVector(copula_.theta0, std::move(shapes));
}

double JointModel::log_pdf(std::span<const double> y) const {
    if (y.size() != sensor_count()) {
        throw std::invalid_argument("JointModel::log_pdf: point dimension mismatch");
    }
    double sum = 0.0;
    std::vector<double> us(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(y[i] > 0.0)) return -kInf;
        const double lp = marginals_[i].log_pdf(y[i]);
        if (!std::isfinite(lp)) return -kInf;
        sum += lp;
        // Clamp to the open interval: the copula density boundary is a
        // measure-zero limit the CDF saturation would otherwise hit.
        us[i] = std::clamp(marginals_[i].cdf(y[i]), 1e-15, 1.0 - 1e-15);
    }
    return sum + copula_.log_density(us);
}

double JointModel::log_pdf(std::span<const double> y, const ParameterVector& theta) const {
    return at(theta).log_pdf(y);
}

double JointModel::pdf(std::span<const double> y) const { return std::exp(log_pdf(y)); }

double JointModel::cdf(std::span<const double> y) const {
    if (y.size() != sensor_count()) {
        throw std::invalid_argument("JointModel::cdf: point dimension mismatch");
    }
    std::vector<double> us(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) us[i] = marginals_[i].cdf(y[i]);
    return copula_.cdf(us);
}

} // namespace qmle
